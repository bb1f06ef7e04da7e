/* Copyright 2026 the dm-testlab authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// CSV ingestion contracts, configuration validation and canonicalization,
// report assembly for the four workflows, byte-for-byte reproducibility of
// reports from their embedded configurations, and a smoke test of the
// installed command-line binary.

#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "dml/cli.hpp"

using Catch::Matchers::ContainsSubstring;
using dml::ordered_json;

namespace {

std::filesystem::path temp_root() {
    static const std::filesystem::path dir = [] {
        auto d = std::filesystem::temp_directory_path() /
                 ("dml_cli_test_" + std::to_string(::getpid()));
        std::filesystem::create_directories(d);
        return d;
    }();
    return dir;
}

std::string write_file(const std::string& name, const std::string& text) {
    const auto path = temp_root() / name;
    std::ofstream out(path, std::ios::binary);
    out << text;
    return path.string();
}

ordered_json oj(const std::string& text) { return ordered_json::parse(text); }

/// Deterministic normal-identity fixture written as a CSV file; the exact
/// doubles are kept so tests can compute closed-form oracles on them.
struct NormalFixture {
    std::vector<double> x;
    std::vector<double> y;
    std::string path;
};

NormalFixture normal_fixture() {
    NormalFixture f;
    // A fixed, irregular point set (no randomness needed; shortest
    // round-trip formatting makes the file reproduce these doubles exactly).
    const int n = 14;
    for (int i = 0; i < n; ++i) {
        const double x = static_cast<double>(i) / (n - 1.0);
        const double bump = 0.37 * std::sin(5.0 * x) + 0.11 * x * x;
        f.x.push_back(x);
        f.y.push_back(0.8 + 1.9 * x + bump);
    }
    std::string text = "y,x1\n";
    for (int i = 0; i < n; ++i) {
        text += dml::detail::cli::format_double(f.y[static_cast<std::size_t>(i)]);
        text += ',';
        text += dml::detail::cli::format_double(f.x[static_cast<std::size_t>(i)]);
        text += '\n';
    }
    f.path = write_file("normal_fixture.csv", text);
    return f;
}

int run_binary(const std::string& args) {
    const std::string cmd =
        std::string(DM_TESTLAB_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

// ---------------------------------------------------------------------------
// CSV reader
// ---------------------------------------------------------------------------

TEST_CASE("csv reader ingests a minimal table", "[csv]") {
    const std::string path =
        write_file("mini.csv", "y,x1\n0.5,1\n-0.25,2\n3,0.75\n");
    const dml::IngestedData d = dml::ingest_csv(path, "y", {"x1"});
    REQUIRE(d.y.size() == 3);
    REQUIRE(d.x.rows() == 3);
    REQUIRE(d.x.cols() == 1);
    CHECK(d.y[0] == 0.5);
    CHECK(d.y[1] == -0.25);
    CHECK(d.y[2] == 3.0);
    CHECK(d.x(0, 0) == 1.0);
    CHECK(d.x(2, 0) == 0.75);
}

TEST_CASE("csv reader reports cell coordinates", "[csv]") {
    SECTION("missing value") {
        const std::string path =
            write_file("hole.csv", "y,x1\n0.5,0.1\n0.7,\n0.2,0.3\n");
        try {
            dml::ingest_csv(path, "y", {"x1"});
            FAIL("expected csv_error");
        } catch (const dml::csv_error& e) {
            CHECK_THAT(e.what(), ContainsSubstring("row 2, column x1"));
            CHECK(e.row() == 2);
            CHECK(e.column() == "x1");
        }
    }
    SECTION("unparseable text") {
        const std::string path =
            write_file("text.csv", "y,x1\n0.5,0.1\nabc,0.2\n");
        try {
            dml::ingest_csv(path, "y", {"x1"});
            FAIL("expected csv_error");
        } catch (const dml::csv_error& e) {
            CHECK_THAT(e.what(), ContainsSubstring("row 2, column y"));
            CHECK_THAT(e.what(), ContainsSubstring("abc"));
            CHECK(e.row() == 2);
            CHECK(e.column() == "y");
        }
    }
    SECTION("non-finite value") {
        const std::string path =
            write_file("inf.csv", "y,x1\n0.5,0.1\n0.2,inf\n");
        REQUIRE_THROWS_WITH(dml::ingest_csv(path, "y", {"x1"}),
                            ContainsSubstring("row 2, column x1"));
    }
}

TEST_CASE("csv reader validates the table shape", "[csv]") {
    SECTION("ragged row") {
        const std::string path =
            write_file("ragged.csv", "y,x1\n0.5,0.1\n0.7\n");
        REQUIRE_THROWS_WITH(
            dml::read_csv(path),
            ContainsSubstring("row 2 has 1 fields, expected 2"));
    }
    SECTION("duplicate header") {
        const std::string path = write_file("dup.csv", "y,y\n0.5,0.1\n");
        REQUIRE_THROWS_AS(dml::read_csv(path), dml::csv_error);
    }
    SECTION("empty header name") {
        const std::string path = write_file("noname.csv", "y,\n0.5,0.1\n");
        REQUIRE_THROWS_AS(dml::read_csv(path), dml::csv_error);
    }
    SECTION("blank interior line") {
        const std::string path =
            write_file("blank.csv", "y,x1\n0.5,0.1\n\n0.7,0.2\n");
        REQUIRE_THROWS_AS(dml::read_csv(path), dml::csv_error);
    }
    SECTION("no data rows") {
        const std::string path = write_file("headonly.csv", "y,x1\n");
        REQUIRE_THROWS_AS(dml::read_csv(path), dml::csv_error);
    }
    SECTION("missing file") {
        REQUIRE_THROWS_AS(dml::read_csv("/nonexistent/nowhere.csv"),
                          dml::csv_error);
    }
    SECTION("unknown column names the available ones") {
        const std::string path = write_file("cols.csv", "y,x1\n0.5,0.1\n");
        REQUIRE_THROWS_WITH(dml::ingest_csv(path, "y", {"x9"}),
                            ContainsSubstring("x1"));
    }
}

TEST_CASE("csv reader tolerates line-ending and encoding noise", "[csv]") {
    const std::string path = write_file(
        "noise.csv", "\xEF\xBB\xBFy,x1\r\n 0.5 ,0.1\r\n0.7,0.2\r\n\n\n");
    const dml::CsvTable table = dml::read_csv(path);
    REQUIRE(table.rows() == 2);
    CHECK(table.columns[0] == "y");
    CHECK(table.values(0, 0) == 0.5);
    CHECK(table.values(1, 1) == 0.2);
}

// ---------------------------------------------------------------------------
// Configuration validation
// ---------------------------------------------------------------------------

namespace {

ordered_json base_power_config() {
    return oj(R"({
      "command": "power",
      "model": {"family": "von-mises", "link": "tan-half"},
      "design": {"n": 40, "p": 3},
      "hypothesis": {"coefficients": [2, 3], "values": [0.0, 0.0]},
      "power": {"beta": [1.0, 0.0, 0.0], "phi": 2.0, "epsilon": [0.2, -0.1]}
    })");
}

}  // namespace

TEST_CASE("configuration validation rejects malformed documents", "[cli]") {
    SECTION("unknown top-level key") {
        ordered_json cfg = base_power_config();
        cfg["bogus"] = 1;
        REQUIRE_THROWS_WITH(dml::parse_run_config(cfg),
                            ContainsSubstring("unknown key 'bogus'"));
    }
    SECTION("unknown nested key") {
        ordered_json cfg = base_power_config();
        cfg["model"]["foo"] = 1;
        REQUIRE_THROWS_WITH(dml::parse_run_config(cfg),
                            ContainsSubstring("unknown key 'foo' in model"));
    }
    SECTION("bad command") {
        ordered_json cfg = base_power_config();
        cfg["command"] = "estimate";
        REQUIRE_THROWS_AS(dml::parse_run_config(cfg), dml::config_error);
    }
    SECTION("unknown family is rejected at parse time") {
        ordered_json cfg = base_power_config();
        cfg["model"]["family"] = "cauchy";
        REQUIRE_THROWS_AS(dml::parse_run_config(cfg), dml::error);
    }
    SECTION("fit rejects a hypothesis block") {
        ordered_json cfg = oj(R"({
          "command": "fit",
          "model": {"family": "normal", "link": "identity"},
          "data": {"path": "x.csv", "response": "y", "covariates": ["x1"]},
          "hypothesis": {"phi0": 1.0}
        })");
        REQUIRE_THROWS_WITH(dml::parse_run_config(cfg),
                            ContainsSubstring("no hypothesis"));
    }
    SECTION("test requires a data block") {
        ordered_json cfg = base_power_config();
        cfg["command"] = "test";
        cfg.erase("power");
        REQUIRE_THROWS_WITH(dml::parse_run_config(cfg),
                            ContainsSubstring("requires a data block"));
    }
    SECTION("power needs exactly one covariate source") {
        ordered_json cfg = base_power_config();
        cfg["data"] = {{"path", "x.csv"}, {"covariates", {"x1"}}};
        REQUIRE_THROWS_WITH(dml::parse_run_config(cfg),
                            ContainsSubstring("exactly one covariate source"));
        cfg.erase("data");
        cfg.erase("design");
        REQUIRE_THROWS_WITH(dml::parse_run_config(cfg),
                            ContainsSubstring("exactly one covariate source"));
    }
    SECTION("power forbids a response column") {
        ordered_json cfg = base_power_config();
        cfg.erase("design");
        cfg["data"] = {{"path", "x.csv"},
                       {"response", "y"},
                       {"covariates", {"x1", "x2"}}};
        REQUIRE_THROWS_WITH(dml::parse_run_config(cfg),
                            ContainsSubstring("remove data.response"));
    }
    SECTION("hypothesis needs one of coefficients or phi0") {
        ordered_json cfg = base_power_config();
        cfg["hypothesis"] = {{"phi0", 1.0},
                             {"coefficients", {2}},
                             {"values", {0.0}}};
        REQUIRE_THROWS_AS(dml::parse_run_config(cfg), dml::config_error);
        cfg["hypothesis"] = ordered_json::object();
        REQUIRE_THROWS_AS(dml::parse_run_config(cfg), dml::config_error);
    }
    SECTION("positions are 1-based and distinct") {
        ordered_json cfg = base_power_config();
        cfg["hypothesis"]["coefficients"] = {0, 2};
        REQUIRE_THROWS_WITH(dml::parse_run_config(cfg),
                            ContainsSubstring("1-based"));
        cfg["hypothesis"]["coefficients"] = {2, 2};
        REQUIRE_THROWS_WITH(dml::parse_run_config(cfg),
                            ContainsSubstring("twice"));
    }
    SECTION("value grids belong to the test command") {
        ordered_json cfg = base_power_config();
        cfg["hypothesis"]["values"] = {{0.0, 0.0}, {0.1, 0.1}};
        REQUIRE_THROWS_WITH(dml::parse_run_config(cfg),
                            ContainsSubstring("test command"));
    }
    SECTION("value length must match the tested positions") {
        ordered_json cfg = base_power_config();
        cfg["hypothesis"]["values"] = {0.0};
        REQUIRE_THROWS_WITH(dml::parse_run_config(cfg),
                            ContainsSubstring("length"));
    }
    SECTION("power.beta must satisfy the hypothesis") {
        ordered_json cfg = base_power_config();
        cfg["power"]["beta"] = {1.0, 0.5, 0.0};
        REQUIRE_THROWS_WITH(dml::parse_run_config(cfg),
                            ContainsSubstring("satisfy the hypothesis"));
    }
    SECTION("precision power rejects beta") {
        ordered_json cfg = base_power_config();
        cfg["model"] = {{"family", "normal"}, {"link", "identity"}};
        cfg["hypothesis"] = {{"phi0", 1.0}};
        cfg["power"] = {{"beta", {1.0, 0.0, 0.0}}, {"epsilon", 0.1}};
        REQUIRE_THROWS_AS(dml::parse_run_config(cfg), dml::config_error);
    }
    SECTION("precision displacement keeps the precision positive") {
        ordered_json cfg = base_power_config();
        cfg["model"] = {{"family", "normal"}, {"link", "identity"}};
        cfg["hypothesis"] = {{"phi0", 1.0}};
        cfg["power"] = {{"epsilon", -1.5}};
        REQUIRE_THROWS_AS(dml::parse_run_config(cfg), dml::config_error);
    }
    SECTION("levels must lie strictly inside the unit interval") {
        ordered_json cfg = base_power_config();
        cfg["power"]["levels"] = {0.1, 1.0};
        REQUIRE_THROWS_WITH(dml::parse_run_config(cfg),
                            ContainsSubstring("between 0 and 1"));
    }
    SECTION("nonlinear predictors need a data block") {
        ordered_json cfg = base_power_config();
        cfg["model"] = {{"family", "gamma"},
                        {"link", "log"},
                        {"predictor", "expcurve"}};
        REQUIRE_THROWS_WITH(dml::parse_run_config(cfg),
                            ContainsSubstring("data block"));
    }
    SECTION("nonlinear predictors manage their own intercept") {
        ordered_json cfg = oj(R"({
          "command": "fit",
          "model": {"family": "gamma", "link": "log",
                    "predictor": "expcurve"},
          "data": {"path": "x.csv", "response": "y", "covariates": ["x1"],
                   "intercept": true}
        })");
        REQUIRE_THROWS_WITH(dml::parse_run_config(cfg),
                            ContainsSubstring("intercept"));
    }
    SECTION("negative seed is rejected") {
        ordered_json cfg = base_power_config();
        cfg["seed"] = -1;
        REQUIRE_THROWS_WITH(dml::parse_run_config(cfg),
                            ContainsSubstring("unsigned"));
    }
    SECTION("output format is constrained") {
        ordered_json cfg = base_power_config();
        cfg["output"] = {{"format", "xml"}};
        REQUIRE_THROWS_WITH(dml::parse_run_config(cfg),
                            ContainsSubstring("json or csv"));
    }
    SECTION("simulate validates replications") {
        ordered_json cfg = oj(R"({
          "command": "simulate",
          "model": {"family": "normal", "link": "identity"},
          "design": {"n": 20, "p": 2},
          "hypothesis": {"coefficients": [2], "values": [0.0]},
          "sim": {"beta": [1.0, 0.0], "phi": 1.0, "replications": 0}
        })");
        REQUIRE_THROWS_WITH(dml::parse_run_config(cfg),
                            ContainsSubstring("replications"));
    }
}

TEST_CASE("hypothesis positions canonicalize to ascending order", "[cli]") {
    ordered_json cfg = base_power_config();
    cfg["hypothesis"]["coefficients"] = {3, 2};
    cfg["hypothesis"]["values"] = {0.5, -0.5};   // aligned with (3, 2)
    cfg["power"]["beta"] = {1.0, -0.5, 0.5};
    cfg["power"]["epsilon"] = {0.2, -0.1};       // aligned with (3, 2)
    const dml::RunConfig parsed = dml::parse_run_config(cfg);
    REQUIRE(parsed.hypothesis->positions ==
            std::vector<Eigen::Index>{1, 2});
    CHECK(parsed.hypothesis->value_grid.front()[0] == -0.5);
    CHECK(parsed.hypothesis->value_grid.front()[1] == 0.5);
    CHECK(parsed.power->epsilon[0] == -0.1);
    CHECK(parsed.power->epsilon[1] == 0.2);
    const ordered_json& echo = parsed.resolved;
    CHECK(echo["hypothesis"]["coefficients"] == ordered_json({2, 3}));
    CHECK(echo["hypothesis"]["values"] == ordered_json({-0.5, 0.5}));
    CHECK(echo["power"]["epsilon"] == ordered_json({-0.1, 0.2}));

    SECTION("grid rows are permuted the same way") {
        ordered_json tcfg = oj(R"({
          "command": "test",
          "model": {"family": "normal", "link": "identity"},
          "data": {"path": "x.csv", "response": "y",
                   "covariates": ["x1", "x2"]},
          "hypothesis": {"coefficients": [3, 2],
                         "values": [[0.1, 0.2], [0.3, 0.4]]}
        })");
        const dml::RunConfig t = dml::parse_run_config(tcfg);
        REQUIRE(t.hypothesis->value_grid.size() == 2);
        CHECK(t.hypothesis->value_grid[0][0] == 0.2);
        CHECK(t.hypothesis->value_grid[0][1] == 0.1);
        CHECK(t.hypothesis->value_grid[1][0] == 0.4);
        CHECK(t.hypothesis->value_grid[1][1] == 0.3);
    }
}

TEST_CASE("configuration resolution is idempotent", "[cli]") {
    const auto check_fixpoint = [](const ordered_json& raw) {
        const ordered_json once = dml::parse_run_config(raw).resolved;
        const ordered_json twice = dml::parse_run_config(once).resolved;
        CHECK(once.dump() == twice.dump());
    };
    check_fixpoint(base_power_config());
    check_fixpoint(oj(R"({
      "command": "fit",
      "model": {"family": "von-mises", "link": "tan-half"},
      "data": {"path": "a.csv", "response": "y", "covariates": ["x1"]},
      "fit": {"tol": 1e-9},
      "output": {"path": "out.json", "format": "csv"},
      "seed": 42,
      "threads": 2
    })"));
    check_fixpoint(oj(R"({
      "command": "simulate",
      "model": {"family": "normal", "link": "identity"},
      "design": {"n": 25, "p": 2, "seed": 9},
      "hypothesis": {"phi0": 1.0},
      "sim": {"beta": [1.0, 0.0], "phi": 1.25, "replications": 10,
              "overlay": true}
    })"));

    SECTION("design seed defaults to the top-level seed") {
        ordered_json cfg = base_power_config();
        cfg["seed"] = 77;
        const dml::RunConfig parsed = dml::parse_run_config(cfg);
        CHECK(parsed.design->seed == 77);
        CHECK(parsed.resolved["design"]["seed"] == 77);
    }
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

TEST_CASE("power with zero displacement reproduces the nominal level",
          "[cli]") {
    ordered_json cfg = base_power_config();
    cfg["power"]["epsilon"] = {0.0, 0.0};
    const ordered_json report = dml::run_json(cfg);
    const ordered_json& result = report["result"];
    CHECK(result["lambda"].get<double>() == 0.0);
    for (const ordered_json& entry : result["power"]) {
        const double gamma = entry["level"].get<double>();
        for (const ordered_json& value : entry["power"]) {
            CHECK(value.get<double>() == Catch::Approx(gamma).margin(1e-10));
        }
        for (const ordered_json& c : entry["clamped"]) {
            CHECK_FALSE(c.get<bool>());
        }
    }
    for (const ordered_json& pair : result["comparisons"]) {
        CHECK(pair["verdict"].get<std::string>() == "equal");
    }
}

TEST_CASE("fit report matches the closed-form normal solution", "[cli]") {
    const NormalFixture f = normal_fixture();
    ordered_json cfg = oj(R"({
      "command": "fit",
      "model": {"family": "normal", "link": "identity"},
      "data": {"path": "", "response": "y", "covariates": ["x1"]}
    })");
    cfg["data"]["path"] = f.path;
    const ordered_json report = dml::run_json(cfg);
    const ordered_json& result = report["result"];

    const auto n = static_cast<Eigen::Index>(f.y.size());
    Eigen::MatrixXd X(n, 2);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        X(i, 0) = 1.0;
        X(i, 1) = f.x[static_cast<std::size_t>(i)];
        y[i] = f.y[static_cast<std::size_t>(i)];
    }
    const Eigen::MatrixXd xtx = X.transpose() * X;
    const Eigen::VectorXd beta = xtx.ldlt().solve(X.transpose() * y);
    const double rss = (y - X * beta).squaredNorm();
    const double phi = static_cast<double>(n) / rss;
    const Eigen::MatrixXd cov =
        xtx.ldlt().solve(Eigen::MatrixXd::Identity(2, 2)) / phi;

    const ordered_json& coeffs = result["coefficients"];
    REQUIRE(coeffs.size() == 2);
    for (Eigen::Index j = 0; j < 2; ++j) {
        const auto k = static_cast<std::size_t>(j);
        CHECK(coeffs[k]["estimate"].get<double>() ==
              Catch::Approx(beta[j]).margin(1e-10));
        CHECK(coeffs[k]["std_error"].get<double>() ==
              Catch::Approx(std::sqrt(cov(j, j))).margin(1e-10));
    }
    CHECK(result["precision"]["estimate"].get<double>() ==
          Catch::Approx(phi).margin(1e-8 * phi));
    // Precision curvature for this family: alpha2 = -n / (2 phi^2).
    CHECK(result["precision"]["std_error"].get<double>() ==
          Catch::Approx(phi * std::sqrt(2.0 / static_cast<double>(n)))
              .margin(1e-8));
    CHECK(report["notes"].empty());
}

TEST_CASE("out-of-range circular responses are wrapped with a note",
          "[cli]") {
    // Same data expressed twice: once pre-wrapped, once shifted by 2 pi.
    const double two_pi = 2.0 * std::numbers::pi;
    std::string wrapped = "y,x1\n";
    std::string shifted = "y,x1\n";
    const std::vector<double> xs{0.1, 0.4, 0.7, 0.9, 0.25, 0.55};
    const std::vector<double> ys{0.3, -0.2, 0.9, 1.2, -0.7, 0.1};
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const std::string x = dml::detail::cli::format_double(xs[i]);
        wrapped += dml::detail::cli::format_double(ys[i]) + "," + x + "\n";
        const double moved = i % 2 == 0 ? ys[i] + two_pi : ys[i];
        shifted += dml::detail::cli::format_double(moved) + "," + x + "\n";
    }
    const std::string wrapped_path = write_file("vm_wrapped.csv", wrapped);
    const std::string shifted_path = write_file("vm_shifted.csv", shifted);

    ordered_json cfg = oj(R"({
      "command": "fit",
      "model": {"family": "von-mises", "link": "tan-half"},
      "data": {"path": "", "response": "y", "covariates": ["x1"]}
    })");
    cfg["data"]["path"] = wrapped_path;
    const ordered_json base = dml::run_json(cfg);
    cfg["data"]["path"] = shifted_path;
    const ordered_json moved = dml::run_json(cfg);

    REQUIRE(base["notes"].empty());
    REQUIRE(moved["notes"].size() == 1);
    CHECK_THAT(moved["notes"][0].get<std::string>(),
               ContainsSubstring("wrapped"));
    CHECK_THAT(moved["notes"][0].get<std::string>(), ContainsSubstring("3"));
    // Wrapping y + 2 pi k changes nothing else (up to the wrap roundoff).
    const auto ll_base = base["result"]["log_likelihood"].get<double>();
    const auto ll_moved = moved["result"]["log_likelihood"].get<double>();
    CHECK(ll_moved == Catch::Approx(ll_base).epsilon(1e-9));
}

TEST_CASE("subset test reports agree with the library call", "[cli]") {
    const NormalFixture f = normal_fixture();
    ordered_json cfg = oj(R"({
      "command": "test",
      "model": {"family": "normal", "link": "identity"},
      "data": {"path": "", "response": "y", "covariates": ["x1"]},
      "hypothesis": {"coefficients": [2], "values": [[0.0], [1.0]]}
    })");
    cfg["data"]["path"] = f.path;
    const ordered_json report = dml::run_json(cfg);
    const ordered_json& tests = report["result"]["tests"];
    REQUIRE(tests.size() == 2);

    const auto n = static_cast<Eigen::Index>(f.y.size());
    Eigen::MatrixXd X(n, 2);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        X(i, 0) = 1.0;
        X(i, 1) = f.x[static_cast<std::size_t>(i)];
        y[i] = f.y[static_cast<std::size_t>(i)];
    }
    const auto& fam = dml::builtin_family("normal");
    const auto link = dml::builtin_link("identity", &fam);
    const auto pred = dml::builtin_predictor("linear");
    std::vector<Eigen::VectorXd> grid{Eigen::VectorXd::Zero(1),
                                      Eigen::VectorXd::Ones(1)};
    const auto direct =
        dml::subset_test_grid(fam, link, pred, X, y, {1}, grid);
    for (std::size_t g = 0; g < 2; ++g) {
        for (std::size_t s = 0; s < 4; ++s) {
            CHECK(tests[g]["statistics"][s].get<double>() ==
                  direct[g].tests.statistic[s]);
            CHECK(tests[g]["p_values"][s].get<double>() ==
                  direct[g].tests.p_value[s]);
        }
    }
    CHECK(report["result"]["df"] == 1);
}

TEST_CASE("precision reports carry the convention notes", "[cli]") {
    const NormalFixture f = normal_fixture();
    ordered_json cfg = oj(R"({
      "command": "test",
      "model": {"family": "normal", "link": "identity"},
      "data": {"path": "", "response": "y", "covariates": ["x1"]},
      "hypothesis": {"phi0": 2.0}
    })");
    cfg["data"]["path"] = f.path;
    const ordered_json report = dml::run_json(cfg);
    REQUIRE(report["notes"].size() == 2);
    CHECK_THAT(report["notes"][0].get<std::string>(),
               ContainsSubstring("twice the log-likelihood drop"));
    CHECK_THAT(report["notes"][1].get<std::string>(),
               ContainsSubstring("quadratic form"));
    const ordered_json& entry = report["result"]["tests"][0];
    // This family's dispersion statistics share one closed form.
    CHECK(entry["statistics"][1].get<double>() ==
          entry["statistics"][2].get<double>());
}

TEST_CASE("reports round-trip bit-for-bit from their embedded config",
          "[cli]") {
    SECTION("simulate with a synthetic design") {
        ordered_json cfg = oj(R"({
          "command": "simulate",
          "model": {"family": "von-mises", "link": "tan-half"},
          "design": {"n": 25, "p": 3},
          "hypothesis": {"coefficients": [2, 3], "values": [0.0, 0.0]},
          "sim": {"beta": [1.0, 0.25, 0.0], "phi": 2.0,
                  "replications": 60},
          "seed": 17,
          "threads": 3
        })");
        const ordered_json report = dml::run_json(cfg);
        const ordered_json again = dml::run_json(report["config"]);
        CHECK(report.dump() == again.dump());
        CHECK(report["generator"] == "philox4x32-10");
    }
    SECTION("test on file data") {
        const NormalFixture f = normal_fixture();
        ordered_json cfg = oj(R"({
          "command": "test",
          "model": {"family": "normal", "link": "identity"},
          "data": {"path": "", "response": "y", "covariates": ["x1"]},
          "hypothesis": {"coefficients": [2], "values": [0.5]}
        })");
        cfg["data"]["path"] = f.path;
        const ordered_json report = dml::run_json(cfg);
        const ordered_json again = dml::run_json(report["config"]);
        CHECK(report.dump() == again.dump());
        // Data-only runs draw nothing, so no generator is advertised.
        CHECK_FALSE(report.contains("generator"));
    }
}

TEST_CASE("simulate report attaches the analytic overlay", "[cli]") {
    ordered_json cfg = oj(R"({
      "command": "simulate",
      "model": {"family": "normal", "link": "identity"},
      "design": {"n": 30, "p": 2},
      "hypothesis": {"coefficients": [2], "values": [0.0]},
      "sim": {"beta": [1.0, 0.2], "phi": 1.0, "replications": 40},
      "seed": 4
    })");
    const ordered_json report = dml::run_json(cfg);
    const ordered_json& result = report["result"];
    REQUIRE(result.contains("expansion"));
    CHECK(result["expansion"]["lambda"].get<double>() > 0.0);
    REQUIRE(result["expansion"]["power"].size() == 3);
    for (const ordered_json& entry : result["expansion"]["power"]) {
        for (const ordered_json& v : entry["power_percent"]) {
            const double pct = v.get<double>();
            CHECK(pct >= 0.0);
            CHECK(pct <= 100.0);
        }
    }

    SECTION("null-generating processes attach no overlay by default") {
        cfg["sim"]["beta"] = {1.0, 0.0};
        const ordered_json null_report = dml::run_json(cfg);
        CHECK_FALSE(null_report["result"].contains("expansion"));
    }
    SECTION("overlay false suppresses it") {
        cfg["sim"]["overlay"] = false;
        const ordered_json off = dml::run_json(cfg);
        CHECK_FALSE(off["result"].contains("expansion"));
    }
}

TEST_CASE("simulation reports count failure reasons", "[cli]") {
    // This family has no exact sampler, so every replication fails and the
    // report must say why rather than silently shrinking.
    ordered_json cfg = oj(R"({
      "command": "simulate",
      "model": {"family": "reciprocal-inverse-gaussian", "link": "log"},
      "design": {"n": 15, "p": 2},
      "hypothesis": {"coefficients": [2], "values": [0.0]},
      "sim": {"beta": [1.0, 0.0], "phi": 2.0, "replications": 4}
    })");
    const ordered_json report = dml::run_json(cfg);
    const ordered_json& result = report["result"];
    CHECK(result["used"] == 0);
    CHECK(result["failures"] == 4);
    CHECK(result["reliable"] == false);
    REQUIRE(result["failure_reasons"].contains("unsupported"));
    CHECK(result["failure_reasons"]["unsupported"] == 4);
}

TEST_CASE("error reports carry machine-readable classification", "[cli]") {
    SECTION("configuration error is a usage failure") {
        const dml::config_error e("config: broken");
        const ordered_json report =
            dml::error_report("", ordered_json::object(), e);
        CHECK(report["error"]["type"] == "config");
        CHECK(report["error"]["category"] == "usage");
        CHECK(report["error"]["exit_code"] == 2);
        CHECK_THAT(report["error"]["message"].get<std::string>(),
                   ContainsSubstring("broken"));
    }
    SECTION("csv error carries coordinates") {
        const dml::csv_error e("csv: missing value at row 2, column x1", 2,
                               "x1");
        const ordered_json report = dml::error_report("fit", {}, e);
        CHECK(report["error"]["type"] == "csv");
        CHECK(report["error"]["row"] == 2);
        CHECK(report["error"]["column"] == "x1");
        CHECK(report["error"]["exit_code"] == 2);
    }
    SECTION("numerical failures map to exit code 3") {
        const dml::nonconvergence_error e("fit: no convergence", {});
        const ordered_json report = dml::error_report("fit", {}, e);
        CHECK(report["error"]["type"] == "nonconvergence");
        CHECK(report["error"]["category"] == "numeric");
        CHECK(report["error"]["exit_code"] == 3);
    }
}

TEST_CASE("csv rendering round-trips every number exactly", "[cli]") {
    const auto roundtrip = [](double v) {
        const std::string s = dml::detail::cli::format_double(v);
        double back = 0.0;
        const auto res =
            std::from_chars(s.data(), s.data() + s.size(), back);
        REQUIRE(res.ec == std::errc());
        CHECK(back == v);
    };
    roundtrip(0.1);
    roundtrip(1.0 / 3.0);
    roundtrip(9.87e300);
    roundtrip(-2.2250738585072014e-308);
    roundtrip(123456789.123456789);

    const NormalFixture f = normal_fixture();
    ordered_json cfg = oj(R"({
      "command": "fit",
      "model": {"family": "normal", "link": "identity"},
      "data": {"path": "", "response": "y", "covariates": ["x1"]}
    })");
    cfg["data"]["path"] = f.path;
    const ordered_json report = dml::run_json(cfg);
    const std::string csv = dml::report_to_csv(report);
    CHECK_THAT(csv, ContainsSubstring("parameter,estimate,std_error\n"));
    // One line per coefficient plus the precision row and the header.
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
    const std::string est = dml::detail::cli::format_double(
        report["result"]["coefficients"][0]["estimate"].get<double>());
    CHECK_THAT(csv, ContainsSubstring("beta1," + est + ","));
}

// ---------------------------------------------------------------------------
// The installed binary
// ---------------------------------------------------------------------------

TEST_CASE("command-line binary honors the reporting contract",
          "[cli][binary]") {
    const NormalFixture f = normal_fixture();
    ordered_json cfg = oj(R"({
      "command": "fit",
      "model": {"family": "normal", "link": "identity"},
      "data": {"path": "", "response": "y", "covariates": ["x1"]}
    })");
    cfg["data"]["path"] = f.path;
    const std::string cfg_path = write_file("bin_fit.json", cfg.dump(2));
    const std::string out_path = (temp_root() / "bin_fit_report.json").string();

    SECTION("success writes the report and exits zero") {
        REQUIRE(run_binary("--config " + cfg_path + " --output " + out_path) ==
                0);
        std::ifstream in(out_path, std::ios::binary);
        REQUIRE(in.good());
        const ordered_json report = ordered_json::parse(in);
        CHECK(report["tool"] == "dm-testlab");
        CHECK(report["command"] == "fit");
        CHECK(report["config"]["output"]["path"].get<std::string>() ==
              out_path);
        CHECK(report["result"]["converged"] == true);
    }
    SECTION("flag overrides land in the embedded config") {
        const std::string csv_path = (temp_root() / "bin_fit.csv").string();
        REQUIRE(run_binary("--config " + cfg_path + " --output " + csv_path +
                           " --format csv --seed 99") == 0);
        std::ifstream in(csv_path, std::ios::binary);
        std::string first_line;
        std::getline(in, first_line);
        CHECK(first_line == "parameter,estimate,std_error");
    }
    SECTION("usage failures exit with code 2") {
        CHECK(run_binary("--config /nonexistent/cfg.json") == 2);
        CHECK(run_binary("--config " + cfg_path + " --format xml") == 2);
        const std::string bad =
            write_file("bin_bad.json", R"({"command": "dance"})");
        CHECK(run_binary("--config " + bad) == 2);
    }
    SECTION("numerical failures exit with code 3") {
        // A one-point gamma "fit" with two coefficients cannot be ranked.
        const std::string tiny = write_file("bin_tiny.csv", "y,x1\n1.0,0.5\n");
        ordered_json bad = cfg;
        bad["data"]["path"] = tiny;
        const std::string bad_path =
            write_file("bin_rank.json", bad.dump(2));
        CHECK(run_binary("--config " + bad_path) == 3);
    }
}
