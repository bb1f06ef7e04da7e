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

// Configuration-driven front end: a JSON run configuration selects one of
// four workflows (fit, test, power, simulate) and produces a structured
// report. Every report embeds the fully resolved configuration, and the
// resolution is idempotent, so re-running an embedded configuration with the
// same seed reproduces the report byte for byte. Reports carry no
// timestamps or machine identifiers.
//
// Conventions fixed here:
//   * coefficient positions in configurations are 1-based and are
//     canonicalized to ascending order (hypothesis values and power offsets
//     are permuted along with them);
//   * von Mises responses are wrapped into (-pi, pi] on ingestion, with the
//     wrap count reported in the notes;
//   * rejection rates and their Monte Carlo standard errors are reported in
//     percent.

#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "dml/csv.hpp"
#include "dml/error.hpp"
#include "dml/expansion.hpp"
#include "dml/family.hpp"
#include "dml/fit.hpp"
#include "dml/sim.hpp"
#include "dml/stats.hpp"

namespace dml {

using ordered_json = nlohmann::ordered_json;

inline constexpr const char* tool_name = "dm-testlab";
inline constexpr const char* tool_version = "1.0.0";
inline constexpr const char* generator_name = "philox4x32-10";

/// CSV data source: a response column (required by fit/test, absent for
/// power/simulate) plus named covariate columns, optionally behind a leading
/// intercept column of ones.
struct DataSpec {
    std::string path;
    std::optional<std::string> response;
    std::vector<std::string> covariates;
    bool intercept = true;
};

/// Synthetic design source for power/simulate: a leading ones column plus
/// p-1 uniform(0,1) columns drawn once from the reserved covariate stream.
struct DesignSpec {
    Eigen::Index n = 0;
    Eigen::Index p = 0;
    std::uint64_t seed = 1;
};

/// Either a coefficient-subset hypothesis (positions stored 0-based and
/// ascending; `value_grid` holds one or more aligned null-value vectors) or
/// a precision hypothesis phi = phi0.
struct HypothesisSpec {
    std::vector<Eigen::Index> positions;
    std::vector<Eigen::VectorXd> value_grid;
    std::optional<double> phi0;

    bool subset() const { return !positions.empty(); }
};

/// Local alternative for the power command. Subset form: the null
/// coefficient vector, the true precision, and the tested-block displacement
/// (aligned with the sorted hypothesis positions). Precision form: a scalar
/// displacement of phi away from phi0.
struct PowerSpec {
    std::optional<Eigen::VectorXd> beta;
    std::optional<double> phi;
    Eigen::VectorXd epsilon;
    double precision_epsilon = 0.0;
    std::vector<double> levels{0.10, 0.05, 0.01};
};

/// Data-generating process for the simulate command.
struct SimSpec {
    Eigen::VectorXd beta;
    double phi = 1.0;
    int replications = 10000;
    std::vector<double> levels{0.10, 0.05, 0.01};
    std::optional<bool> overlay;  ///< attach the expansion power overlay
};

/// A fully validated run configuration with its normalized JSON echo.
struct RunConfig {
    std::string command;
    std::string family;
    std::string link;
    std::string predictor = "linear";
    std::optional<DataSpec> data;
    std::optional<DesignSpec> design;
    std::optional<HypothesisSpec> hypothesis;
    std::optional<PowerSpec> power;
    std::optional<SimSpec> sim;
    FitOptions fit_options;
    std::string output_path;  ///< empty: standard output
    std::string format = "json";
    std::uint64_t seed = 1;
    int threads = 0;
    ordered_json resolved;
};

namespace detail::cli {

[[noreturn]] inline void fail(const std::string& msg) {
    throw config_error("config: " + msg);
}

inline const ordered_json* find(const ordered_json& obj, const char* key) {
    const auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
}

inline void expect_object(const ordered_json& j, const std::string& where) {
    if (!j.is_object()) fail(where + " must be an object");
}

inline void reject_unknown(const ordered_json& obj, const std::string& where,
                           std::initializer_list<const char*> allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* name : allowed) {
            if (it.key() == name) {
                known = true;
                break;
            }
        }
        if (!known) {
            std::string names;
            for (const char* name : allowed) {
                if (!names.empty()) names += ", ";
                names += name;
            }
            fail("unknown key '" + it.key() + "' in " + where +
                 "; allowed keys: " + names);
        }
    }
}

inline std::string require_string(const ordered_json& obj, const char* key,
                                  const std::string& where) {
    const ordered_json* v = find(obj, key);
    if (v == nullptr) fail(where + "." + key + " is required");
    if (!v->is_string()) fail(where + "." + key + " must be a string");
    return v->get<std::string>();
}

inline std::string optional_string(const ordered_json& obj, const char* key,
                                   const std::string& where,
                                   const std::string& fallback) {
    const ordered_json* v = find(obj, key);
    if (v == nullptr) return fallback;
    if (!v->is_string()) fail(where + "." + key + " must be a string");
    return v->get<std::string>();
}

inline double as_number(const ordered_json& v, const std::string& path) {
    if (!v.is_number()) fail(path + " must be a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) fail(path + " must be finite");
    return x;
}

inline double require_number(const ordered_json& obj, const char* key,
                             const std::string& where) {
    const ordered_json* v = find(obj, key);
    if (v == nullptr) fail(where + "." + key + " is required");
    return as_number(*v, where + "." + key);
}

inline std::optional<double> optional_number(const ordered_json& obj,
                                             const char* key,
                                             const std::string& where) {
    const ordered_json* v = find(obj, key);
    if (v == nullptr) return std::nullopt;
    return as_number(*v, where + "." + key);
}

inline long long require_integer(const ordered_json& obj, const char* key,
                                 const std::string& where) {
    const ordered_json* v = find(obj, key);
    if (v == nullptr) fail(where + "." + key + " is required");
    if (!v->is_number_integer() && !v->is_number_unsigned()) {
        fail(where + "." + key + " must be an integer");
    }
    return v->get<long long>();
}

inline long long optional_integer(const ordered_json& obj, const char* key,
                                  const std::string& where,
                                  long long fallback) {
    if (find(obj, key) == nullptr) return fallback;
    return require_integer(obj, key, where);
}

inline std::uint64_t optional_u64(const ordered_json& obj, const char* key,
                                  const std::string& where,
                                  std::uint64_t fallback) {
    const ordered_json* v = find(obj, key);
    if (v == nullptr) return fallback;
    if (!v->is_number_unsigned() &&
        !(v->is_number_integer() && v->get<long long>() >= 0)) {
        fail(where + "." + key + " must be an unsigned integer");
    }
    return v->get<std::uint64_t>();
}

inline bool optional_bool(const ordered_json& obj, const char* key,
                          const std::string& where, bool fallback) {
    const ordered_json* v = find(obj, key);
    if (v == nullptr) return fallback;
    if (!v->is_boolean()) fail(where + "." + key + " must be true or false");
    return v->get<bool>();
}

inline Eigen::VectorXd number_vector(const ordered_json& v,
                                     const std::string& path) {
    if (!v.is_array()) fail(path + " must be an array of numbers");
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (const ordered_json& e : v) {
        out[i] = as_number(e, path + "[" + std::to_string(i) + "]");
        ++i;
    }
    return out;
}

inline std::vector<double> level_list(const ordered_json& obj,
                                      const std::string& where) {
    std::vector<double> levels{0.10, 0.05, 0.01};
    const ordered_json* v = find(obj, "levels");
    if (v == nullptr) return levels;
    if (!v->is_array() || v->empty()) {
        fail(where + ".levels must be a non-empty array of probabilities");
    }
    levels.clear();
    Eigen::Index i = 0;
    for (const ordered_json& e : *v) {
        const double g =
            as_number(e, where + ".levels[" + std::to_string(i++) + "]");
        if (!(g > 0.0) || !(g < 1.0)) {
            fail(where + ".levels entries must lie strictly between 0 and 1");
        }
        levels.push_back(g);
    }
    return levels;
}

inline ordered_json vector_json(const Eigen::VectorXd& v) {
    ordered_json out = ordered_json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
    return out;
}

inline ordered_json double_list_json(const std::vector<double>& v) {
    ordered_json out = ordered_json::array();
    for (double e : v) out.push_back(e);
    return out;
}

/// Shortest round-trip decimal form, for the CSV renderer.
inline std::string format_double(double v) {
    std::array<char, 40> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

inline const char* dominance_name(Dominance d) {
    switch (d) {
        case Dominance::greater: return "greater";
        case Dominance::less: return "less";
        case Dominance::equal: return "equal";
        case Dominance::indeterminate: return "indeterminate";
    }
    return "indeterminate";
}

/// Sorts 1-based positions ascending, permuting the attached rows (null
/// values, offsets) identically, and rejects duplicates.
struct PositionOrder {
    std::vector<Eigen::Index> positions;  // 0-based, ascending
    std::vector<std::size_t> permutation;
};

inline PositionOrder order_positions(const ordered_json& arr,
                                     const std::string& where) {
    if (!arr.is_array() || arr.empty()) {
        fail(where + " must be a non-empty array of coefficient positions");
    }
    std::vector<Eigen::Index> raw;
    Eigen::Index i = 0;
    for (const ordered_json& e : arr) {
        const std::string path = where + "[" + std::to_string(i++) + "]";
        if (!e.is_number_integer() && !e.is_number_unsigned()) {
            fail(path + " must be an integer coefficient position");
        }
        const long long v = e.get<long long>();
        if (v < 1) fail(path + " must be at least 1 (positions are 1-based)");
        raw.push_back(static_cast<Eigen::Index>(v) - 1);
    }
    PositionOrder out;
    out.permutation.resize(raw.size());
    std::iota(out.permutation.begin(), out.permutation.end(), std::size_t{0});
    std::sort(out.permutation.begin(), out.permutation.end(),
              [&raw](std::size_t a, std::size_t b) { return raw[a] < raw[b]; });
    for (std::size_t k : out.permutation) out.positions.push_back(raw[k]);
    for (std::size_t k = 1; k < out.positions.size(); ++k) {
        if (out.positions[k] == out.positions[k - 1]) {
            fail(where + " lists coefficient position " +
                 std::to_string(out.positions[k] + 1) + " twice");
        }
    }
    return out;
}

inline Eigen::VectorXd permuted(const Eigen::VectorXd& v,
                                const std::vector<std::size_t>& perm) {
    Eigen::VectorXd out(v.size());
    for (std::size_t k = 0; k < perm.size(); ++k) {
        out[static_cast<Eigen::Index>(k)] =
            v[static_cast<Eigen::Index>(perm[k])];
    }
    return out;
}

}  // namespace detail::cli

/// Parses and validates a JSON run configuration, materializing defaults.
/// The normalized echo in `resolved` re-parses to the same configuration.
inline RunConfig parse_run_config(const ordered_json& root) {
    namespace dc = detail::cli;
    dc::expect_object(root, "configuration");
    dc::reject_unknown(root, "configuration",
                       {"command", "model", "data", "design", "hypothesis",
                        "power", "sim", "fit", "output", "seed", "threads"});

    RunConfig cfg;
    cfg.command = dc::require_string(root, "command", "configuration");
    if (cfg.command != "fit" && cfg.command != "test" &&
        cfg.command != "power" && cfg.command != "simulate") {
        dc::fail("command must be one of fit, test, power, simulate");
    }

    // --- model -------------------------------------------------------------
    const ordered_json* model = dc::find(root, "model");
    if (model == nullptr) dc::fail("model block is required");
    dc::expect_object(*model, "model");
    dc::reject_unknown(*model, "model", {"family", "link", "predictor"});
    cfg.family = dc::require_string(*model, "family", "model");
    cfg.link = dc::require_string(*model, "link", "model");
    cfg.predictor = dc::optional_string(*model, "predictor", "model", "linear");
    const FamilyDescriptor& fam = builtin_family(cfg.family);  // validates
    (void)builtin_link(cfg.link, &fam);                        // validates
    (void)builtin_predictor(cfg.predictor);                    // validates
    const bool nonlinear = cfg.predictor != "linear";

    cfg.seed = dc::optional_u64(root, "seed", "configuration", 1);
    const long long threads =
        dc::optional_integer(root, "threads", "configuration", 0);
    if (threads < 0) dc::fail("threads must be nonnegative");
    cfg.threads = static_cast<int>(threads);

    // --- data / design sources ----------------------------------------------
    const bool needs_response =
        cfg.command == "fit" || cfg.command == "test";
    if (const ordered_json* data = dc::find(root, "data")) {
        dc::expect_object(*data, "data");
        dc::reject_unknown(*data, "data",
                           {"path", "response", "covariates", "intercept"});
        DataSpec spec;
        spec.path = dc::require_string(*data, "path", "data");
        if (spec.path.empty()) dc::fail("data.path must not be empty");
        if (dc::find(*data, "response") != nullptr) {
            spec.response = dc::require_string(*data, "response", "data");
            if (spec.response->empty()) {
                dc::fail("data.response must not be empty");
            }
        }
        if (needs_response && !spec.response) {
            dc::fail("data.response is required for " + cfg.command);
        }
        if (!needs_response && spec.response) {
            dc::fail(cfg.command +
                     " does not read a response; remove data.response");
        }
        const ordered_json* cov = dc::find(*data, "covariates");
        if (cov == nullptr || !cov->is_array()) {
            dc::fail("data.covariates must be an array of column names");
        }
        for (const ordered_json& e : *cov) {
            if (!e.is_string()) {
                dc::fail("data.covariates entries must be strings");
            }
            const std::string name = e.get<std::string>();
            for (const std::string& seen : spec.covariates) {
                if (seen == name) {
                    dc::fail("data.covariates lists '" + name + "' twice");
                }
            }
            spec.covariates.push_back(name);
        }
        spec.intercept =
            dc::optional_bool(*data, "intercept", "data", !nonlinear);
        if (nonlinear) {
            if (spec.intercept) {
                dc::fail("predictor '" + cfg.predictor +
                         "' manages its own intercept; set data.intercept "
                         "to false or omit it");
            }
            if (spec.covariates.size() != 1) {
                dc::fail("predictor '" + cfg.predictor +
                         "' needs exactly one covariate column");
            }
        } else if (spec.covariates.empty() && !spec.intercept) {
            dc::fail("data needs at least one covariate column or the "
                     "intercept");
        }
        cfg.data = std::move(spec);
    }
    if (const ordered_json* design = dc::find(root, "design")) {
        dc::expect_object(*design, "design");
        dc::reject_unknown(*design, "design", {"n", "p", "seed"});
        DesignSpec spec;
        const long long n = dc::require_integer(*design, "n", "design");
        const long long p = dc::require_integer(*design, "p", "design");
        if (n < 1) dc::fail("design.n must be at least 1");
        if (p < 1) dc::fail("design.p must be at least 1");
        spec.n = static_cast<Eigen::Index>(n);
        spec.p = static_cast<Eigen::Index>(p);
        spec.seed = dc::optional_u64(*design, "seed", "design", cfg.seed);
        if (nonlinear) {
            dc::fail("predictor '" + cfg.predictor +
                     "' needs a data block (a synthetic uniform design has "
                     "no meaningful curve abscissa)");
        }
        cfg.design = spec;
    }
    if (needs_response) {
        if (!cfg.data) dc::fail(cfg.command + " requires a data block");
        if (cfg.design) {
            dc::fail(cfg.command +
                     " reads covariates from the data block; remove the "
                     "design block");
        }
    } else {
        if (cfg.data.has_value() == cfg.design.has_value()) {
            dc::fail(cfg.command +
                     " needs exactly one covariate source: a data block or "
                     "a design block");
        }
    }

    // --- hypothesis ----------------------------------------------------------
    if (const ordered_json* hyp = dc::find(root, "hypothesis")) {
        if (cfg.command == "fit") {
            dc::fail("fit takes no hypothesis block");
        }
        dc::expect_object(*hyp, "hypothesis");
        dc::reject_unknown(*hyp, "hypothesis",
                           {"coefficients", "values", "phi0"});
        HypothesisSpec spec;
        const ordered_json* coeff = dc::find(*hyp, "coefficients");
        const ordered_json* phi0 = dc::find(*hyp, "phi0");
        if ((coeff != nullptr) == (phi0 != nullptr)) {
            dc::fail("hypothesis must contain either coefficients+values or "
                     "phi0, not both");
        }
        if (coeff != nullptr) {
            const dc::PositionOrder order =
                dc::order_positions(*coeff, "hypothesis.coefficients");
            spec.positions = order.positions;
            const auto m = static_cast<Eigen::Index>(spec.positions.size());
            const ordered_json* values = dc::find(*hyp, "values");
            if (values == nullptr || !values->is_array() || values->empty()) {
                dc::fail("hypothesis.values must be a non-empty array");
            }
            const bool grid = values->front().is_array();
            if (grid && cfg.command != "test") {
                dc::fail("a grid of hypothesis.values is only supported by "
                         "the test command");
            }
            std::size_t row = 0;
            for (const ordered_json& entry : *values) {
                const std::string path =
                    "hypothesis.values[" + std::to_string(row++) + "]";
                if (grid != entry.is_array()) {
                    dc::fail("hypothesis.values mixes numbers and arrays");
                }
                const Eigen::VectorXd v =
                    grid ? dc::number_vector(entry, path)
                         : Eigen::VectorXd();
                if (grid) {
                    if (v.size() != m) {
                        dc::fail(path + " has length " +
                                 std::to_string(v.size()) + ", expected " +
                                 std::to_string(m));
                    }
                    spec.value_grid.push_back(
                        dc::permuted(v, order.permutation));
                }
                if (!grid) break;
            }
            if (!grid) {
                const Eigen::VectorXd v =
                    dc::number_vector(*values, "hypothesis.values");
                if (v.size() != m) {
                    dc::fail("hypothesis.values has length " +
                             std::to_string(v.size()) + ", expected " +
                             std::to_string(m));
                }
                spec.value_grid.push_back(dc::permuted(v, order.permutation));
            }
        } else {
            if (dc::find(*hyp, "values") != nullptr) {
                dc::fail("hypothesis.values needs hypothesis.coefficients");
            }
            const double p0 = dc::require_number(*hyp, "phi0", "hypothesis");
            if (!(p0 > 0.0)) dc::fail("hypothesis.phi0 must be positive");
            spec.phi0 = p0;
        }
        cfg.hypothesis = std::move(spec);
    }
    if (cfg.command != "fit" && !cfg.hypothesis) {
        dc::fail(cfg.command + " requires a hypothesis block");
    }

    // --- power ----------------------------------------------------------------
    if (const ordered_json* power = dc::find(root, "power")) {
        if (cfg.command != "power") {
            dc::fail("the power block belongs to the power command only");
        }
        dc::expect_object(*power, "power");
        dc::reject_unknown(*power, "power",
                           {"beta", "phi", "epsilon", "levels"});
        PowerSpec spec;
        spec.levels = dc::level_list(*power, "power");
        const HypothesisSpec& hyp = *cfg.hypothesis;
        if (hyp.subset()) {
            const ordered_json* beta = dc::find(*power, "beta");
            if (beta == nullptr) dc::fail("power.beta is required");
            spec.beta = dc::number_vector(*beta, "power.beta");
            const double phi = dc::require_number(*power, "phi", "power");
            if (!(phi > 0.0)) dc::fail("power.phi must be positive");
            spec.phi = phi;
            const ordered_json* eps = dc::find(*power, "epsilon");
            if (eps == nullptr) dc::fail("power.epsilon is required");
            // The user supplies epsilon aligned with their coefficient
            // order; realign to the canonical ascending order.
            const dc::PositionOrder order = dc::order_positions(
                *dc::find(*dc::find(root, "hypothesis"), "coefficients"),
                "hypothesis.coefficients");
            const Eigen::VectorXd raw =
                dc::number_vector(*eps, "power.epsilon");
            if (raw.size() !=
                static_cast<Eigen::Index>(hyp.positions.size())) {
                dc::fail("power.epsilon must have one entry per tested "
                         "coefficient");
            }
            spec.epsilon = dc::permuted(raw, order.permutation);
            const Eigen::VectorXd& values = hyp.value_grid.front();
            for (std::size_t k = 0; k < hyp.positions.size(); ++k) {
                const Eigen::Index pos = hyp.positions[k];
                if (pos >= spec.beta->size()) {
                    dc::fail("hypothesis coefficient position " +
                             std::to_string(pos + 1) +
                             " exceeds the length of power.beta");
                }
                if ((*spec.beta)[pos] != values[static_cast<Eigen::Index>(k)]) {
                    dc::fail("power.beta must satisfy the hypothesis: "
                             "coefficient " + std::to_string(pos + 1) +
                             " is " + dc::format_double((*spec.beta)[pos]) +
                             " but the hypothesis pins it at " +
                             dc::format_double(
                                 values[static_cast<Eigen::Index>(k)]) +
                             " (the displacement belongs in power.epsilon)");
                }
            }
        } else {
            if (dc::find(*power, "beta") || dc::find(*power, "phi")) {
                dc::fail("precision power takes only epsilon and levels "
                         "(the expansion depends on phi0, epsilon, n, p)");
            }
            spec.precision_epsilon =
                dc::require_number(*power, "epsilon", "power");
            if (!(*cfg.hypothesis->phi0 + spec.precision_epsilon > 0.0)) {
                dc::fail("power.epsilon drives the true precision phi0 + "
                         "epsilon below zero");
            }
        }
        cfg.power = std::move(spec);
    }
    if (cfg.command == "power" && !cfg.power) {
        dc::fail("the power command requires a power block");
    }

    // --- sim --------------------------------------------------------------------
    if (const ordered_json* sim = dc::find(root, "sim")) {
        if (cfg.command != "simulate") {
            dc::fail("the sim block belongs to the simulate command only");
        }
        dc::expect_object(*sim, "sim");
        dc::reject_unknown(
            *sim, "sim",
            {"beta", "phi", "replications", "levels", "overlay"});
        SimSpec spec;
        const ordered_json* beta = dc::find(*sim, "beta");
        if (beta == nullptr) dc::fail("sim.beta is required");
        spec.beta = dc::number_vector(*beta, "sim.beta");
        spec.phi = dc::require_number(*sim, "phi", "sim");
        if (!(spec.phi > 0.0)) dc::fail("sim.phi must be positive");
        const long long reps =
            dc::optional_integer(*sim, "replications", "sim", 10000);
        if (reps < 1) dc::fail("sim.replications must be at least 1");
        spec.replications = static_cast<int>(reps);
        spec.levels = dc::level_list(*sim, "sim");
        if (dc::find(*sim, "overlay") != nullptr) {
            spec.overlay = dc::optional_bool(*sim, "overlay", "sim", false);
        }
        if (cfg.hypothesis->subset()) {
            for (std::size_t k = 0; k < cfg.hypothesis->positions.size();
                 ++k) {
                if (cfg.hypothesis->positions[k] >= spec.beta.size()) {
                    dc::fail("hypothesis coefficient position " +
                             std::to_string(cfg.hypothesis->positions[k] + 1) +
                             " exceeds the length of sim.beta");
                }
            }
        }
        cfg.sim = std::move(spec);
    }
    if (cfg.command == "simulate" && !cfg.sim) {
        dc::fail("the simulate command requires a sim block");
    }

    // --- fit options -------------------------------------------------------------
    cfg.fit_options.max_iterations = cfg.command == "simulate" ? 2000 : 200;
    if (const ordered_json* fit = dc::find(root, "fit")) {
        dc::expect_object(*fit, "fit");
        dc::reject_unknown(*fit, "fit",
                           {"start", "tol", "max_iterations", "max_halvings"});
        if (const ordered_json* start = dc::find(*fit, "start")) {
            cfg.fit_options.start = dc::number_vector(*start, "fit.start");
        }
        if (const auto tol = dc::optional_number(*fit, "tol", "fit")) {
            if (!(*tol > 0.0)) dc::fail("fit.tol must be positive");
            cfg.fit_options.tol = *tol;
        }
        const long long iters = dc::optional_integer(
            *fit, "max_iterations", "fit", cfg.fit_options.max_iterations);
        if (iters < 1) dc::fail("fit.max_iterations must be at least 1");
        cfg.fit_options.max_iterations = static_cast<int>(iters);
        const long long halvings = dc::optional_integer(
            *fit, "max_halvings", "fit", cfg.fit_options.max_halvings);
        if (halvings < 0) dc::fail("fit.max_halvings must be nonnegative");
        cfg.fit_options.max_halvings = static_cast<int>(halvings);
    }

    // --- output ---------------------------------------------------------------------
    if (const ordered_json* output = dc::find(root, "output")) {
        dc::expect_object(*output, "output");
        dc::reject_unknown(*output, "output", {"path", "format"});
        cfg.output_path = dc::optional_string(*output, "path", "output", "");
        cfg.format = dc::optional_string(*output, "format", "output", "json");
        if (cfg.format != "json" && cfg.format != "csv") {
            dc::fail("output.format must be json or csv");
        }
    }

    // --- normalized echo --------------------------------------------------------------
    ordered_json& r = cfg.resolved;
    r = ordered_json::object();
    r["command"] = cfg.command;
    r["model"] = {{"family", cfg.family},
                  {"link", cfg.link},
                  {"predictor", cfg.predictor}};
    if (cfg.data) {
        ordered_json d = ordered_json::object();
        d["path"] = cfg.data->path;
        if (cfg.data->response) d["response"] = *cfg.data->response;
        d["covariates"] = cfg.data->covariates;
        d["intercept"] = cfg.data->intercept;
        r["data"] = std::move(d);
    }
    if (cfg.design) {
        r["design"] = {{"n", static_cast<long long>(cfg.design->n)},
                       {"p", static_cast<long long>(cfg.design->p)},
                       {"seed", cfg.design->seed}};
    }
    if (cfg.hypothesis) {
        ordered_json h = ordered_json::object();
        if (cfg.hypothesis->subset()) {
            ordered_json pos = ordered_json::array();
            for (Eigen::Index i : cfg.hypothesis->positions) {
                pos.push_back(static_cast<long long>(i) + 1);
            }
            h["coefficients"] = std::move(pos);
            if (cfg.hypothesis->value_grid.size() == 1) {
                h["values"] =
                    dc::vector_json(cfg.hypothesis->value_grid.front());
            } else {
                ordered_json grid = ordered_json::array();
                for (const Eigen::VectorXd& v : cfg.hypothesis->value_grid) {
                    grid.push_back(dc::vector_json(v));
                }
                h["values"] = std::move(grid);
            }
        } else {
            h["phi0"] = *cfg.hypothesis->phi0;
        }
        r["hypothesis"] = std::move(h);
    }
    if (cfg.power) {
        ordered_json p = ordered_json::object();
        if (cfg.hypothesis->subset()) {
            p["beta"] = dc::vector_json(*cfg.power->beta);
            p["phi"] = *cfg.power->phi;
            p["epsilon"] = dc::vector_json(cfg.power->epsilon);
        } else {
            p["epsilon"] = cfg.power->precision_epsilon;
        }
        p["levels"] = dc::double_list_json(cfg.power->levels);
        r["power"] = std::move(p);
    }
    if (cfg.sim) {
        ordered_json s = ordered_json::object();
        s["beta"] = dc::vector_json(cfg.sim->beta);
        s["phi"] = cfg.sim->phi;
        s["replications"] = cfg.sim->replications;
        s["levels"] = dc::double_list_json(cfg.sim->levels);
        if (cfg.sim->overlay) s["overlay"] = *cfg.sim->overlay;
        r["sim"] = std::move(s);
    }
    {
        ordered_json f = ordered_json::object();
        if (cfg.fit_options.start) {
            f["start"] = dc::vector_json(*cfg.fit_options.start);
        }
        f["tol"] = cfg.fit_options.tol;
        f["max_iterations"] = cfg.fit_options.max_iterations;
        f["max_halvings"] = cfg.fit_options.max_halvings;
        r["fit"] = std::move(f);
    }
    r["output"] = {{"path", cfg.output_path}, {"format", cfg.format}};
    r["seed"] = cfg.seed;
    r["threads"] = cfg.threads;
    return cfg;
}

namespace detail::cli {

/// Model, covariates, and (when the command reads data) the response.
struct RunContext {
    const FamilyDescriptor* fam = nullptr;
    LinkDescriptor link;
    Predictor pred = Predictor::linear();
    Eigen::MatrixXd X;
    Eigen::VectorXd y;
    Eigen::Index n = 0;
    Eigen::Index p = 0;
    bool has_response = false;
    bool used_generator = false;
    int wrapped = 0;
};

inline RunContext build_context(const RunConfig& cfg) {
    RunContext ctx;
    ctx.fam = &builtin_family(cfg.family);
    ctx.link = builtin_link(cfg.link, ctx.fam);
    ctx.pred = builtin_predictor(cfg.predictor);
    if (cfg.data) {
        const CsvTable table = read_csv(cfg.data->path);
        const Eigen::Index cols =
            static_cast<Eigen::Index>(cfg.data->covariates.size());
        Eigen::MatrixXd covs(table.rows(), cols);
        for (Eigen::Index c = 0; c < cols; ++c) {
            covs.col(c) = table.values.col(table.column_index(
                cfg.data->covariates[static_cast<std::size_t>(c)]));
        }
        if (cfg.data->intercept) {
            ctx.X.resize(table.rows(), cols + 1);
            ctx.X.col(0).setOnes();
            ctx.X.rightCols(cols) = covs;
        } else {
            ctx.X = std::move(covs);
        }
        if (cfg.data->response) {
            ctx.y = table.values.col(table.column_index(*cfg.data->response));
            ctx.has_response = true;
            if (ctx.fam->is_circular()) {
                for (Eigen::Index l = 0; l < ctx.y.size(); ++l) {
                    const double w = wrap_angle(ctx.y[l]);
                    if (w != ctx.y[l]) {
                        ++ctx.wrapped;
                        ctx.y[l] = w;
                    }
                }
            }
        }
    } else {
        ctx.X = random_design(cfg.design->n, cfg.design->p, cfg.design->seed);
        ctx.used_generator = true;
    }
    ctx.n = ctx.X.rows();
    ctx.p = ctx.pred.param_count(ctx.X.cols());
    return ctx;
}

inline void check_positions(const HypothesisSpec& hyp, Eigen::Index p) {
    for (Eigen::Index pos : hyp.positions) {
        if (pos >= p) {
            throw config_error(
                "config: hypothesis coefficient position " +
                std::to_string(pos + 1) + " exceeds the model's " +
                std::to_string(p) + " coefficients");
        }
    }
}

/// Estimate/standard-error summary of one converged fit. The coefficient
/// block inverts K_beta = phi * Jac' W Jac; the precision entry inverts the
/// (independent) precision information -alpha2 when the family provides it.
inline ordered_json fit_summary(const RunContext& ctx, const FitResult& fit,
                                std::vector<std::string>& notes) {
    const Eigen::Index p = fit.beta.size();
    const Eigen::MatrixXd info =
        fit.phi *
        (fit.jac.transpose() * fit.w.asDiagonal() * fit.jac).eval();
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    if (ldlt.info() != Eigen::Success) {
        throw linalg_error(
            "fit report: coefficient information matrix is not positive "
            "definite");
    }
    const Eigen::MatrixXd cov =
        ldlt.solve(Eigen::MatrixXd::Identity(p, p));

    ordered_json out;
    out["n"] = static_cast<long long>(ctx.n);
    out["p"] = static_cast<long long>(p);
    out["converged"] = fit.converged;
    out["iterations"] = fit.iterations;
    out["precision_iterations"] = fit.phi_iterations;
    out["log_likelihood"] = fit.loglik;
    ordered_json coeffs = ordered_json::array();
    for (Eigen::Index j = 0; j < p; ++j) {
        const double var = cov(j, j);
        if (!(var > 0.0)) {
            throw linalg_error(
                "fit report: nonpositive variance for coefficient " +
                std::to_string(j + 1));
        }
        coeffs.push_back({{"name", "beta" + std::to_string(j + 1)},
                          {"estimate", fit.beta[j]},
                          {"std_error", std::sqrt(var)}});
    }
    out["coefficients"] = std::move(coeffs);
    ordered_json precision = ordered_json::object();
    precision["estimate"] = fit.phi;
    if (fit.alpha2 && *fit.alpha2 < 0.0) {
        precision["std_error"] = std::sqrt(-1.0 / *fit.alpha2);
    } else {
        precision["std_error"] = nullptr;
        notes.push_back("precision standard error unavailable: family '" +
                        ctx.fam->name +
                        "' has no separable precision curvature");
    }
    out["precision"] = std::move(precision);
    return out;
}

inline ordered_json quartet_json(const std::array<double, 4>& statistics,
                                 const std::array<double, 4>& p_values) {
    ordered_json s = ordered_json::array();
    ordered_json p = ordered_json::array();
    for (int i = 0; i < 4; ++i) {
        s.push_back(statistics[static_cast<std::size_t>(i)]);
        p.push_back(p_values[static_cast<std::size_t>(i)]);
    }
    return {{"statistics", std::move(s)}, {"p_values", std::move(p)}};
}

inline ordered_json statistic_names_json() {
    ordered_json names = ordered_json::array();
    for (const char* name : test_names) names.push_back(name);
    return names;
}

inline void note_precision_conventions(std::vector<std::string>& notes) {
    notes.push_back(
        "precision likelihood-ratio convention: S1 = 2{l(phi_hat) - "
        "l(phi0)}, twice the log-likelihood drop");
    notes.push_back(
        "precision score convention: S3 is the full quadratic form (the "
        "scaled score enters squared)");
}

inline ordered_json run_fit(const RunConfig& cfg, const RunContext& ctx,
                            std::vector<std::string>& notes) {
    const FitResult fit = fit_model(*ctx.fam, ctx.link, ctx.pred, ctx.X,
                                    ctx.y, cfg.fit_options);
    return fit_summary(ctx, fit, notes);
}

inline ordered_json run_test(const RunConfig& cfg, const RunContext& ctx,
                             std::vector<std::string>& notes) {
    const HypothesisSpec& hyp = *cfg.hypothesis;
    ordered_json result;
    result["statistic_names"] = statistic_names_json();
    if (hyp.subset()) {
        check_positions(hyp, ctx.p);
        const FitResult full = fit_model(*ctx.fam, ctx.link, ctx.pred, ctx.X,
                                         ctx.y, cfg.fit_options);
        result["fit"] = fit_summary(ctx, full, notes);
        ordered_json coeff = ordered_json::array();
        for (Eigen::Index pos : hyp.positions) {
            coeff.push_back(static_cast<long long>(pos) + 1);
        }
        result["hypothesis"] = {{"type", "subset"},
                                {"coefficients", std::move(coeff)}};
        result["df"] = static_cast<long long>(hyp.positions.size());
        const std::vector<GridTestResult> grid =
            subset_test_grid(*ctx.fam, ctx.link, ctx.pred, ctx.X, ctx.y,
                             hyp.positions, hyp.value_grid, cfg.fit_options);
        ordered_json tests = ordered_json::array();
        for (const GridTestResult& g : grid) {
            ordered_json entry = ordered_json::object();
            entry["values"] = vector_json(g.null_values);
            entry.update(quartet_json(g.tests.statistic, g.tests.p_value));
            tests.push_back(std::move(entry));
        }
        result["tests"] = std::move(tests);
    } else {
        const FitResult full = fit_model(*ctx.fam, ctx.link, ctx.pred, ctx.X,
                                         ctx.y, cfg.fit_options);
        const PrecisionTestResult res =
            precision_tests(*ctx.fam, ctx.y, full, *hyp.phi0);
        result["fit"] = fit_summary(ctx, full, notes);
        result["hypothesis"] = {{"type", "precision"}, {"phi0", *hyp.phi0}};
        result["df"] = 1;
        ordered_json entry = ordered_json::object();
        entry["phi_hat"] = res.phi_hat;
        entry.update(quartet_json(res.statistic, res.p_value));
        result["tests"] = ordered_json::array({std::move(entry)});
        note_precision_conventions(notes);
    }
    return result;
}

inline ordered_json coefficient_table_json(const CoefficientTable& tab) {
    ordered_json rows = ordered_json::array();
    for (const std::array<double, 4>& row : tab.b) {
        ordered_json r = ordered_json::array();
        for (double v : row) r.push_back(v);
        rows.push_back(std::move(r));
    }
    return rows;
}

inline ordered_json comparisons_json(const PowerComparison& cmp) {
    ordered_json out = ordered_json::array();
    for (const PowerPair& pair : cmp.pairs) {
        out.push_back(
            {{"first", test_names[static_cast<std::size_t>(pair.first - 1)]},
             {"second",
              test_names[static_cast<std::size_t>(pair.second - 1)]},
             {"kappa4", pair.kappa4},
             {"kappa6", pair.kappa6},
             {"verdict", dominance_name(pair.verdict)}});
    }
    return out;
}

inline ordered_json power_levels_json(const CoefficientTable& tab,
                                      const std::vector<double>& levels,
                                      bool percent) {
    ordered_json out = ordered_json::array();
    for (double gamma : levels) {
        const PowerResult pr = local_power(tab, gamma);
        ordered_json values = ordered_json::array();
        ordered_json clamped = ordered_json::array();
        for (int i = 0; i < 4; ++i) {
            const double v = pr.power[static_cast<std::size_t>(i)];
            values.push_back(percent ? 100.0 * v : v);
            clamped.push_back(pr.clamped[static_cast<std::size_t>(i)]);
        }
        ordered_json entry = ordered_json::object();
        entry["level"] = gamma;
        entry["critical_value"] = pr.critical_value;
        entry[percent ? "power_percent" : "power"] = std::move(values);
        entry["clamped"] = std::move(clamped);
        out.push_back(std::move(entry));
    }
    return out;
}

inline ordered_json run_power(const RunConfig& cfg, const RunContext& ctx,
                              std::vector<std::string>& notes) {
    const HypothesisSpec& hyp = *cfg.hypothesis;
    const PowerSpec& pw = *cfg.power;
    CoefficientTable tab;
    PowerComparison cmp;
    ordered_json hypothesis;
    if (hyp.subset()) {
        check_positions(hyp, ctx.p);
        if (pw.beta->size() != ctx.p) {
            throw config_error("config: power.beta has length " +
                               std::to_string(pw.beta->size()) +
                               ", expected " + std::to_string(ctx.p));
        }
        LocalAlternative alt;
        alt.indices = hyp.positions;
        alt.beta_null = *pw.beta;
        alt.epsilon = pw.epsilon;
        const SubsetExpansionInputs inputs = subset_expansion_inputs(
            *ctx.fam, ctx.link, ctx.pred, ctx.X, alt, *pw.phi);
        tab = subset_coefficient_table(inputs);
        cmp = subset_power_differences(inputs);
        ordered_json coeff = ordered_json::array();
        for (Eigen::Index pos : hyp.positions) {
            coeff.push_back(static_cast<long long>(pos) + 1);
        }
        hypothesis = {{"type", "subset"}, {"coefficients", std::move(coeff)}};
        notes.push_back(
            "noncentrality convention: lambda is the quadratic form of the "
            "displacement in the inverse asymptotic covariance of the tested "
            "coefficients (one factor of the precision parameter)");
    } else {
        PrecisionAlternative alt;
        alt.phi0 = *hyp.phi0;
        alt.epsilon = pw.precision_epsilon;
        alt.n = ctx.n;
        alt.p = ctx.p;
        tab = precision_coefficients(*ctx.fam, alt);
        cmp = precision_power_differences(*ctx.fam, alt);
        hypothesis = {{"type", "precision"}, {"phi0", *hyp.phi0}};
        note_precision_conventions(notes);
    }
    ordered_json result;
    result["statistic_names"] = statistic_names_json();
    result["hypothesis"] = std::move(hypothesis);
    result["df"] = tab.df;
    result["lambda"] = tab.lambda;
    result["coefficient_table"] = coefficient_table_json(tab);
    result["power"] = power_levels_json(tab, pw.levels, false);
    result["comparisons"] = comparisons_json(cmp);
    return result;
}

inline ordered_json run_simulate(const RunConfig& cfg, RunContext& ctx,
                                 std::vector<std::string>& notes) {
    const HypothesisSpec& hyp = *cfg.hypothesis;
    const SimSpec& sim = *cfg.sim;
    ctx.used_generator = true;
    if (sim.beta.size() != ctx.p) {
        throw config_error("config: sim.beta has length " +
                           std::to_string(sim.beta.size()) + ", expected " +
                           std::to_string(ctx.p));
    }
    if (!hyp.subset() && !ctx.fam->pdm_a2) {
        throw unsupported_error(
            "simulate: family '" + ctx.fam->name +
            "' does not expose the curvature of its precision adjustment");
    }
    if (hyp.subset()) check_positions(hyp, ctx.p);

    SimConfig sc;
    sc.family = cfg.family;
    sc.link = cfg.link;
    sc.predictor = cfg.predictor;
    sc.X = ctx.X;
    sc.beta = sim.beta;
    sc.phi = sim.phi;
    if (hyp.subset()) {
        sc.test_indices = hyp.positions;
        sc.null_values = hyp.value_grid.front();
    } else {
        sc.precision_null = *hyp.phi0;
    }
    sc.levels = sim.levels;
    sc.replications = sim.replications;
    sc.seed = cfg.seed;
    sc.threads = cfg.threads;
    sc.fit_options = cfg.fit_options;
    const SimReport rep = run_simulation(sc);

    ordered_json result;
    result["statistic_names"] = statistic_names_json();
    if (hyp.subset()) {
        ordered_json coeff = ordered_json::array();
        for (Eigen::Index pos : hyp.positions) {
            coeff.push_back(static_cast<long long>(pos) + 1);
        }
        result["hypothesis"] = {
            {"type", "subset"},
            {"coefficients", std::move(coeff)},
            {"values", vector_json(hyp.value_grid.front())}};
    } else {
        result["hypothesis"] = {{"type", "precision"}, {"phi0", *hyp.phi0}};
        note_precision_conventions(notes);
    }
    result["df"] = rep.df;
    result["replications"] = sim.replications;
    result["used"] = rep.replications;
    result["failures"] = rep.failures;
    ordered_json reasons = ordered_json::object();
    for (const auto& [category, count] : rep.failure_reasons) {
        reasons[category] = count;
    }
    result["failure_reasons"] = std::move(reasons);
    result["reliable"] = rep.reliable;
    result["levels"] = double_list_json(rep.levels);
    result["critical_values"] = double_list_json(rep.critical_values);
    const double used = static_cast<double>(rep.replications);
    ordered_json rates = ordered_json::array();
    ordered_json ses = ordered_json::array();
    for (int s = 0; s < 4; ++s) {
        ordered_json rate_row = ordered_json::array();
        ordered_json se_row = ordered_json::array();
        for (double r : rep.rejection[static_cast<std::size_t>(s)]) {
            rate_row.push_back(100.0 * r);
            se_row.push_back(used > 0.0
                                 ? 100.0 * std::sqrt(r * (1.0 - r) / used)
                                 : 0.0);
        }
        rates.push_back(std::move(rate_row));
        ses.push_back(std::move(se_row));
    }
    result["rejection_percent"] = std::move(rates);
    result["mc_standard_error_percent"] = std::move(ses);
    ordered_json means = ordered_json::array();
    ordered_json variances = ordered_json::array();
    for (int s = 0; s < 4; ++s) {
        means.push_back(rep.mean[static_cast<std::size_t>(s)]);
        variances.push_back(rep.variance[static_cast<std::size_t>(s)]);
    }
    result["moments"] = {{"mean", std::move(means)},
                         {"variance", std::move(variances)},
                         {"reference_mean", static_cast<double>(rep.df)},
                         {"reference_variance", 2.0 * rep.df}};

    // Analytic local-power overlay: attached whenever the generating process
    // violates the hypothesis (or on request), skipped with a note if the
    // expansion cannot be evaluated there.
    bool want_overlay = false;
    if (hyp.subset()) {
        for (std::size_t k = 0; k < hyp.positions.size(); ++k) {
            if (sim.beta[hyp.positions[k]] !=
                hyp.value_grid.front()[static_cast<Eigen::Index>(k)]) {
                want_overlay = true;
            }
        }
    } else {
        want_overlay = sim.phi != *hyp.phi0;
    }
    if (sim.overlay) want_overlay = *sim.overlay;
    if (want_overlay) {
        try {
            CoefficientTable tab;
            if (hyp.subset()) {
                LocalAlternative alt;
                alt.indices = hyp.positions;
                alt.beta_null = sim.beta;
                const auto m =
                    static_cast<Eigen::Index>(hyp.positions.size());
                alt.epsilon.resize(m);
                for (Eigen::Index k = 0; k < m; ++k) {
                    const Eigen::Index pos =
                        hyp.positions[static_cast<std::size_t>(k)];
                    alt.epsilon[k] =
                        sim.beta[pos] - hyp.value_grid.front()[k];
                    alt.beta_null[pos] = hyp.value_grid.front()[k];
                }
                tab = subset_coefficients(*ctx.fam, ctx.link, ctx.pred,
                                          ctx.X, alt, sim.phi);
            } else {
                PrecisionAlternative alt;
                alt.phi0 = *hyp.phi0;
                alt.epsilon = sim.phi - *hyp.phi0;
                alt.n = ctx.n;
                alt.p = ctx.p;
                tab = precision_coefficients(*ctx.fam, alt);
            }
            result["expansion"] = {
                {"lambda", tab.lambda},
                {"power", power_levels_json(tab, sim.levels, true)}};
        } catch (const error& e) {
            notes.push_back(std::string("expansion overlay unavailable: ") +
                            e.what());
        }
    }
    return result;
}

}  // namespace detail::cli

/// Executes a validated configuration and assembles the full report.
inline ordered_json run_config(const RunConfig& cfg) {
    namespace dc = detail::cli;
    std::vector<std::string> notes;
    dc::RunContext ctx = dc::build_context(cfg);
    if (ctx.wrapped > 0) {
        notes.push_back(std::to_string(ctx.wrapped) +
                        " response angle(s) outside (-pi, pi] were wrapped "
                        "into range");
    }

    ordered_json result;
    if (cfg.command == "fit") {
        result = dc::run_fit(cfg, ctx, notes);
    } else if (cfg.command == "test") {
        result = dc::run_test(cfg, ctx, notes);
    } else if (cfg.command == "power") {
        result = dc::run_power(cfg, ctx, notes);
    } else {
        result = dc::run_simulate(cfg, ctx, notes);
    }

    ordered_json report;
    report["tool"] = tool_name;
    report["version"] = tool_version;
    report["command"] = cfg.command;
    if (ctx.used_generator) report["generator"] = generator_name;
    report["config"] = cfg.resolved;
    report["result"] = std::move(result);
    report["notes"] = notes;
    return report;
}

/// Parses, validates, and executes a raw JSON configuration.
inline ordered_json run_json(const ordered_json& raw) {
    return run_config(parse_run_config(raw));
}

/// Machine-readable error report written when a run fails.
inline ordered_json error_report(const std::string& command,
                                 const ordered_json& config_echo,
                                 const error& e) {
    const error_class cls = classify(e);
    const char* type = "error";
    if (dynamic_cast<const config_error*>(&e)) {
        type = "config";
    } else if (dynamic_cast<const csv_error*>(&e)) {
        type = "csv";
    } else if (dynamic_cast<const unsupported_error*>(&e)) {
        type = "unsupported";
    } else if (dynamic_cast<const nonconvergence_error*>(&e)) {
        type = "nonconvergence";
    } else if (dynamic_cast<const no_root_error*>(&e)) {
        type = "no-root";
    } else if (dynamic_cast<const rank_error*>(&e)) {
        type = "rank";
    } else if (dynamic_cast<const linalg_error*>(&e)) {
        type = "linear-algebra";
    } else if (dynamic_cast<const domain_error*>(&e)) {
        type = "domain";
    } else if (dynamic_cast<const contract_error*>(&e)) {
        type = "contract";
    }
    ordered_json report;
    report["tool"] = tool_name;
    report["version"] = tool_version;
    report["command"] = command;
    if (!config_echo.is_null()) report["config"] = config_echo;
    ordered_json err;
    err["type"] = type;
    err["category"] = cls == error_class::usage ? "usage" : "numeric";
    err["exit_code"] = static_cast<int>(cls);
    err["message"] = e.what();
    if (const auto* ce = dynamic_cast<const csv_error*>(&e);
        ce != nullptr && ce->row() > 0) {
        err["row"] = ce->row();
        if (!ce->column().empty()) err["column"] = ce->column();
    }
    report["error"] = std::move(err);
    return report;
}

namespace detail::cli {

inline void csv_row(std::string& out,
                    const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i > 0) out += ',';
        out += fields[i];
    }
    out += '\n';
}

inline std::string number_field(const ordered_json& v) {
    if (v.is_null()) return "";
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number_integer() || v.is_number_unsigned()) {
        return std::to_string(v.get<long long>());
    }
    return format_double(v.get<double>());
}

}  // namespace detail::cli

/// Renders the tabular core of a report as CSV (the JSON form remains the
/// complete record; error reports are always JSON).
inline std::string report_to_csv(const ordered_json& report) {
    namespace dc = detail::cli;
    const std::string command = report.at("command").get<std::string>();
    const ordered_json& result = report.at("result");
    std::string out;
    if (command == "fit") {
        dc::csv_row(out, {"parameter", "estimate", "std_error"});
        for (const ordered_json& c : result.at("coefficients")) {
            dc::csv_row(out, {c.at("name").get<std::string>(),
                              dc::number_field(c.at("estimate")),
                              dc::number_field(c.at("std_error"))});
        }
        dc::csv_row(out,
                    {"phi",
                     dc::number_field(result.at("precision").at("estimate")),
                     dc::number_field(result.at("precision").at("std_error"))});
        return out;
    }
    const ordered_json& names = result.at("statistic_names");
    if (command == "test") {
        const bool subset =
            result.at("hypothesis").at("type").get<std::string>() == "subset";
        std::vector<std::string> header{"point"};
        if (subset) {
            for (const ordered_json& c :
                 result.at("hypothesis").at("coefficients")) {
                header.push_back("beta" + std::to_string(c.get<long long>()) +
                                 "_null");
            }
        } else {
            header.push_back("phi0");
        }
        header.insert(header.end(), {"statistic", "value", "p_value"});
        dc::csv_row(out, header);
        long long point = 1;
        for (const ordered_json& t : result.at("tests")) {
            for (std::size_t s = 0; s < 4; ++s) {
                std::vector<std::string> row{std::to_string(point)};
                if (subset) {
                    for (const ordered_json& v : t.at("values")) {
                        row.push_back(dc::number_field(v));
                    }
                } else {
                    row.push_back(dc::number_field(
                        result.at("hypothesis").at("phi0")));
                }
                row.push_back(names[s].get<std::string>());
                row.push_back(dc::number_field(t.at("statistics")[s]));
                row.push_back(dc::number_field(t.at("p_values")[s]));
                dc::csv_row(out, row);
            }
            ++point;
        }
        return out;
    }
    if (command == "power") {
        dc::csv_row(out, {"level", "critical_value", "statistic", "power",
                          "clamped", "lambda", "df"});
        const std::string lambda = dc::number_field(result.at("lambda"));
        const std::string df = dc::number_field(result.at("df"));
        for (const ordered_json& entry : result.at("power")) {
            for (std::size_t s = 0; s < 4; ++s) {
                dc::csv_row(out,
                            {dc::number_field(entry.at("level")),
                             dc::number_field(entry.at("critical_value")),
                             names[s].get<std::string>(),
                             dc::number_field(entry.at("power")[s]),
                             dc::number_field(entry.at("clamped")[s]), lambda,
                             df});
            }
        }
        return out;
    }
    // simulate
    dc::csv_row(out, {"statistic", "level", "critical_value",
                      "rejection_percent", "mc_standard_error_percent"});
    const ordered_json& levels = result.at("levels");
    const ordered_json& crit = result.at("critical_values");
    const ordered_json& rates = result.at("rejection_percent");
    const ordered_json& ses = result.at("mc_standard_error_percent");
    for (std::size_t s = 0; s < 4; ++s) {
        for (std::size_t g = 0; g < levels.size(); ++g) {
            dc::csv_row(out, {names[s].get<std::string>(),
                              dc::number_field(levels[g]),
                              dc::number_field(crit[g]),
                              dc::number_field(rates[s][g]),
                              dc::number_field(ses[s][g])});
        }
    }
    return out;
}

}  // namespace dml
