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

// dm-testlab: likelihood tests, local power, and Monte Carlo size/power for
// dispersion-model regression, driven by a JSON run configuration.
//
// Exit codes: 0 success, 2 configuration/usage error, 3 numerical failure.
// Command-line flags override the matching configuration keys before
// validation, so the resolved configuration embedded in the report reflects
// exactly what ran.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>

#include <CLI11.hpp>

#include "dml/cli.hpp"
#include "dml/error.hpp"

namespace {

/// Writes `text` to `path`, or to standard output when `path` is empty.
/// Returns false (with a diagnostic in `problem`) when the file cannot be
/// written.
bool write_text(const std::string& path, const std::string& text,
                std::string* problem) {
    if (path.empty()) {
        std::fputs(text.c_str(), stdout);
        return true;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        *problem = "cannot open output file '" + path + "'";
        return false;
    }
    out << text;
    out.flush();
    if (!out) {
        *problem = "cannot write output file '" + path + "'";
        return false;
    }
    return true;
}

/// Sets output.<key> in the raw configuration, creating the block if absent.
/// A malformed output block is left untouched so validation can name it.
void merge_output_flag(dml::ordered_json& raw, const char* key,
                       const std::string& value) {
    if (!raw.is_object()) return;
    if (raw.contains("output")) {
        if (!raw["output"].is_object()) return;
    } else {
        raw["output"] = dml::ordered_json::object();
    }
    raw["output"][key] = value;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "dm-testlab: likelihood tests, local power expansions, and Monte "
        "Carlo validation for dispersion-model regression"};
    std::string config_path;
    std::string output_flag;
    std::string format_flag;
    std::uint64_t seed_flag = 0;
    long long threads_flag = 0;
    app.add_option("--config", config_path,
                   "JSON run configuration file (required)")
        ->required();
    auto* output_opt = app.add_option(
        "--output", output_flag, "report destination (default: stdout)");
    auto* format_opt =
        app.add_option("--format", format_flag, "report format")
            ->check(CLI::IsMember({"json", "csv"}));
    auto* seed_opt =
        app.add_option("--seed", seed_flag, "random seed (unsigned 64-bit)");
    auto* threads_opt = app.add_option(
        "--threads", threads_flag,
        "worker threads for simulate (0: DM_TESTLAB_THREADS, then hardware)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    // Load the configuration and fold the flag overrides into it before
    // validation, so the embedded echo reproduces this run without flags.
    dml::ordered_json raw;
    std::string command;
    dml::ordered_json report;
    std::string rendered;
    int exit_code = 0;
    try {
        std::ifstream in(config_path, std::ios::binary);
        if (!in) {
            throw dml::config_error("config: cannot open '" + config_path +
                                    "'");
        }
        try {
            raw = dml::ordered_json::parse(in);
        } catch (const nlohmann::json::parse_error& e) {
            throw dml::config_error(std::string("config: not valid JSON: ") +
                                    e.what());
        }
        if (raw.is_object()) {
            if (seed_opt->count() > 0) raw["seed"] = seed_flag;
            if (threads_opt->count() > 0) raw["threads"] = threads_flag;
            if (output_opt->count() > 0) {
                merge_output_flag(raw, "path", output_flag);
            }
            if (format_opt->count() > 0) {
                merge_output_flag(raw, "format", format_flag);
            }
        }
        const dml::RunConfig cfg = dml::parse_run_config(raw);
        command = cfg.command;
        report = dml::run_config(cfg);
        rendered = cfg.format == "csv" ? dml::report_to_csv(report)
                                       : report.dump(2) + "\n";
        output_flag = cfg.output_path;
    } catch (const dml::error& e) {
        report = dml::error_report(command, raw, e);
        rendered = report.dump(2) + "\n";  // error reports are always JSON
        exit_code = static_cast<int>(dml::classify(e));
        std::fprintf(stderr, "dm-testlab: %s\n", e.what());
        // Honor a cleanly specified destination; otherwise use stdout.
        if (output_opt->count() == 0) {
            output_flag.clear();
            if (raw.is_object() && raw.contains("output") &&
                raw["output"].is_object() && raw["output"].contains("path") &&
                raw["output"]["path"].is_string()) {
                output_flag = raw["output"]["path"].get<std::string>();
            }
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "dm-testlab: internal error: %s\n", e.what());
        return 3;
    }

    std::string problem;
    if (!write_text(output_flag, rendered, &problem)) {
        std::fprintf(stderr, "dm-testlab: %s\n", problem.c_str());
        return 2;
    }
    return exit_code;
}
