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

// Error taxonomy for the dispersion-model test lab.
//
// Two broad classes matter to callers:
//   * usage errors (bad config, bad CSV, unknown names)  -> exit code 2
//   * numerical failures (non-convergence, no root, rank) -> exit code 3
// Every error type carries a human-readable message; csv_error additionally
// pins down the offending cell by row and column name.

#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dml {

/// Base class for every exception thrown by this library.
class error : public std::runtime_error {
public:
    explicit error(const std::string& msg) : std::runtime_error(msg) {}
};

/// An argument left the mathematical domain of a function or family
/// (e.g. negative response for a positive family, theta outside its range).
class domain_error : public error {
public:
    using error::error;
};

/// A design matrix or Jacobian failed its full-column-rank requirement.
class rank_error : public error {
public:
    using error::error;
};

/// Mismatched inputs passed to an operation that requires objects produced
/// from the same data and model (e.g. a full and a restricted fit).
class contract_error : public error {
public:
    using error::error;
};

/// A linear solve failed (singular or badly conditioned system).
class linalg_error : public error {
public:
    using error::error;
};

/// A scalar root-finding problem has no root in the admissible range.
class no_root_error : public error {
public:
    using error::error;
};

/// An iterative fit exhausted its iteration or step-halving budget.
/// Carries a compact trace (iteration, objective, max step) for diagnostics.
class nonconvergence_error : public error {
public:
    struct trace_entry {
        int iteration;
        double objective;
        double max_step;
    };

    nonconvergence_error(const std::string& msg, std::vector<trace_entry> trace)
        : error(msg), trace_(std::move(trace)) {}

    const std::vector<trace_entry>& trace() const noexcept { return trace_; }

private:
    std::vector<trace_entry> trace_;
};

/// Requested capability that a family does not provide
/// (precision inference without a2, sampling without a sampler, ...).
class unsupported_error : public error {
public:
    using error::error;
};

/// Malformed or inconsistent run configuration.
class config_error : public error {
public:
    using error::error;
};

/// Malformed CSV input; remembers the offending coordinates.
/// Rows are numbered from 1 over data rows (the header is not counted).
class csv_error : public error {
public:
    csv_error(const std::string& msg, long row, std::string column)
        : error(msg), row_(row), column_(std::move(column)) {}

    explicit csv_error(const std::string& msg) : error(msg), row_(-1) {}

    long row() const noexcept { return row_; }
    const std::string& column() const noexcept { return column_; }

private:
    long row_;
    std::string column_;
};

/// Exit-code classification used by the command-line tool.
enum class error_class { usage = 2, numeric = 3 };

inline error_class classify(const error& e) noexcept {
    if (dynamic_cast<const config_error*>(&e) != nullptr ||
        dynamic_cast<const csv_error*>(&e) != nullptr ||
        dynamic_cast<const unsupported_error*>(&e) != nullptr) {
        return error_class::usage;
    }
    return error_class::numeric;
}

} // namespace dml
