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

#ifndef DML_SIM_HPP
#define DML_SIM_HPP

// Monte Carlo engine for the test statistics.  Each replication owns one
// counter-based stream addressed by its replication index, so the report
// is bitwise identical for any thread count; covariates draw from a
// reserved stream.  Failed replications (non-convergent or out-of-domain
// fits) are counted and excluded, and the report flags itself unreliable
// when they exceed one percent.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "dml/rng.hpp"
#include "dml/sample.hpp"
#include "dml/stats.hpp"

namespace dml {

struct SimConfig {
    std::string family = "von-mises";
    std::string link = "tan-half";
    std::string predictor = "linear";
    Eigen::MatrixXd X;       // fixed covariates for every replication
    Eigen::VectorXd beta;    // data-generating coefficients
    double phi = 1.0;        // data-generating precision

    // Exactly one mode: a coefficient-subset hypothesis ...
    std::vector<Eigen::Index> test_indices;
    Eigen::VectorXd null_values;
    // ... or a precision hypothesis.
    std::optional<double> precision_null;

    std::vector<double> levels{0.10, 0.05, 0.01};
    int replications = 10000;
    std::uint64_t seed = 1;
    int threads = 0;  // 0: DM_TESTLAB_THREADS, else hardware concurrency
    // Per-replication fits warm-start at the data-generating coefficients
    // unless a start is supplied here, and get a generous iteration budget:
    // occasional draws produce nearly flat likelihood valleys that converge
    // slowly but surely.
    FitOptions fit_options = [] {
        FitOptions opts;
        opts.max_iterations = 2000;
        return opts;
    }();
};

struct SimReport {
    // One row per successful replication, in replication order, holding
    // the four statistics (likelihood ratio, Wald, score, gradient).
    std::vector<std::array<double, 4>> statistics;
    std::vector<double> levels;
    std::vector<double> critical_values;          // per level
    std::array<std::vector<double>, 4> rejection;  // [statistic][level]
    std::array<double, 4> mean{};
    std::array<double, 4> variance{};
    int df = 0;
    int replications = 0;  // successes actually aggregated
    int failures = 0;
    std::map<std::string, int> failure_reasons;  // category -> count
    bool reliable = true;
};

namespace detail::sim {

/// Stable category label for a failed replication, keyed off the error type.
inline const char* failure_category(const error& e) noexcept {
    if (dynamic_cast<const nonconvergence_error*>(&e)) return "nonconvergence";
    if (dynamic_cast<const no_root_error*>(&e)) return "no-precision-root";
    if (dynamic_cast<const domain_error*>(&e)) return "domain";
    if (dynamic_cast<const rank_error*>(&e) ||
        dynamic_cast<const linalg_error*>(&e)) {
        return "linear-algebra";
    }
    if (dynamic_cast<const unsupported_error*>(&e)) return "unsupported";
    return "other";
}

}  // namespace detail::sim

/// Thread count used by the engine: an explicit request wins, then the
/// DM_TESTLAB_THREADS environment variable, then hardware concurrency.
inline int resolve_thread_count(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("DM_TESTLAB_THREADS")) {
        int value = 0;
        const char* end = env + std::char_traits<char>::length(env);
        const auto [ptr, ec] = std::from_chars(env, end, value);
        if (ec == std::errc() && ptr == end && value > 0) return value;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

/// Covariate matrix with a leading column of ones and uniform (0,1)
/// entries elsewhere, drawn from the reserved covariate stream so the
/// design never collides with replication noise.
inline Eigen::MatrixXd random_design(Eigen::Index n, Eigen::Index p,
                                     std::uint64_t seed) {
    if (n < 1 || p < 1) {
        throw contract_error("random_design: need n >= 1 and p >= 1");
    }
    Philox gen(seed, kCovariateStream);
    Eigen::MatrixXd X(n, p);
    for (Eigen::Index l = 0; l < n; ++l) X(l, 0) = 1.0;
    for (Eigen::Index c = 1; c < p; ++c) {
        for (Eigen::Index l = 0; l < n; ++l) X(l, c) = gen.uniform();
    }
    return X;
}

inline SimReport run_simulation(const SimConfig& config) {
    const auto& fam = builtin_family(config.family);
    const LinkDescriptor link = builtin_link(config.link, &fam);
    const Predictor pred = builtin_predictor(config.predictor);

    if (config.X.rows() < 1) {
        throw contract_error("run_simulation: empty design");
    }
    if (config.beta.size() != pred.param_count(config.X.cols())) {
        throw contract_error(
            "run_simulation: beta length does not match the predictor");
    }
    if (!(config.phi > 0.0) || !std::isfinite(config.phi)) {
        throw contract_error("run_simulation: phi must be positive");
    }
    if (config.replications < 1) {
        throw contract_error("run_simulation: need at least one replication");
    }
    const bool precision_mode = config.precision_null.has_value();
    if (precision_mode == !config.test_indices.empty()) {
        throw contract_error(
            "run_simulation: choose exactly one of test_indices or "
            "precision_null");
    }
    for (double level : config.levels) {
        if (!(level > 0.0) || !(level < 1.0)) {
            throw contract_error("run_simulation: levels must lie in (0,1)");
        }
    }

    // Canonical parameters of the data-generating process, fixed across
    // replications.
    const DesignEval ev = pred.evaluate(config.X, config.beta, false);
    const Eigen::Index n = ev.eta.size();
    std::vector<double> theta(static_cast<std::size_t>(n));
    for (Eigen::Index l = 0; l < n; ++l) {
        theta[static_cast<std::size_t>(l)] = link.theta_of_eta(ev.eta[l]);
    }

    SubsetSpec spec;
    int df = 1;
    if (!precision_mode) {
        spec.indices = config.test_indices;
        spec.null_values = config.null_values;
        df = static_cast<int>(spec.indices.size());
        if (spec.null_values.size() !=
            static_cast<Eigen::Index>(spec.indices.size())) {
            throw contract_error(
                "run_simulation: null_values length does not match "
                "test_indices");
        }
    }

    const int reps = config.replications;
    // NaN marks a failed replication until reduction.
    std::vector<std::array<double, 4>> raw(
        static_cast<std::size_t>(reps),
        {std::nan(""), std::nan(""), std::nan(""), std::nan("")});

    // Each replication's data are generated at config.beta, so that point is
    // the natural start for the fit; the optimizer still runs to full
    // stationarity from there.
    FitOptions rep_options = config.fit_options;
    if (!rep_options.start.has_value()) {
        rep_options.start = config.beta;
    }

    // Workers write distinct slots, so the reason log needs no locking.
    std::vector<const char*> reason(static_cast<std::size_t>(reps), nullptr);

    auto worker = [&](int lo, int hi) {
        Eigen::VectorXd y(n);
        for (int r = lo; r < hi; ++r) {
            Philox gen(config.seed, static_cast<std::uint64_t>(r));
            try {
                for (Eigen::Index l = 0; l < n; ++l) {
                    y[l] = sample_response(
                        fam, gen, theta[static_cast<std::size_t>(l)],
                        config.phi);
                }
                if (precision_mode) {
                    const FitResult fit =
                        fit_model(fam, link, pred, config.X, y,
                                  rep_options);
                    if (!fit.converged) continue;
                    const PrecisionTestResult res = precision_tests(
                        fam, y, fit, *config.precision_null);
                    raw[static_cast<std::size_t>(r)] = res.statistic;
                } else {
                    const SubsetTestResult res =
                        subset_tests(fam, link, pred, config.X, y, spec,
                                     rep_options);
                    if (!res.full.converged || !res.restricted.converged) {
                        continue;
                    }
                    raw[static_cast<std::size_t>(r)] = res.tests.statistic;
                }
            } catch (const error& e) {
                reason[static_cast<std::size_t>(r)] =
                    detail::sim::failure_category(e);
            }
        }
    };

    const int threads =
        std::min(resolve_thread_count(config.threads), reps);
    if (threads <= 1) {
        worker(0, reps);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(threads));
        const int chunk = (reps + threads - 1) / threads;
        for (int t = 0; t < threads; ++t) {
            const int lo = t * chunk;
            const int hi = std::min(reps, lo + chunk);
            if (lo >= hi) break;
            pool.emplace_back(worker, lo, hi);
        }
        for (auto& th : pool) th.join();
    }

    // Sequential reduction in replication order keeps the report
    // independent of the thread partition.
    SimReport report;
    report.levels = config.levels;
    report.df = df;
    report.statistics.reserve(static_cast<std::size_t>(reps));
    for (std::size_t r = 0; r < raw.size(); ++r) {
        if (std::isnan(raw[r][0])) {
            ++report.failures;
            ++report.failure_reasons[reason[r] != nullptr ? reason[r]
                                                          : "nonconvergence"];
            continue;
        }
        report.statistics.push_back(raw[r]);
    }
    report.replications = static_cast<int>(report.statistics.size());
    report.reliable =
        report.failures * 100 <= reps && report.replications > 0;

    for (double level : config.levels) {
        report.critical_values.push_back(chisq_quantile(1.0 - level, df));
    }
    if (report.replications == 0) return report;

    const double count = static_cast<double>(report.replications);
    for (int s = 0; s < 4; ++s) {
        double sum = 0.0;
        for (const auto& row : report.statistics) {
            sum += row[static_cast<std::size_t>(s)];
        }
        const double mean = sum / count;
        double ss = 0.0;
        for (const auto& row : report.statistics) {
            const double d = row[static_cast<std::size_t>(s)] - mean;
            ss += d * d;
        }
        report.mean[static_cast<std::size_t>(s)] = mean;
        report.variance[static_cast<std::size_t>(s)] =
            count > 1.0 ? ss / (count - 1.0) : 0.0;
        for (double crit : report.critical_values) {
            int rejections = 0;
            for (const auto& row : report.statistics) {
                if (row[static_cast<std::size_t>(s)] > crit) ++rejections;
            }
            report.rejection[static_cast<std::size_t>(s)].push_back(
                static_cast<double>(rejections) / count);
        }
    }
    return report;
}

}  // namespace dml

#endif  // DML_SIM_HPP
