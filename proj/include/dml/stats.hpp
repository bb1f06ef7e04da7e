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

#pragma once

// Likelihood-based test statistics for dispersion-model regression.
//
// Two hypothesis shapes are covered:
//   * subset_tests / subset_test_grid: a subset of the regression
//     coefficients is pinned to hypothesized values while the rest (and the
//     precision) stay free;
//   * precision_tests: the precision parameter is pinned while the
//     coefficients stay free (their estimate does not depend on the
//     precision, so no refit is needed).
//
// Each returns the classical quartet — likelihood ratio, Wald, score, and
// gradient statistics — with a common limiting chi-square law whose degrees
// of freedom equal the number of pinned parameters.

#include <algorithm>
#include <array>
#include <string>
#include <utility>
#include <vector>

#include <dml/fit.hpp>

namespace dml {

/// Display names for the four statistics, in result order.
inline constexpr std::array<const char*, 4> test_names{
    "likelihood_ratio", "wald", "score", "gradient"};

/// A hypothesis that pins a subset of regression coefficients.
struct SubsetSpec {
    /// Zero-based coefficient positions under test (any order, no repeats).
    std::vector<Eigen::Index> indices;
    /// Hypothesized values, aligned entry-by-entry with `indices`.
    Eigen::VectorXd null_values;
};

/// The four statistics with their shared degrees of freedom and p-values.
struct TestQuartet {
    std::array<double, 4> statistic{};
    std::array<double, 4> p_value{};
    int df = 0;
};

struct SubsetTestResult {
    TestQuartet tests;
    FitResult full;        ///< unrestricted fit, original coefficient order
    FitResult restricted;  ///< null-constrained fit, original coefficient order
};

struct GridTestResult {
    Eigen::VectorXd null_values;  ///< aligned with the sorted tested indices
    TestQuartet tests;
};

/// Quartet for a pinned precision parameter.
struct PrecisionTestResult {
    std::array<double, 4> statistic{};
    std::array<double, 4> p_value{};
    int df = 1;
    double phi_hat = 0.0;
    double phi0 = 0.0;
};

namespace detail::stats {

inline double chisq_upper_tail(double s, int df) {
    if (!(s > 0.0)) return 1.0;
    return 1.0 - chisq_cdf(s, ChiSquareSpec{df, 0.0});
}

/// Tail block of J' diag(w) J after eliminating the leading q columns
/// (the Schur complement); the full tail block when q == 0.
inline Eigen::MatrixXd information_tail(const Eigen::MatrixXd& jac,
                                        const Eigen::VectorXd& w,
                                        Eigen::Index q) {
    const Eigen::Index p = jac.cols();
    const Eigen::Index m = p - q;
    const Eigen::MatrixXd wj2 = w.asDiagonal() * jac.rightCols(m);
    Eigen::MatrixXd a22 = jac.rightCols(m).transpose() * wj2;
    if (q == 0) return a22;
    const Eigen::MatrixXd a11 =
        jac.leftCols(q).transpose() * (w.asDiagonal() * jac.leftCols(q));
    const Eigen::MatrixXd a12 = jac.leftCols(q).transpose() * wj2;  // q x m
    a22.noalias() -= a12.transpose() * a11.ldlt().solve(a12);
    return a22;
}

/// Score residual z with z_l = tdot_l * (dtheta/deta)_l at a fitted model.
inline Eigen::VectorXd score_residual(const LinkDescriptor& link,
                                      const FitResult& fit) {
    Eigen::VectorXd z(fit.eta.size());
    for (Eigen::Index l = 0; l < fit.eta.size(); ++l) {
        z[l] = fit.tdot[l] * link.dtheta_deta(fit.eta[l]);
    }
    return z;
}

/// Resolved subset problem: a coefficient order with the tested block last.
struct Problem {
    std::vector<Eigen::Index> order;  ///< internal position -> original index
    std::vector<Eigen::Index> tested; ///< tested indices, ascending
    Eigen::MatrixXd design;           ///< columns permuted for linear predictors
    Eigen::Index p = 0;
    Eigen::Index q = 0;               ///< free (nuisance) count
    Eigen::Index m = 0;               ///< tested count
    bool permuted = false;
};

inline Problem make_problem(const Predictor& predictor,
                            const Eigen::MatrixXd& X,
                            const std::vector<Eigen::Index>& indices) {
    Problem pr;
    pr.p = predictor.param_count(X.cols());
    if (indices.empty()) {
        throw contract_error("subset test: no coefficient indices given");
    }
    pr.tested = indices;
    std::sort(pr.tested.begin(), pr.tested.end());
    if (std::adjacent_find(pr.tested.begin(), pr.tested.end()) !=
        pr.tested.end()) {
        throw contract_error("subset test: repeated coefficient index");
    }
    if (pr.tested.front() < 0 || pr.tested.back() >= pr.p) {
        throw contract_error(
            "subset test: coefficient index out of range for " +
            std::to_string(pr.p) + " parameters");
    }
    pr.m = static_cast<Eigen::Index>(pr.tested.size());
    pr.q = pr.p - pr.m;
    const bool tail_contiguous = pr.tested.front() == pr.q;
    if (!predictor.is_linear() && !tail_contiguous) {
        throw unsupported_error(
            "subset test: nonlinear predictor '" + predictor.name() +
            "' supports only hypotheses on the trailing coefficients");
    }
    if (tail_contiguous) {
        pr.design = X;
        pr.order.resize(static_cast<std::size_t>(pr.p));
        for (Eigen::Index j = 0; j < pr.p; ++j) pr.order[j] = j;
        return pr;
    }
    // Linear predictor with a scattered subset: reorder the design columns so
    // the tested coefficients come last (both groups keep ascending order).
    pr.permuted = true;
    pr.order.reserve(static_cast<std::size_t>(pr.p));
    std::size_t k = 0;
    for (Eigen::Index j = 0; j < pr.p; ++j) {
        if (k < pr.tested.size() && pr.tested[k] == j) {
            ++k;
        } else {
            pr.order.push_back(j);
        }
    }
    pr.order.insert(pr.order.end(), pr.tested.begin(), pr.tested.end());
    pr.design.resize(X.rows(), X.cols());
    for (Eigen::Index j = 0; j < pr.p; ++j) {
        pr.design.col(j) = X.col(pr.order[static_cast<std::size_t>(j)]);
    }
    return pr;
}

/// Values aligned with `given` rearranged to match the ascending `tested`.
inline Eigen::VectorXd align_with_sorted(const std::vector<Eigen::Index>& given,
                                         const Eigen::VectorXd& values,
                                         const std::vector<Eigen::Index>& tested,
                                         const char* what) {
    if (values.size() != static_cast<Eigen::Index>(given.size())) {
        throw contract_error(std::string("subset test: indices and ") + what +
                             " lengths disagree");
    }
    Eigen::VectorXd out(values.size());
    for (Eigen::Index k = 0; k < out.size(); ++k) {
        const auto where = std::lower_bound(
            tested.begin(), tested.end(), given[static_cast<std::size_t>(k)]);
        out[where - tested.begin()] = values[k];
    }
    return out;
}

/// Hypothesized values matched to the ascending tested indices.
inline Eigen::VectorXd sorted_values(const SubsetSpec& spec,
                                     const std::vector<Eigen::Index>& tested) {
    return align_with_sorted(spec.indices, spec.null_values, tested,
                             "null_values");
}

inline FitResult reorder_fit(FitResult fit, const Problem& pr) {
    if (!pr.permuted) return fit;
    Eigen::VectorXd beta(fit.beta.size());
    Eigen::MatrixXd jac(fit.jac.rows(), fit.jac.cols());
    for (Eigen::Index j = 0; j < pr.p; ++j) {
        beta[pr.order[static_cast<std::size_t>(j)]] = fit.beta[j];
        jac.col(pr.order[static_cast<std::size_t>(j)]) = fit.jac.col(j);
    }
    fit.beta = std::move(beta);
    fit.jac = std::move(jac);
    return fit;
}

inline TestQuartet quartet(const LinkDescriptor& link, const FitResult& full,
                           const FitResult& restricted,
                           const Eigen::VectorXd& beta20, Eigen::Index q) {
    const Eigen::Index m = full.beta.size() - q;
    TestQuartet out;
    out.df = static_cast<int>(m);

    out.statistic[0] = 2.0 * (full.loglik - restricted.loglik);

    const Eigen::VectorXd d2 = full.beta.tail(m) - beta20;
    const Eigen::MatrixXd info_full = information_tail(full.jac, full.w, q);
    out.statistic[1] = full.phi * d2.dot(info_full * d2);

    const Eigen::VectorXd z = score_residual(link, restricted);
    const Eigen::VectorXd u2 = restricted.jac.rightCols(m).transpose() * z;
    const Eigen::MatrixXd info_restricted =
        information_tail(restricted.jac, restricted.w, q);
    out.statistic[2] =
        restricted.phi * u2.dot(info_restricted.ldlt().solve(u2));

    out.statistic[3] = restricted.phi * u2.dot(d2);

    for (int i = 0; i < 4; ++i) {
        out.p_value[i] = chisq_upper_tail(out.statistic[i], out.df);
    }
    return out;
}

inline FitOptions base_options(const Problem& pr, const FitOptions& options) {
    if (options.fixed_tail) {
        throw contract_error(
            "subset test: options.fixed_tail is managed internally; leave it "
            "empty");
    }
    FitOptions out = options;
    if (options.start) {
        if (options.start->size() != pr.p) {
            throw contract_error("subset test: start length must be " +
                                 std::to_string(pr.p));
        }
        if (pr.permuted) {
            Eigen::VectorXd s(pr.p);
            for (Eigen::Index j = 0; j < pr.p; ++j) {
                s[j] = (*options.start)[pr.order[static_cast<std::size_t>(j)]];
            }
            out.start = std::move(s);
        }
    }
    return out;
}

}  // namespace detail::stats

/// Tests H0: the coefficients at `spec.indices` equal `spec.null_values`.
///
/// Linear predictors accept any index subset (the design columns are
/// reordered internally); nonlinear predictors accept only the trailing
/// block of coefficients. Both returned fits are reported in the original
/// coefficient order. `options` seeds both fits; its fixed_tail must be
/// empty (the restriction is managed here).
inline SubsetTestResult subset_tests(const FamilyDescriptor& family,
                                     const LinkDescriptor& link,
                                     const Predictor& predictor,
                                     const Eigen::MatrixXd& X,
                                     const Eigen::VectorXd& y,
                                     const SubsetSpec& spec,
                                     const FitOptions& options = {}) {
    namespace ds = detail::stats;
    const ds::Problem pr = ds::make_problem(predictor, X, spec.indices);
    const Eigen::VectorXd beta20 = ds::sorted_values(spec, pr.tested);
    const FitOptions base = ds::base_options(pr, options);

    const FitResult full =
        fit_model(family, link, predictor, pr.design, y, base);

    FitOptions ropt = base;
    ropt.fixed_tail = beta20;
    if (!ropt.start) ropt.start = full.beta;  // tail is overwritten by the pin
    const FitResult restricted =
        fit_model(family, link, predictor, pr.design, y, ropt);

    SubsetTestResult out;
    out.tests = ds::quartet(link, full, restricted, beta20, pr.q);
    out.full = ds::reorder_fit(full, pr);
    out.restricted = ds::reorder_fit(restricted, pr);
    return out;
}

/// Evaluates the quartet at several hypothesized value vectors for one fixed
/// index subset, fitting the unrestricted model once. Each inner vector is
/// aligned with the ascending sort of `indices`.
inline std::vector<GridTestResult> subset_test_grid(
    const FamilyDescriptor& family, const LinkDescriptor& link,
    const Predictor& predictor, const Eigen::MatrixXd& X,
    const Eigen::VectorXd& y, const std::vector<Eigen::Index>& indices,
    const std::vector<Eigen::VectorXd>& value_grid,
    const FitOptions& options = {}) {
    namespace ds = detail::stats;
    const ds::Problem pr = ds::make_problem(predictor, X, indices);
    const FitOptions base = ds::base_options(pr, options);
    const FitResult full =
        fit_model(family, link, predictor, pr.design, y, base);

    std::vector<GridTestResult> out;
    out.reserve(value_grid.size());
    for (const Eigen::VectorXd& beta20 : value_grid) {
        if (beta20.size() != pr.m) {
            throw contract_error("subset test grid: value vector length " +
                                 std::to_string(beta20.size()) +
                                 " does not match " + std::to_string(pr.m) +
                                 " tested coefficients");
        }
        FitOptions ropt = base;
        ropt.fixed_tail = beta20;
        if (!ropt.start) ropt.start = full.beta;
        const FitResult restricted =
            fit_model(family, link, predictor, pr.design, y, ropt);
        out.push_back(
            {beta20, ds::quartet(link, full, restricted, beta20, pr.q)});
    }
    return out;
}

/// Tests H0: phi = phi0 with the regression coefficients unrestricted.
///
/// The coefficient estimate does not involve the precision, so the supplied
/// unrestricted fit serves both hypotheses. Requires a family whose
/// normalizing term separates as a1(y) + a2(phi) (that curvature supplies
/// the information about the precision); families without that structure are
/// rejected. For families whose a2 is half the log precision the Wald and
/// score statistics coincide and are computed from one shared expression.
inline PrecisionTestResult precision_tests(const FamilyDescriptor& family,
                                           const Eigen::VectorXd& y,
                                           const FitResult& full,
                                           double phi0) {
    if (!family.pdm_a2) {
        throw unsupported_error(
            "precision test: family '" + family.name +
            "' does not expose the curvature of its precision adjustment");
    }
    if (!(phi0 > 0.0) || !std::isfinite(phi0)) {
        throw contract_error("precision test: phi0 must be positive and finite");
    }
    const Eigen::Index n = y.size();
    if (n == 0 || full.theta.size() != n) {
        throw contract_error(
            "precision test: fit and response sizes disagree");
    }

    double c_at_null = 0.0;
    double score = full.sum_t;
    for (Eigen::Index l = 0; l < n; ++l) {
        c_at_null += family.c(y[l], phi0);
        score += family.c1(y[l], phi0);
    }

    PrecisionTestResult out;
    out.df = 1;
    out.phi_hat = full.phi;
    out.phi0 = phi0;
    const double eps = full.phi - phi0;

    out.statistic[0] =
        2.0 * (full.loglik - (phi0 * full.sum_t + c_at_null));
    if (family.half_log_phi_a2) {
        const double r = eps / full.phi;
        out.statistic[1] = 0.5 * static_cast<double>(n) * r * r;
        out.statistic[2] = out.statistic[1];
    } else {
        out.statistic[1] = -eps * eps * static_cast<double>(n) *
                           family.pdm_a2->a2_2(full.phi);
        out.statistic[2] = score * score /
                           (-static_cast<double>(n) *
                            family.pdm_a2->a2_2(phi0));
    }
    out.statistic[3] = eps * score;

    for (int i = 0; i < 4; ++i) {
        out.p_value[i] = detail::stats::chisq_upper_tail(out.statistic[i], 1);
    }
    return out;
}

}  // namespace dml
