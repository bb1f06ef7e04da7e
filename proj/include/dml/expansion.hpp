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

// First-order local power expansions for the test quartet.
//
// Under a sequence of alternatives that approaches the null at the parametric
// rate, the distribution of each statistic admits the expansion
//
//   Pr(S_i <= x) = G_r(x; lambda) + sum_{k=0..3} b_ik G_{r+2k}(x; lambda)
//                  + smaller-order terms,
//
// where G_m(.; lambda) is the noncentral chi-square CDF with m degrees of
// freedom and noncentrality lambda, and b_i0 = -(b_i1 + b_i2 + b_i3). The
// coefficient tables, the implied local powers, and the pairwise power
// comparisons (with sign-based dominance verdicts) are computed here for both
// hypothesis shapes: a coefficient subset and the precision parameter.

#include <array>
#include <cstdlib>
#include <string>
#include <vector>

#include <dml/stats.hpp>

namespace dml {

/// A local alternative for a coefficient-subset hypothesis: the model sits at
/// `beta_null` (which satisfies H0) and the tested block is displaced by
/// `epsilon`.
struct LocalAlternative {
    /// Zero-based tested coefficient positions (any order, no repeats).
    std::vector<Eigen::Index> indices;
    /// Full coefficient vector at the null, original order.
    Eigen::VectorXd beta_null;
    /// Displacement of the tested block, aligned entry-by-entry with
    /// `indices`.
    Eigen::VectorXd epsilon;
};

/// Per-observation ingredients of the subset expansion, evaluated at the
/// null. All vectors have one entry per observation.
struct SubsetExpansionInputs {
    Eigen::VectorXd w, f, g, e;  ///< information/curvature weight quartet
    Eigen::VectorXd t;           ///< aggregated displacement direction
    Eigen::VectorXd b;           ///< tested-block Jacobian times epsilon
    Eigen::VectorXd c, p, h, j, u;  ///< predictor-curvature contractions
    Eigen::VectorXd zd;          ///< full-model hat diagonal (unweighted)
    Eigen::VectorXd z1d;         ///< nuisance-block hat diagonal
    double phi = 0.0;
    double lambda = 0.0;  ///< noncentrality of the limiting law
    int df = 0;           ///< tested-block dimension
};

/// Expansion coefficients b[i][k] for statistic i+1 and CDF shift k = 0..3.
struct CoefficientTable {
    std::array<std::array<double, 4>, 4> b{};
    double lambda = 0.0;
    int df = 0;
};

/// Local power of the four statistics at one nominal level.
struct PowerResult {
    std::array<double, 4> power{};
    std::array<bool, 4> clamped{};  ///< true if the expansion left [0, 1]
    double critical_value = 0.0;
    double gamma = 0.0;
};

enum class Dominance { greater, less, equal, indeterminate };

/// One pairwise power comparison: Pi_first - Pi_second =
/// kappa4 * g_{df+4}(x; lambda) + kappa6 * g_{df+6}(x; lambda), where g_m is
/// the noncentral chi-square density. Both densities are positive for x > 0,
/// so matching coefficient signs decide dominance uniformly in the level.
struct PowerPair {
    int first = 0;   ///< statistic label, 1-based
    int second = 0;  ///< statistic label, 1-based
    double kappa4 = 0.0;
    double kappa6 = 0.0;
    Dominance verdict = Dominance::equal;
};

/// The six pairwise comparisons in a fixed order.
struct PowerComparison {
    std::array<PowerPair, 6> pairs{};
    double lambda = 0.0;
    int df = 0;
};

/// A local alternative for the precision hypothesis phi = phi0 when the true
/// precision is phi0 + epsilon and p regression coefficients are estimated.
struct PrecisionAlternative {
    double phi0 = 0.0;
    double epsilon = 0.0;
    Eigen::Index n = 0;  ///< observations
    Eigen::Index p = 0;  ///< estimated regression coefficients
};

namespace detail::expansion {

inline void verdict_from_signs(PowerPair& pair) {
    if (pair.kappa4 == 0.0 && pair.kappa6 == 0.0) {
        pair.verdict = Dominance::equal;
    } else if (pair.kappa4 >= 0.0 && pair.kappa6 >= 0.0) {
        pair.verdict = Dominance::greater;
    } else if (pair.kappa4 <= 0.0 && pair.kappa6 <= 0.0) {
        pair.verdict = Dominance::less;
    } else {
        pair.verdict = Dominance::indeterminate;
    }
}

/// Statistic labels of the six comparisons, in result order.
inline constexpr std::array<std::array<int, 2>, 6> pair_labels{
    {{1, 4}, {2, 4}, {3, 4}, {1, 2}, {1, 3}, {2, 3}}};

}  // namespace detail::expansion

/// Builds the per-observation expansion ingredients for a subset hypothesis.
/// The model is evaluated at alt.beta_null with precision phi; no fitting is
/// involved. Nonlinear predictors accept only trailing tested blocks, as in
/// subset_tests.
inline SubsetExpansionInputs subset_expansion_inputs(
    const FamilyDescriptor& family, const LinkDescriptor& link,
    const Predictor& predictor, const Eigen::MatrixXd& X,
    const LocalAlternative& alt, double phi) {
    namespace ds = detail::stats;
    const ds::Problem pr = ds::make_problem(predictor, X, alt.indices);
    const Eigen::VectorXd eps =
        ds::align_with_sorted(alt.indices, alt.epsilon, pr.tested, "epsilon");
    if (alt.beta_null.size() != pr.p) {
        throw contract_error("expansion: beta_null length must be " +
                             std::to_string(pr.p));
    }
    for (Eigen::Index k = 0; k < eps.size(); ++k) {
        if (!std::isfinite(eps[k])) {
            throw contract_error("expansion: epsilon must be finite");
        }
    }
    Eigen::VectorXd beta(pr.p);
    for (Eigen::Index r = 0; r < pr.p; ++r) {
        beta[r] = alt.beta_null[pr.order[static_cast<std::size_t>(r)]];
    }

    const DesignEval eval = predictor.evaluate(pr.design, beta, true);
    const Eigen::Index n = eval.eta.size();
    const Eigen::Index p = pr.p, q = pr.q, m = pr.m;

    SubsetExpansionInputs in;
    in.phi = phi;
    in.df = static_cast<int>(m);
    std::vector<double> eta_std(eval.eta.data(), eval.eta.data() + n);
    const FgeWeights fge = fge_weights(family, link, eta_std, phi);
    in.w = Eigen::Map<const Eigen::VectorXd>(fge.w.data(), n);
    in.f = Eigen::Map<const Eigen::VectorXd>(fge.f.data(), n);
    in.g = Eigen::Map<const Eigen::VectorXd>(fge.g.data(), n);
    in.e = Eigen::Map<const Eigen::VectorXd>(fge.e.data(), n);

    const Eigen::MatrixXd& jac = eval.jac;
    check_full_column_rank(in.w.cwiseSqrt().asDiagonal() * jac,
                           "expansion: weighted Jacobian at the null");

    const Eigen::MatrixXd wj = in.w.asDiagonal() * jac;
    const Eigen::MatrixXd info = jac.transpose() * wj;  // p x p
    const auto info_ldlt = info.ldlt();
    const Eigen::MatrixXd info_inv =
        info_ldlt.solve(Eigen::MatrixXd::Identity(p, p));

    Eigen::MatrixXd info11_inv(q, q);
    Eigen::VectorXd eps_star(p);
    if (q > 0) {
        const Eigen::MatrixXd info11 = jac.leftCols(q).transpose() *
                                       (in.w.asDiagonal() * jac.leftCols(q));
        info11_inv = info11.ldlt().solve(Eigen::MatrixXd::Identity(q, q));
        const Eigen::MatrixXd info12 =
            jac.leftCols(q).transpose() * (in.w.asDiagonal() * jac.rightCols(m));
        eps_star.head(q) = info11_inv * (info12 * eps);
    }
    eps_star.tail(m) = -eps;

    in.t = jac * eps_star;
    in.b = jac.rightCols(m) * eps;
    // Noncentrality of the limiting chi-square in the e^{-lambda/2} series
    // convention: epsilon' Var(beta2_hat)^{-1} epsilon, and t'Wt equals the
    // Schur-complement quadratic form epsilon' K22.1 epsilon / phi.
    in.lambda = phi * in.t.dot(in.w.asDiagonal() * in.t);

    // Hat diagonals of the full and nuisance information projectors.
    const Eigen::MatrixXd smooth = info_inv * jac.transpose();  // p x n
    in.zd = jac.cwiseProduct(smooth.transpose()).rowwise().sum();
    in.z1d = Eigen::VectorXd::Zero(n);
    if (q > 0) {
        const Eigen::MatrixXd smooth1 =
            info11_inv * jac.leftCols(q).transpose();  // q x n
        in.z1d =
            jac.leftCols(q).cwiseProduct(smooth1.transpose()).rowwise().sum();
    }

    in.c = Eigen::VectorXd::Zero(n);
    in.p = Eigen::VectorXd::Zero(n);
    in.h = Eigen::VectorXd::Zero(n);
    in.j = Eigen::VectorXd::Zero(n);
    in.u = Eigen::VectorXd::Zero(n);
    if (eval.has_curvature) {
        Eigen::VectorXd delta = Eigen::VectorXd::Zero(p);
        delta.tail(m) = eps;
        for (Eigen::Index l = 0; l < n; ++l) {
            const Eigen::MatrixXd& hess = eval.hess[static_cast<std::size_t>(l)];
            const Eigen::VectorXd v = hess * eps_star;
            const Eigen::VectorXd iv = info_inv * v;
            in.c[l] = eps_star.dot(v);
            in.p[l] = delta.dot(v);
            in.h[l] = jac.row(l).dot(iv);
            in.u[l] = (hess.cwiseProduct(info_inv)).sum();
            if (q > 0) {
                const Eigen::VectorXd iv1 = info11_inv * v.head(q);
                in.h[l] -= jac.row(l).head(q).dot(iv1);
                in.j[l] = (hess.topLeftCorner(q, q).cwiseProduct(info11_inv))
                              .sum();
            }
        }
    }
    return in;
}

/// Expansion coefficients assembled from the per-observation ingredients as
/// plain scalar sums.
inline CoefficientTable subset_coefficient_table(
    const SubsetExpansionInputs& in) {
    const Eigen::Index n = in.t.size();
    const double phi = in.phi;

    double q_core = 0.0;       // shared leading-term contribution
    double s_z1 = 0.0;         // (2e - f + 2g) z1d t
    double s_wjt = 0.0;        // w j t
    double s_zz_f2g = 0.0;     // (f + 2g)(zd - z1d) t
    double s_zz_3efg = 0.0;    // (3e - 2f + 2g)(zd - z1d) t
    double s_wujh = 0.0;       // w (u - j) t + 2 w h
    double s_t3_3efg = 0.0;    // (3e - 2f + 2g) t^3
    double s_t3_f2g = 0.0;     // (f + 2g) t^3
    double s_t3_fe = 0.0;      // (f - e) t^3
    double s_t3_2efg = 0.0;    // (2e - f + 2g) t^3
    double s_wtc = 0.0;        // w t c

    for (Eigen::Index l = 0; l < n; ++l) {
        const double w = in.w[l], f = in.f[l], g = in.g[l], e = in.e[l];
        const double t = in.t[l], t3 = t * t * t;
        const double zz = in.zd[l] - in.z1d[l];
        const double a_2efg = 2.0 * e - f + 2.0 * g;
        const double a_3efg = 3.0 * e - 2.0 * f + 2.0 * g;
        const double a_f2g = f + 2.0 * g;
        q_core += (e + 2.0 * g) * in.b[l] * t * t + a_2efg * t3 +
                  w * t * (in.c[l] + 2.0 * in.p[l]);
        s_z1 += a_2efg * in.z1d[l] * t;
        s_wjt += w * in.j[l] * t;
        s_zz_f2g += a_f2g * zz * t;
        s_zz_3efg += a_3efg * zz * t;
        s_wujh += w * (in.u[l] - in.j[l]) * t + 2.0 * w * in.h[l];
        s_t3_3efg += a_3efg * t3;
        s_t3_f2g += a_f2g * t3;
        s_t3_fe += (f - e) * t3;
        s_t3_2efg += a_2efg * t3;
        s_wtc += w * t * in.c[l];
    }

    const double q_term = 0.5 * phi * q_core;
    const double b11 = q_term + 0.5 * (s_z1 + s_wjt);
    const double shift = 0.5 * (s_zz_f2g + s_wujh);

    CoefficientTable tab;
    tab.lambda = in.lambda;
    tab.df = in.df;

    tab.b[0][1] = b11;
    tab.b[0][2] = -(phi / 6.0) * s_t3_3efg;
    tab.b[0][3] = 0.0;

    tab.b[1][1] = b11 + shift;
    tab.b[1][2] = 0.5 * phi * (s_t3_fe + s_wtc) - shift;
    tab.b[1][3] = -(phi / 6.0) * (s_t3_f2g + 3.0 * s_wtc);

    tab.b[2][1] = b11 + 0.5 * s_zz_3efg;
    tab.b[2][2] = -0.5 * s_zz_3efg;
    tab.b[2][3] = tab.b[0][2];

    tab.b[3][1] = b11 - 0.5 * shift;
    tab.b[3][2] = -0.25 * phi * (s_t3_2efg + s_wtc) + 0.5 * shift;
    tab.b[3][3] = -0.5 * tab.b[1][3];

    for (int i = 0; i < 4; ++i) {
        tab.b[i][0] = -(tab.b[i][1] + tab.b[i][2] + tab.b[i][3]);
    }
    return tab;
}

/// Convenience wrapper: ingredients plus coefficients in one call.
inline CoefficientTable subset_coefficients(const FamilyDescriptor& family,
                                            const LinkDescriptor& link,
                                            const Predictor& predictor,
                                            const Eigen::MatrixXd& X,
                                            const LocalAlternative& alt,
                                            double phi) {
    return subset_coefficient_table(
        subset_expansion_inputs(family, link, predictor, X, alt, phi));
}

/// Pairwise power-difference coefficients for a subset alternative, computed
/// directly as scalar sums (no coefficient-table differencing, so structural
/// zeros stay exactly zero).
inline PowerComparison subset_power_differences(
    const SubsetExpansionInputs& in) {
    const Eigen::Index n = in.t.size();
    const double phi = in.phi;

    double s_zz_f2g = 0.0, s_zz_3efg = 0.0, s_zz_fe = 0.0;
    double s_wujh = 0.0;
    double s_t3_f2g = 0.0, s_t3_3efg = 0.0, s_t3_2efg = 0.0, s_t3_fe = 0.0;
    double s_wtc = 0.0;
    for (Eigen::Index l = 0; l < n; ++l) {
        const double w = in.w[l], f = in.f[l], g = in.g[l], e = in.e[l];
        const double t = in.t[l], t3 = t * t * t;
        const double zz = in.zd[l] - in.z1d[l];
        s_zz_f2g += (f + 2.0 * g) * zz * t;
        s_zz_3efg += (3.0 * e - 2.0 * f + 2.0 * g) * zz * t;
        s_zz_fe += (f - e) * zz * t;
        s_wujh += w * (in.u[l] - in.j[l]) * t + 2.0 * w * in.h[l];
        s_t3_f2g += (f + 2.0 * g) * t3;
        s_t3_3efg += (3.0 * e - 2.0 * f + 2.0 * g) * t3;
        s_t3_2efg += (2.0 * e - f + 2.0 * g) * t3;
        s_t3_fe += (f - e) * t3;
        s_wtc += w * t * in.c[l];
    }

    const double k1 = -0.5 * (s_zz_f2g + s_wujh);
    const double k2 = -(phi / 6.0) * s_t3_f2g - 0.5 * phi * s_wtc;
    const double k5 = k1 - s_zz_3efg;
    const double k6 = -0.5 * phi * s_t3_2efg - 0.5 * phi * s_wtc;
    const double k9 = s_zz_3efg;
    const double k10 = (phi / 3.0) * s_t3_3efg;
    const double k11 = -3.0 * s_zz_fe - s_wujh;
    const double k12 = -phi * s_t3_fe - phi * s_wtc;

    PowerComparison cmp;
    cmp.lambda = in.lambda;
    cmp.df = in.df;
    const std::array<std::array<double, 2>, 6> kappas{
        {{k1, k2},
         {3.0 * k1, 3.0 * k2},
         {k5, k6},
         {-2.0 * k1, -2.0 * k2},
         {k9, k10},
         {k11, k12}}};
    for (std::size_t r = 0; r < 6; ++r) {
        cmp.pairs[r].first = detail::expansion::pair_labels[r][0];
        cmp.pairs[r].second = detail::expansion::pair_labels[r][1];
        cmp.pairs[r].kappa4 = kappas[r][0];
        cmp.pairs[r].kappa6 = kappas[r][1];
        detail::expansion::verdict_from_signs(cmp.pairs[r]);
    }
    return cmp;
}

/// Expansion CDF of statistic i (0-based) at x.
inline double expansion_cdf(const CoefficientTable& tab, int statistic,
                            double x) {
    if (statistic < 0 || statistic > 3) {
        throw contract_error("expansion: statistic index must be 0..3");
    }
    const auto& b = tab.b[static_cast<std::size_t>(statistic)];
    // G_{r+2k} - G_r = -2 (g_{r+2} + ... + g_{r+2k}) by the CDF recurrence,
    // so the shifted-CDF combination collapses onto three density values.
    const double g2 = chisq_pdf(x, ChiSquareSpec{tab.df + 2, tab.lambda});
    const double g4 = chisq_pdf(x, ChiSquareSpec{tab.df + 4, tab.lambda});
    const double g6 = chisq_pdf(x, ChiSquareSpec{tab.df + 6, tab.lambda});
    const double base = chisq_cdf(x, ChiSquareSpec{tab.df, tab.lambda});
    return base - 2.0 * ((b[1] + b[2] + b[3]) * g2 + (b[2] + b[3]) * g4 +
                         b[3] * g6);
}

/// Local power of the four statistics at nominal level gamma: one minus the
/// expansion CDF at the central chi-square critical value. Values outside
/// [0, 1] (possible for a truncated expansion) are clamped and flagged.
inline PowerResult local_power(const CoefficientTable& tab, double gamma) {
    if (!(gamma > 0.0) || !(gamma < 1.0)) {
        throw contract_error("local power: gamma must lie in (0, 1)");
    }
    PowerResult out;
    out.gamma = gamma;
    out.critical_value = chisq_quantile(1.0 - gamma, tab.df);
    for (int i = 0; i < 4; ++i) {
        double pi = 1.0 - expansion_cdf(tab, i, out.critical_value);
        if (pi < 0.0) {
            pi = 0.0;
            out.clamped[static_cast<std::size_t>(i)] = true;
        } else if (pi > 1.0) {
            pi = 1.0;
            out.clamped[static_cast<std::size_t>(i)] = true;
        }
        out.power[static_cast<std::size_t>(i)] = pi;
    }
    return out;
}

/// Power difference of one comparison evaluated at a critical value x:
/// Pi_first(x) - Pi_second(x) under the shared expansion.
inline double pair_difference(const PowerComparison& cmp, std::size_t pair,
                              double x) {
    if (pair >= cmp.pairs.size()) {
        throw contract_error("pair difference: pair index must be 0..5");
    }
    const PowerPair& pp = cmp.pairs[pair];
    return pp.kappa4 * chisq_pdf(x, ChiSquareSpec{cmp.df + 4, cmp.lambda}) +
           pp.kappa6 * chisq_pdf(x, ChiSquareSpec{cmp.df + 6, cmp.lambda});
}

/// Coefficient table for the precision hypothesis. The family must expose
/// the separable precision adjustment a2 (its second and third derivatives
/// carry all the information about the precision).
inline CoefficientTable precision_coefficients(
    const FamilyDescriptor& family, const PrecisionAlternative& alt) {
    if (!family.pdm_a2) {
        throw unsupported_error(
            "precision expansion: family '" + family.name +
            "' does not expose the curvature of its precision adjustment");
    }
    if (!(alt.phi0 > 0.0) || !std::isfinite(alt.phi0)) {
        throw contract_error(
            "precision expansion: phi0 must be positive and finite");
    }
    if (!std::isfinite(alt.epsilon) || !(alt.phi0 + alt.epsilon > 0.0)) {
        throw contract_error(
            "precision expansion: phi0 + epsilon must stay positive");
    }
    if (alt.n < 1 || alt.p < 0) {
        throw contract_error(
            "precision expansion: need n >= 1 observations and p >= 0 "
            "coefficients");
    }
    const double nn = static_cast<double>(alt.n);
    const double alpha2 = nn * family.pdm_a2->a2_2(alt.phi0);
    const double alpha3 = nn * family.pdm_a2->a2_3(alt.phi0);
    // With a separable precision adjustment, d(alpha2)/dphi and the third
    // cumulant coefficient coincide; keeping both names mirrors the general
    // expansion structure.
    const double alpha2p = alpha3;
    if (!(alpha2 < 0.0)) {
        throw domain_error(
            "precision expansion: nonnegative precision curvature at phi0");
    }
    const double eps = alt.epsilon;
    const double eps3 = eps * eps * eps;
    const double pdim = static_cast<double>(alt.p);

    CoefficientTable tab;
    tab.df = 1;
    tab.lambda = -alpha2 * eps * eps;

    const double b11 = 0.5 * (alpha2p - alpha3) * eps3 +
                       pdim * eps / (2.0 * alt.phi0);
    tab.b[0][1] = b11;
    tab.b[0][2] = (2.0 * alpha3 - 3.0 * alpha2p) * eps3 / 6.0;
    tab.b[0][3] = 0.0;

    tab.b[1][1] = b11 - alpha3 * eps / (2.0 * alpha2);
    tab.b[1][2] = -0.5 * (alpha2p - alpha3) * eps3 +
                  alpha3 * eps / (2.0 * alpha2);
    tab.b[1][3] = -alpha3 * eps3 / 6.0;

    tab.b[2][1] = b11 + (2.0 * alpha3 - 3.0 * alpha2p) * eps / (2.0 * alpha2);
    tab.b[2][2] = -(2.0 * alpha3 - 3.0 * alpha2p) * eps / (2.0 * alpha2);
    tab.b[2][3] = (2.0 * alpha3 - 3.0 * alpha2p) * eps3 / 6.0;

    tab.b[3][1] = b11 + alpha3 * eps / (4.0 * alpha2);
    tab.b[3][2] = -(2.0 * alpha2p - alpha3) * eps3 / 4.0 -
                  alpha3 * eps / (4.0 * alpha2);
    tab.b[3][3] = alpha3 * eps3 / 12.0;

    for (int i = 0; i < 4; ++i) {
        tab.b[i][0] = -(tab.b[i][1] + tab.b[i][2] + tab.b[i][3]);
    }
    return tab;
}

/// Pairwise power-difference coefficients for the precision hypothesis,
/// from the same closed forms (structural zeros are exact).
inline PowerComparison precision_power_differences(
    const FamilyDescriptor& family, const PrecisionAlternative& alt) {
    const CoefficientTable tab = precision_coefficients(family, alt);
    const double nn = static_cast<double>(alt.n);
    const double alpha2 = nn * family.pdm_a2->a2_2(alt.phi0);
    const double alpha3 = nn * family.pdm_a2->a2_3(alt.phi0);
    const double eps = alt.epsilon;
    const double eps3 = eps * eps * eps;

    const double k1 = alpha3 * eps / (2.0 * alpha2);
    const double k2 = -alpha3 * eps3 / 6.0;

    PowerComparison cmp;
    cmp.lambda = tab.lambda;
    cmp.df = tab.df;
    const std::array<std::array<double, 2>, 6> kappas{
        {{k1, k2},
         {3.0 * k1, 3.0 * k2},
         {3.0 * k1, 3.0 * k2},
         {-2.0 * k1, -2.0 * k2},
         {-2.0 * k1, -2.0 * k2},
         {0.0, 0.0}}};
    for (std::size_t r = 0; r < 6; ++r) {
        cmp.pairs[r].first = detail::expansion::pair_labels[r][0];
        cmp.pairs[r].second = detail::expansion::pair_labels[r][1];
        cmp.pairs[r].kappa4 = kappas[r][0];
        cmp.pairs[r].kappa6 = kappas[r][1];
        detail::expansion::verdict_from_signs(cmp.pairs[r]);
    }
    return cmp;
}

}  // namespace dml
