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

// Maximum-likelihood fitting for dispersion-family regressions.
//
// The position coefficients solve the phi-free kernel equations
//     J_f^T diag(dtheta/deta) tdot = 0,     tdot_l = dt(y_l, theta_l)/dtheta,
// where J_f holds the jacobian columns of the free coefficients (all of them
// for a full fit; restricted fits pin a trailing block). Fisher scoring with
// weights w_l = -D2 (dtheta/deta)^2 and kernel step-halving drives the solve;
// because the kernel Sum_l t(y_l, theta_l) does not involve phi, the fitted
// coefficients are exact stationary points regardless of the working phi used
// inside the weights.
//
// The precision estimate then solves Sum_l { t_l + dc(y_l, phi)/dphi } = 0:
// a safeguarded Newton iteration on the separable a2'(phi) when the family
// provides its a2 chain, otherwise bracketed bisection on the general sum.

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "dml/design.hpp"
#include "dml/error.hpp"
#include "dml/family.hpp"

namespace dml {

struct FitOptions {
    /// Starting coefficients (full length p). Required for custom predictors.
    std::optional<Eigen::VectorXd> start;
    /// Pin the last fixed_tail->size() coefficients to these values and
    /// optimize only the leading block. Size p freezes everything (pure
    /// evaluation); absent means a full fit.
    std::optional<Eigen::VectorXd> fixed_tail;
    double tol = 1e-10;
    int max_iterations = 200;
    int max_halvings = 30;
    /// Working precision used inside the scoring weights. Only families whose
    /// D2 depends on phi (the circular one) are sensitive, and then only the
    /// iteration path changes, never the solution.
    double phi_working = 1.0;
};

struct FitResult {
    Eigen::VectorXd beta;
    Eigen::VectorXd eta;
    Eigen::VectorXd theta;
    Eigen::VectorXd tdot;
    Eigen::VectorXd w; // information weights at the fitted phi
    Eigen::MatrixXd jac;
    double phi = 0.0;
    double loglik = 0.0;
    double sum_t = 0.0;
    double kernel_score_norm = 0.0;
    /// n * a2''(phi): second derivative of the precision log-likelihood term,
    /// available when the family separates c = a1(y) + a2(phi).
    std::optional<double> alpha2;
    int iterations = 0;
    int phi_iterations = 0;
    Eigen::Index free_count = 0;
    bool converged = false;
};

struct PhiFit {
    double phi = 0.0;
    int iterations = 0;
};

namespace detail::fit {

inline constexpr double phi_bracket_lo = 1e-8;
inline constexpr double phi_bracket_hi = 1e8;

// Kernel Sum_l t(y_l, theta_l) at eta, or nullopt if any position leaves the
// family domain or the values are not finite (signals step-halving).
inline std::optional<double> kernel_at(const FamilyDescriptor& fam,
                                       const LinkDescriptor& link,
                                       const Eigen::VectorXd& y,
                                       const Eigen::VectorXd& eta,
                                       Eigen::VectorXd* theta_out = nullptr) {
    double k = 0.0;
    if (theta_out) theta_out->resize(eta.size());
    for (Eigen::Index l = 0; l < eta.size(); ++l) {
        if (!std::isfinite(eta[l])) return std::nullopt;
        const double th = link.theta_of_eta(eta[l]);
        if (!fam.theta_domain.contains(th)) return std::nullopt;
        const double tv = fam.t(y[l], th);
        if (!std::isfinite(tv)) return std::nullopt;
        if (theta_out) (*theta_out)[l] = th;
        k += tv;
    }
    return k;
}

// Default start: link-transformed position proxies regressed on the design.
inline Eigen::VectorXd default_start(const FamilyDescriptor& fam,
                                     const LinkDescriptor& link,
                                     const Predictor& predictor,
                                     const Eigen::MatrixXd& X,
                                     const Eigen::VectorXd& y,
                                     Eigen::Index p) {
    Eigen::VectorXd z(y.size());
    for (Eigen::Index l = 0; l < y.size(); ++l) {
        double zl = link.eta_of_theta(fam.theta_start(y[l]));
        if (!std::isfinite(zl)) zl = 0.0;
        z[l] = std::clamp(zl, -100.0, 100.0);
    }
    if (predictor.is_linear()) {
        return X.colPivHouseholderQr().solve(z);
    }
    if (predictor.name() == "expcurve") {
        // The curve is linear in (level, scale) once the rate is pinned:
        // profile the kernel over a fixed rate grid (including a near-flat
        // fallback) and start from the best candidate.
        const Eigen::VectorXd x = X.col(0);
        const double span = x.maxCoeff() - x.minCoeff();
        const double s = span > 0.0 ? span : 1.0;
        std::vector<double> rates = {1e-3};
        for (double g : {0.1, 0.2, 0.35, 0.6, 1.0, 1.6, 2.5, 4.0, 6.0}) {
            rates.push_back(g / s);
            rates.push_back(-g / s);
        }
        Eigen::VectorXd best(3);
        best << z.mean(), 1e-3, 1e-3;
        double best_kernel = -std::numeric_limits<double>::infinity();
        {
            const auto k0 = kernel_at(fam, link, y,
                                      Eigen::VectorXd::Constant(y.size(),
                                                                best[0]));
            if (k0.has_value()) best_kernel = *k0;
        }
        Eigen::MatrixXd B(y.size(), 2);
        B.col(0).setOnes();
        for (double rate : rates) {
            B.col(1) = (rate * x.array()).min(40.0).exp();
            const Eigen::VectorXd ab = B.colPivHouseholderQr().solve(z);
            const auto k = kernel_at(fam, link, y, B * ab);
            if (k.has_value() && *k > best_kernel) {
                best_kernel = *k;
                best << ab[0], ab[1], rate;
            }
        }
        // A vanishing scale degenerates the rate column of the jacobian.
        if (std::abs(best[1]) < 1e-8 * (1.0 + std::abs(best[0]))) {
            best[1] = 1e-3;
        }
        return best;
    }
    throw contract_error("fit: predictor '" + predictor.name() +
                         "' needs an explicit start (options.start), p = " +
                         std::to_string(p));
}

} // namespace detail::fit

/// Solve Sum_l { t(y_l, theta_l) + dc(y_l, phi)/dphi } = 0 for phi at fixed
/// positions. Throws no_root_error when the equation has no solution in
/// [1e-8, 1e8] (e.g. gamma-type families need -mean(t) > 1, the circular
/// family needs a mean resultant length strictly inside (0, 1)).
inline PhiFit fit_phi(const FamilyDescriptor& fam, const Eigen::VectorXd& y,
                      const Eigen::VectorXd& theta) {
    if (y.size() != theta.size() || y.size() == 0) {
        throw contract_error("fit_phi: y and theta must match and be nonempty");
    }
    const auto n = static_cast<double>(y.size());
    double sum_t = 0.0;
    for (Eigen::Index l = 0; l < y.size(); ++l) sum_t += fam.t(y[l], theta[l]);
    const double tau = -sum_t / n; // target for a2'(phi)

    namespace df = detail::fit;
    if (fam.pdm_a2.has_value()) {
        const auto& a2 = *fam.pdm_a2;
        auto g = [&](double phi) { return a2.a2_1(phi) - tau; };
        double lo = df::phi_bracket_lo, hi = df::phi_bracket_hi;
        double glo = g(lo), ghi = g(hi);
        // a2' is strictly decreasing (a2'' < 0), so a sign change means
        // g(lo) > 0 > g(hi).
        if (!(glo > 0.0) || !(ghi < 0.0)) {
            throw no_root_error(
                "fit_phi: no precision estimate for family '" + fam.name +
                "': mean kernel -sum(t)/n = " + std::to_string(tau) +
                " is outside the attainable range of a2'(phi)");
        }
        double phi = std::sqrt(lo * hi);
        if (fam.half_log_phi_a2) phi = 0.5 / tau; // exact
        int iters = 0;
        const double scale = 1.0 + std::abs(tau);
        for (; iters < 200; ++iters) {
            const double gv = g(phi);
            if (std::abs(gv) <= 1e-12 * scale) break;
            if (gv > 0.0) {
                lo = phi;
            } else {
                hi = phi;
            }
            const double d = a2.a2_2(phi);
            double next = phi - gv / d;
            if (!(next > lo) || !(next < hi) || !std::isfinite(next)) {
                next = 0.5 * (lo + hi);
            }
            if (std::abs(next - phi) <= 1e-15 * phi) {
                phi = next;
                break;
            }
            phi = next;
        }
        return {phi, iters};
    }

    // General path: bracket a sign change of h(phi) = sum_t + Sum_l c1(y_l, phi)
    // on a geometric grid, then bisect.
    auto h = [&](double phi) {
        double s = sum_t;
        for (Eigen::Index l = 0; l < y.size(); ++l) s += fam.c1(y[l], phi);
        return s;
    };
    double lo = df::phi_bracket_lo;
    double hlo = h(lo);
    double hi = lo;
    double hhi = hlo;
    bool bracketed = false;
    for (double cand = lo * 10.0; cand <= df::phi_bracket_hi * 1.0000001;
         cand *= 10.0) {
        hi = cand;
        hhi = h(hi);
        if (hlo == 0.0 || (hlo > 0.0) != (hhi > 0.0)) {
            bracketed = true;
            break;
        }
        lo = hi;
        hlo = hhi;
    }
    if (!bracketed) {
        throw no_root_error("fit_phi: no precision root in [1e-8, 1e8] for "
                            "family '" +
                            fam.name + "'");
    }
    int iters = 0;
    for (; iters < 200 && (hi - lo) > 1e-14 * hi; ++iters) {
        const double mid = 0.5 * (lo + hi);
        const double hm = h(mid);
        if (hm == 0.0) {
            lo = hi = mid;
            break;
        }
        if ((hm > 0.0) == (hlo > 0.0)) {
            lo = mid;
            hlo = hm;
        } else {
            hi = mid;
        }
    }
    return {0.5 * (lo + hi), iters};
}

/// Maximum-likelihood fit of the regression coefficients and precision.
inline FitResult fit_model(const FamilyDescriptor& fam,
                           const LinkDescriptor& link,
                           const Predictor& predictor, const Eigen::MatrixXd& X,
                           const Eigen::VectorXd& y,
                           const FitOptions& options = {}) {
    namespace df = detail::fit;
    const Eigen::Index n = y.size();
    if (X.rows() != n || n == 0) {
        throw contract_error("fit: X and y row counts disagree");
    }
    for (Eigen::Index l = 0; l < n; ++l) {
        if (!support_contains(fam.support, y[l])) {
            throw domain_error("fit: response at observation " +
                               std::to_string(l + 1) +
                               " lies outside the support of family '" +
                               fam.name + "'");
        }
    }
    const Eigen::Index p = predictor.param_count(X.cols());
    const Eigen::Index fixed =
        options.fixed_tail ? options.fixed_tail->size() : 0;
    if (fixed > p) {
        throw contract_error("fit: fixed tail longer than the parameter vector");
    }
    const Eigen::Index free = p - fixed;

    Eigen::VectorXd beta;
    if (options.start.has_value()) {
        if (options.start->size() != p) {
            throw contract_error("fit: start has length " +
                                 std::to_string(options.start->size()) +
                                 ", expected " + std::to_string(p));
        }
        beta = *options.start;
    } else if (free > 0) {
        beta = df::default_start(fam, link, predictor, X, y, p);
    } else {
        beta = Eigen::VectorXd::Zero(p);
    }
    if (fixed > 0) beta.tail(fixed) = *options.fixed_tail;

    FitResult out;
    out.free_count = free;

    auto eval = predictor.evaluate(X, beta, false);
    Eigen::VectorXd theta(n);
    auto kernel = df::kernel_at(fam, link, y, eval.eta, &theta);
    if (!kernel.has_value()) {
        throw domain_error(
            "fit: starting coefficients produce positions outside the domain "
            "of family '" +
            fam.name + "'; supply options.start");
    }

    std::vector<nonconvergence_error::trace_entry> trace;
    bool converged = (free == 0);
    double phi_work = options.phi_working;
    // Scoring can two-cycle around the optimum when the expected information
    // understates the curvature (saturated links).  Consecutive anti-aligned
    // proposals trigger persistent damping, which turns the cycle into a
    // contraction.
    Eigen::VectorXd prev_delta;
    int flip_count = 0;
    int damp = 0;
    int iter = 0;
    for (; iter < options.max_iterations && !converged; ++iter) {
        // Refresh the working precision when the weights depend on it: the
        // classical alternating scheme. A failed precision solve at an
        // intermediate point (degenerate kernel) keeps the previous value.
        if (fam.d2_uses_phi) {
            try {
                phi_work = fit_phi(fam, y, theta).phi;
            } catch (const no_root_error&) {
            }
        }

        // Score and weights at the current point.
        Eigen::VectorXd t1(n), score_vec(n), wv(n);
        for (Eigen::Index l = 0; l < n; ++l) {
            t1[l] = link.dtheta_deta(eval.eta[l]);
            score_vec[l] = t1[l] * fam.dt_dtheta(y[l], theta[l]);
            const double d2 = fam.d2(theta[l], phi_work);
            wv[l] = -d2 * t1[l] * t1[l];
            if (!(wv[l] > 0.0) || !std::isfinite(wv[l])) {
                throw domain_error(
                    "fit: nonpositive scoring weight at observation " +
                    std::to_string(l + 1));
            }
        }
        const Eigen::MatrixXd Jf = eval.jac.leftCols(free);
        if (iter == 0) {
            check_full_column_rank(wv.cwiseSqrt().asDiagonal() * Jf,
                                   "fit: weighted jacobian");
        }
        const Eigen::VectorXd grad = Jf.transpose() * score_vec;
        const Eigen::MatrixXd A =
            Jf.transpose() * wv.asDiagonal() * Jf;
        const Eigen::VectorXd delta = A.ldlt().solve(grad);

        const double beta_scale =
            1.0 + beta.head(free).lpNorm<Eigen::Infinity>();
        const double full_step = delta.lpNorm<Eigen::Infinity>();

        // Near the optimum the kernel differences sit at floating-point noise
        // and cannot arbitrate steps; take the scoring step unconditionally
        // and let the iteration land on the score fixed point.
        const bool polish = full_step <= 1e-6 * beta_scale;

        if (prev_delta.size() == delta.size()) {
            const double norms = delta.norm() * prev_delta.norm();
            if (norms > 0.0 && delta.dot(prev_delta) < -0.5 * norms) {
                if (++flip_count >= 3 && damp < 3) {
                    ++damp;
                    flip_count = 0;
                }
            } else {
                flip_count = 0;
            }
        }
        prev_delta = delta;

        double alpha = std::ldexp(1.0, -damp);
        bool accepted = false;
        for (int halving = 0; halving <= options.max_halvings; ++halving) {
            Eigen::VectorXd cand = beta;
            cand.head(free) += alpha * delta;
            auto cand_eval = predictor.evaluate(X, cand, false);
            Eigen::VectorXd cand_theta(n);
            const auto ck = df::kernel_at(fam, link, y, cand_eval.eta,
                                          &cand_theta);
            const bool ok =
                ck.has_value() &&
                (polish ||
                 *ck >= *kernel - 1e-12 * (1.0 + std::abs(*kernel)));
            if (ok) {
                beta = std::move(cand);
                eval = std::move(cand_eval);
                theta = std::move(cand_theta);
                kernel = ck;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        const double step = alpha * full_step;
        trace.push_back({iter + 1, *kernel, step});
        if (!accepted) {
            throw nonconvergence_error(
                "fit: kernel step-halving exhausted after " +
                std::to_string(options.max_halvings) + " halvings at iteration " +
                std::to_string(iter + 1),
                trace);
        }
        // The undamped proposal is the Newton residual proxy; damping or
        // halving must not let a large residual masquerade as convergence.
        converged = full_step <= options.tol * beta_scale;
    }
    if (!converged) {
        throw nonconvergence_error(
            "fit: no convergence in " + std::to_string(options.max_iterations) +
            " iterations",
            trace);
    }

    // Final state and the stationarity check on the kernel score.
    out.beta = beta;
    out.eta = eval.eta;
    out.theta = theta;
    out.iterations = iter;
    out.converged = true;
    out.sum_t = *kernel;
    out.tdot.resize(n);
    for (Eigen::Index l = 0; l < n; ++l) {
        out.tdot[l] = fam.dt_dtheta(y[l], theta[l]);
    }
    if (free > 0) {
        Eigen::VectorXd t1(n);
        for (Eigen::Index l = 0; l < n; ++l) {
            t1[l] = link.dtheta_deta(eval.eta[l]);
        }
        out.kernel_score_norm =
            (eval.jac.leftCols(free).transpose() * t1.cwiseProduct(out.tdot))
                .lpNorm<Eigen::Infinity>();
        if (out.kernel_score_norm > 1e-8 * (1.0 + std::abs(out.sum_t))) {
            throw nonconvergence_error(
                "fit: kernel score " + std::to_string(out.kernel_score_norm) +
                " fails the stationarity tolerance",
                trace);
        }
    }

    const PhiFit pf = fit_phi(fam, y, theta);
    out.phi = pf.phi;
    out.phi_iterations = pf.iterations;

    double sum_c = 0.0;
    for (Eigen::Index l = 0; l < n; ++l) sum_c += fam.c(y[l], out.phi);
    out.loglik = out.phi * out.sum_t + sum_c;

    out.jac = eval.jac;
    out.w.resize(n);
    for (Eigen::Index l = 0; l < n; ++l) {
        const double t1 = link.dtheta_deta(eval.eta[l]);
        out.w[l] = -fam.d2(theta[l], out.phi) * t1 * t1;
    }
    if (fam.pdm_a2.has_value()) {
        out.alpha2 = static_cast<double>(n) * fam.pdm_a2->a2_2(out.phi);
    }
    return out;
}

} // namespace dml
