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

// Regression predictors: eta_l = f(x_l; beta) with the n x p jacobian
// d eta / d beta^T and the per-observation p x p Hessians needed by the
// second-order machinery. Built-ins cover the linear predictor (Hessians
// identically zero) and a three-parameter exponential growth curve; arbitrary
// smooth predictors plug in through Predictor::custom.

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "dml/error.hpp"

namespace dml {

/// Predictor value, jacobian, and (optionally) per-observation Hessians at a
/// parameter point. `has_curvature` is false when every Hessian is known to be
/// zero (linear predictors); `hess` is left empty in that case.
struct DesignEval {
    Eigen::VectorXd eta;               // n
    Eigen::MatrixXd jac;               // n x p
    std::vector<Eigen::MatrixXd> hess; // n matrices, each p x p
    bool has_curvature = false;
};

/// Smooth map beta -> eta(X, beta) with derivatives.
class Predictor {
  public:
    using EvalFn = std::function<void(const Eigen::MatrixXd& X,
                                      const Eigen::VectorXd& beta,
                                      bool want_hessians, DesignEval& out)>;
    using ParamCountFn = std::function<Eigen::Index(Eigen::Index x_cols)>;

    Predictor() = default;

    const std::string& name() const { return name_; }
    bool is_linear() const { return linear_; }

    /// Parameter dimension implied by a covariate matrix with x_cols columns.
    Eigen::Index param_count(Eigen::Index x_cols) const {
        return param_count_(x_cols);
    }

    DesignEval evaluate(const Eigen::MatrixXd& X, const Eigen::VectorXd& beta,
                        bool want_hessians = true) const {
        if (X.rows() < 1) {
            throw contract_error("predictor '" + name_ +
                                 "': covariate matrix has no rows");
        }
        if (beta.size() != param_count(X.cols())) {
            throw contract_error(
                "predictor '" + name_ + "': expected " +
                std::to_string(param_count(X.cols())) + " parameters for " +
                std::to_string(X.cols()) + " covariate column(s), got " +
                std::to_string(beta.size()));
        }
        DesignEval out;
        eval_(X, beta, want_hessians, out);
        return out;
    }

    /// eta = X beta; the jacobian is X itself and all Hessians vanish.
    static Predictor linear() {
        Predictor p;
        p.name_ = "linear";
        p.linear_ = true;
        p.param_count_ = [](Eigen::Index cols) { return cols; };
        p.eval_ = [](const Eigen::MatrixXd& X, const Eigen::VectorXd& beta,
                     bool, DesignEval& out) {
            out.eta = X * beta;
            out.jac = X;
            out.has_curvature = false;
        };
        return p;
    }

    /// eta_l = beta1 + beta2 * exp(beta3 * x_l) on a single covariate column.
    static Predictor expcurve() {
        Predictor p;
        p.name_ = "expcurve";
        p.param_count_ = [](Eigen::Index cols) -> Eigen::Index {
            if (cols != 1) {
                throw contract_error(
                    "predictor 'expcurve': needs exactly one covariate "
                    "column, got " +
                    std::to_string(cols));
            }
            return 3;
        };
        p.eval_ = [](const Eigen::MatrixXd& X, const Eigen::VectorXd& beta,
                     bool want_hessians, DesignEval& out) {
            const Eigen::Index n = X.rows();
            out.eta.resize(n);
            out.jac.resize(n, 3);
            out.has_curvature = true;
            if (want_hessians) {
                out.hess.assign(static_cast<std::size_t>(n),
                                Eigen::MatrixXd::Zero(3, 3));
            }
            for (Eigen::Index l = 0; l < n; ++l) {
                const double x = X(l, 0);
                const double g = std::exp(beta[2] * x);
                out.eta[l] = beta[0] + beta[1] * g;
                out.jac(l, 0) = 1.0;
                out.jac(l, 1) = g;
                out.jac(l, 2) = beta[1] * x * g;
                if (want_hessians) {
                    auto& H = out.hess[static_cast<std::size_t>(l)];
                    H(1, 2) = H(2, 1) = x * g;
                    H(2, 2) = beta[1] * x * x * g;
                }
            }
        };
        return p;
    }

    /// User-supplied predictor. `hess_fn` may be null for predictors whose
    /// curvature vanishes; otherwise it returns the p x p Hessian of eta_l,
    /// which is symmetrized by averaging to absorb harmless asymmetry in the
    /// caller's arithmetic.
    static Predictor custom(
        std::string name, Eigen::Index params,
        std::function<Eigen::VectorXd(const Eigen::MatrixXd&,
                                      const Eigen::VectorXd&)>
            eta_fn,
        std::function<Eigen::MatrixXd(const Eigen::MatrixXd&,
                                      const Eigen::VectorXd&)>
            jac_fn,
        std::function<Eigen::MatrixXd(const Eigen::MatrixXd&,
                                      const Eigen::VectorXd&, Eigen::Index)>
            hess_fn) {
        Predictor p;
        p.name_ = std::move(name);
        p.param_count_ = [params](Eigen::Index) { return params; };
        p.eval_ = [name = p.name_, eta_fn = std::move(eta_fn),
                   jac_fn = std::move(jac_fn), hess_fn = std::move(hess_fn)](
                      const Eigen::MatrixXd& X, const Eigen::VectorXd& beta,
                      bool want_hessians, DesignEval& out) {
            out.eta = eta_fn(X, beta);
            out.jac = jac_fn(X, beta);
            const Eigen::Index n = X.rows();
            const Eigen::Index p_dim = beta.size();
            if (out.eta.size() != n || out.jac.rows() != n ||
                out.jac.cols() != p_dim) {
                throw contract_error("predictor '" + name +
                                     "': user callbacks returned "
                                     "inconsistently sized results");
            }
            out.has_curvature = static_cast<bool>(hess_fn);
            if (out.has_curvature && want_hessians) {
                out.hess.resize(static_cast<std::size_t>(n));
                for (Eigen::Index l = 0; l < n; ++l) {
                    Eigen::MatrixXd H = hess_fn(X, beta, l);
                    if (H.rows() != p_dim || H.cols() != p_dim) {
                        throw contract_error(
                            "predictor '" + name + "': Hessian of observation " +
                            std::to_string(l + 1) + " is not " +
                            std::to_string(p_dim) + " x " +
                            std::to_string(p_dim));
                    }
                    out.hess[static_cast<std::size_t>(l)] =
                        0.5 * (H + H.transpose());
                }
            }
            return;
        };
        return p;
    }

  private:
    std::string name_;
    bool linear_ = false;
    ParamCountFn param_count_;
    EvalFn eval_;
};

/// Look up a built-in predictor by name.
inline Predictor builtin_predictor(std::string_view name) {
    if (name == "linear") return Predictor::linear();
    if (name == "expcurve") return Predictor::expcurve();
    throw config_error("unknown predictor '" + std::string(name) +
                       "'; supported: linear, expcurve");
}

/// Throw rank_error unless M has full column rank: the smallest singular
/// value must exceed 1e-10 times the largest.
inline void check_full_column_rank(const Eigen::MatrixXd& M,
                                   const std::string& what) {
    if (M.rows() < M.cols()) {
        throw rank_error(what + ": only " + std::to_string(M.rows()) +
                         " row(s) for " + std::to_string(M.cols()) +
                         " column(s)");
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
    const auto& sv = svd.singularValues();
    const double largest = sv(0);
    const double smallest = sv(sv.size() - 1);
    if (!(largest > 0.0) || !std::isfinite(largest) ||
        smallest < 1e-10 * largest) {
        throw rank_error(what + ": rank deficient (singular values span " +
                         std::to_string(smallest) + " .. " +
                         std::to_string(largest) + ")");
    }
}

} // namespace dml
