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

#ifndef DML_SAMPLE_HPP
#define DML_SAMPLE_HPP

// Exact samplers for the built-in families at a given canonical parameter
// and precision, driven by the counter-based generator.  All are rejection
// or transformation methods with no distributional approximation.

#include <cmath>
#include <numbers>
#include <string>

#include "dml/family.hpp"
#include "dml/rng.hpp"

namespace dml {

namespace detail::sample {

/// Standard normal via Box-Muller (both values used in turn).
class NormalSource {
public:
    explicit NormalSource(Philox& gen) noexcept : gen_(&gen) {}
    double operator()() {
        if (have_) {
            have_ = false;
            return spare_;
        }
        const double u1 = gen_->uniform();
        const double u2 = gen_->uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = radius * std::sin(angle);
        have_ = true;
        return radius * std::cos(angle);
    }

private:
    Philox* gen_;
    double spare_ = 0.0;
    bool have_ = false;
};

/// Gamma(shape, rate 1) via the squeeze method on a cubed normal, with the
/// standard power boost for shape below one.
inline double gamma_rate1(Philox& gen, double shape) {
    double boost = 1.0;
    if (shape < 1.0) {
        boost = std::pow(gen.uniform(), 1.0 / shape);
        shape += 1.0;
    }
    NormalSource normal(gen);
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x, v;
        do {
            x = normal();
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = gen.uniform();
        if (u < 1.0 - 0.0331 * x * x * x * x) return boost * d * v;
        if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) {
            return boost * d * v;
        }
    }
}

/// Inverse Gaussian with mean mu and shape lambda.
inline double inverse_gaussian(Philox& gen, double mu, double lambda) {
    NormalSource normal(gen);
    const double z = normal();
    const double nu = z * z;
    const double x = mu + 0.5 * mu * mu * nu / lambda -
                     0.5 * (mu / lambda) *
                         std::sqrt(4.0 * mu * lambda * nu + mu * mu * nu * nu);
    const double u = gen.uniform();
    if (u <= mu / (mu + x)) return x;
    return mu * mu / x;
}

/// Mean direction theta, concentration kappa, by the wrapped-Cauchy
/// envelope rejection method; result lies in (-pi, pi].
inline double von_mises(Philox& gen, double theta, double kappa) {
    const double tau = 1.0 + std::sqrt(1.0 + 4.0 * kappa * kappa);
    const double rho = (tau - std::sqrt(2.0 * tau)) / (2.0 * kappa);
    const double r = (1.0 + rho * rho) / (2.0 * rho);
    double f;
    for (;;) {
        const double u1 = gen.uniform();
        const double z = std::cos(std::numbers::pi * u1);
        f = (1.0 + r * z) / (r + z);
        const double c = kappa * (r - f);
        const double u2 = gen.uniform();
        if (c * (2.0 - c) - u2 > 0.0) break;
        if (std::log(c / u2) + 1.0 - c >= 0.0) break;
    }
    const double u3 = gen.uniform();
    const double y = u3 > 0.5 ? theta + std::acos(f) : theta - std::acos(f);
    const double wrapped = std::atan2(std::sin(y), std::cos(y));
    // atan2 can land exactly on -pi; the support convention is (-pi, pi].
    return wrapped <= -std::numbers::pi ? std::numbers::pi : wrapped;
}

}  // namespace detail::sample

/// Draws one response from the named family at canonical parameter theta
/// and precision phi.  Families without a practical exact sampler
/// (reciprocal-inverse-gaussian, generalized-hyperbolic-secant) throw
/// unsupported_error.
inline double sample_response(const FamilyDescriptor& family, Philox& gen,
                              double theta, double phi) {
    if (!(phi > 0.0) || !std::isfinite(phi) || !std::isfinite(theta)) {
        throw contract_error("sample_response: phi must be positive and "
                             "finite and theta finite");
    }
    const std::string_view name = family.name;
    if (name == "normal") {
        detail::sample::NormalSource normal(gen);
        return theta + normal() / std::sqrt(phi);
    }
    if (name == "gamma") {
        // Canonical parameter is negative; the response is gamma with
        // shape phi and rate -phi * theta.
        if (!(theta < 0.0)) {
            throw contract_error("sample_response: gamma needs theta < 0");
        }
        return detail::sample::gamma_rate1(gen, phi) / (-phi * theta);
    }
    if (name == "reciprocal-gamma") {
        if (!(theta < 0.0)) {
            throw contract_error(
                "sample_response: reciprocal-gamma needs theta < 0");
        }
        return (-phi * theta) / detail::sample::gamma_rate1(gen, phi);
    }
    if (name == "log-gamma") {
        // theta plus the log of a gamma with shape phi and rate phi.
        return theta +
               std::log(detail::sample::gamma_rate1(gen, phi) / phi);
    }
    if (name == "inverse-gaussian") {
        if (!(theta < 0.0)) {
            throw contract_error(
                "sample_response: inverse-gaussian needs theta < 0");
        }
        const double mu = 1.0 / std::sqrt(-2.0 * theta);
        return detail::sample::inverse_gaussian(gen, mu, phi);
    }
    if (name == "von-mises") {
        return detail::sample::von_mises(gen, theta, phi);
    }
    throw unsupported_error("sample_response: no exact sampler for family '" +
                            std::string(name) + "'");
}

}  // namespace dml

#endif  // DML_SAMPLE_HPP
