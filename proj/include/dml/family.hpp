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

// Dispersion families and position links.
//
// A dispersion family has log-density  phi * t(y, theta) + c(y, phi)  with
// position theta and precision phi > 0. The family descriptor carries t and
// its theta-derivative, the expected derivative moments
//     D2 = E[d^2 t / d theta^2],  D3 = E[d^3 t / d theta^3],
// the theta-derivative D2' of D2, the c function and its phi-derivative,
// and two optional structures:
//   * pdm_a2: when c(y, phi) = a1(y) + a2(phi) separates, the a2 chain
//     a2, a2', a2'', a2''' drives precision-parameter inference;
//   * edm: when t(y, theta) = y*theta - b(theta) is exponential-family,
//     the mean map mu(theta) and variance function V(mu) allow GLM-style
//     mean links via mean_link().
//
// A link descriptor maps the linear predictor eta to theta (as a position
// link) and carries the first two derivatives of theta(eta). Mean links are
// produced by composing a scalar link through the family's mean map.

#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dml/error.hpp"
#include "dml/specfun.hpp"

namespace dml {

/// Support of the response variable.
enum class Support { real_line, positive, circle };

inline bool support_contains(Support s, double y) {
    switch (s) {
        case Support::real_line: return std::isfinite(y);
        case Support::positive: return std::isfinite(y) && y > 0.0;
        case Support::circle: return std::isfinite(y) && y > -pi && y <= pi;
    }
    return false;
}

/// Open interval for the position parameter.
struct ThetaDomain {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();

    bool contains(double theta) const {
        return std::isfinite(theta) && theta > lo && theta < hi;
    }
};

/// a2 chain of a proper dispersion family (c = a1(y) + a2(phi)).
struct PdmA2 {
    double (*a2)(double phi);
    double (*a2_1)(double phi);
    double (*a2_2)(double phi);
    double (*a2_3)(double phi);
};

/// Mean map and variance function of an exponential dispersion family.
struct EdmMeanVariance {
    double (*mu_of_theta)(double theta);
    double (*theta_of_mu)(double mu);
    double (*variance)(double mu);
    double (*dvariance_dmu)(double mu);
};

struct FamilyDescriptor {
    std::string name;
    Support support = Support::real_line;
    ThetaDomain theta_domain;

    double (*t)(double y, double theta);
    double (*dt_dtheta)(double y, double theta);
    // Expected derivative moments; phi enters only for the circular family.
    double (*d2)(double theta, double phi);
    double (*d3)(double theta, double phi);
    double (*d2_prime)(double theta, double phi);

    double (*c)(double y, double phi);
    double (*c1)(double y, double phi);

    std::optional<PdmA2> pdm_a2;
    std::optional<EdmMeanVariance> edm;

    // Per-observation position proxy used to seed iterative fits.
    double (*theta_start)(double y);

    // The normal / inverse-Gaussian / reciprocal-inverse-Gaussian families
    // share a2 = log(phi)/2, which makes the precision-parameter Wald and
    // score statistics algebraically identical; flagged so they can share
    // one floating-point expression.
    bool half_log_phi_a2 = false;

    // True when D2 actually varies with phi (the circular family): fitting
    // then refreshes the working precision alongside the coefficients.
    bool d2_uses_phi = false;

    bool is_circular() const { return support == Support::circle; }
};

/// Wrap an angle into (-pi, pi].
inline double wrap_angle(double y) {
    double w = std::remainder(y, 2.0 * pi);
    if (w <= -pi) w += 2.0 * pi;
    return w;
}

namespace detail::fam {

// --- shared a2 chains -------------------------------------------------------

inline double a2_half_log(double phi) { return 0.5 * std::log(phi); }
inline double a2_half_log_1(double phi) { return 0.5 / phi; }
inline double a2_half_log_2(double phi) { return -0.5 / (phi * phi); }
inline double a2_half_log_3(double phi) { return 1.0 / (phi * phi * phi); }

inline double a2_gamma(double phi) { return phi * std::log(phi) - ln_gamma(phi); }
inline double a2_gamma_1(double phi) { return std::log(phi) + 1.0 - digamma(phi); }
inline double a2_gamma_2(double phi) { return 1.0 / phi - trigamma(phi); }
inline double a2_gamma_3(double phi) {
    return -1.0 / (phi * phi) - tetragamma(phi);
}

inline double a2_vonmises(double phi) {
    // -log I0(phi), computed in scaled form to survive large phi.
    return -(std::log(bessel_i0_scaled(phi)) + phi);
}
inline double a2_vonmises_1(double phi) { return -bessel_i1_over_i0(phi); }
inline double a2_vonmises_2(double phi) {
    const double r = bessel_i1_over_i0(phi);
    return r * r + r / phi - 1.0;
}
inline double a2_vonmises_3(double phi) {
    const double r = bessel_i1_over_i0(phi);
    const double r1 = 1.0 - r * r - r / phi;
    return (2.0 * r + 1.0 / phi) * r1 - r / (phi * phi);
}

inline constexpr PdmA2 pdm_half_log{a2_half_log, a2_half_log_1, a2_half_log_2,
                                    a2_half_log_3};
inline constexpr PdmA2 pdm_gamma{a2_gamma, a2_gamma_1, a2_gamma_2, a2_gamma_3};
inline constexpr PdmA2 pdm_vonmises{a2_vonmises, a2_vonmises_1, a2_vonmises_2,
                                    a2_vonmises_3};

// --- normal ------------------------------------------------------------------

inline double normal_t(double y, double th) {
    const double r = y - th;
    return -0.5 * r * r;
}
inline double normal_dt(double y, double th) { return y - th; }
inline double normal_d2(double, double) { return -1.0; }
inline double normal_zero(double, double) { return 0.0; }
inline double normal_c(double, double phi) {
    return 0.5 * (std::log(phi) - log_two_pi);
}
inline double normal_c1(double, double phi) { return 0.5 / phi; }
inline double normal_mu(double th) { return th; }
inline double normal_theta_of_mu(double mu) { return mu; }
inline double normal_var(double) { return 1.0; }
inline double normal_dvar(double) { return 0.0; }
inline double identity_start(double y) { return y; }

// --- gamma (position theta < 0, mean -1/theta) -------------------------------

inline double gamma_t(double y, double th) {
    return y * th + std::log(-th) + std::log(y);
}
inline double gamma_dt(double y, double th) { return y + 1.0 / th; }
inline double gamma_d2(double th, double) { return -1.0 / (th * th); }
inline double gamma_d3(double th, double) { return 2.0 / (th * th * th); }
inline double gamma_c(double y, double phi) {
    return a2_gamma(phi) - std::log(y);
}
inline double gamma_c1(double, double phi) { return a2_gamma_1(phi); }
inline double gamma_mu(double th) { return -1.0 / th; }
inline double gamma_theta_of_mu(double mu) { return -1.0 / mu; }
inline double gamma_var(double mu) { return mu * mu; }
inline double gamma_dvar(double mu) { return 2.0 * mu; }
inline double gamma_start(double y) { return -1.0 / std::max(y, 1e-12); }

// --- inverse Gaussian (theta < 0, mean (-2 theta)^{-1/2}) --------------------

inline double invgauss_t(double y, double th) {
    return y * th + std::sqrt(-2.0 * th) - 0.5 / y;
}
inline double invgauss_dt(double y, double th) {
    return y - 1.0 / std::sqrt(-2.0 * th);
}
inline double invgauss_d2(double th, double) {
    return -std::pow(-2.0 * th, -1.5);
}
inline double invgauss_d3(double th, double) {
    return -3.0 * std::pow(-2.0 * th, -2.5);
}
inline double invgauss_c(double y, double phi) {
    return 0.5 * (std::log(phi) - log_two_pi - 3.0 * std::log(y));
}
inline double invgauss_c1(double, double phi) { return 0.5 / phi; }
inline double invgauss_mu(double th) { return 1.0 / std::sqrt(-2.0 * th); }
inline double invgauss_theta_of_mu(double mu) { return -0.5 / (mu * mu); }
inline double invgauss_var(double mu) { return mu * mu * mu; }
inline double invgauss_dvar(double mu) { return 3.0 * mu * mu; }
inline double invgauss_start(double y) {
    const double yy = std::max(y, 1e-12);
    return -0.5 / (yy * yy);
}

// --- reciprocal inverse Gaussian (theta > 0) ---------------------------------

inline double recinvgauss_t(double y, double th) {
    const double r = y - th;
    return -0.5 * r * r / y;
}
inline double recinvgauss_dt(double y, double th) { return (y - th) / y; }
inline double recinvgauss_d2(double th, double) { return -1.0 / th; }
inline double recinvgauss_d2p(double th, double) { return 1.0 / (th * th); }
inline double recinvgauss_c(double y, double phi) {
    return 0.5 * (std::log(phi) - log_two_pi - std::log(y));
}
inline double recinvgauss_c1(double, double phi) { return 0.5 / phi; }
inline double positive_start(double y) { return std::max(y, 1e-12); }

// --- reciprocal gamma (theta < 0) --------------------------------------------

inline double recgamma_t(double y, double th) {
    return th / y + std::log(-th) - std::log(y);
}
inline double recgamma_dt(double y, double th) { return 1.0 / y + 1.0 / th; }
inline double recgamma_d2(double th, double) { return -1.0 / (th * th); }
inline double recgamma_d3(double th, double) { return 2.0 / (th * th * th); }
inline double recgamma_c(double y, double phi) {
    return a2_gamma(phi) - std::log(y);
}
inline double recgamma_start(double y) { return -std::max(y, 1e-12); }

// --- log gamma (theta real, y real) ------------------------------------------

inline double loggamma_t(double y, double th) {
    const double u = y - th;
    return u - std::exp(u);
}
inline double loggamma_dt(double y, double th) {
    return -1.0 + std::exp(y - th);
}
inline double loggamma_d2(double, double) { return -1.0; }
inline double loggamma_d3(double, double) { return 1.0; }
inline double loggamma_c(double, double phi) { return a2_gamma(phi); }
inline double loggamma_c1(double, double phi) { return a2_gamma_1(phi); }

// --- von Mises (circular) -----------------------------------------------------

inline double vonmises_t(double y, double th) { return std::cos(y - th); }
inline double vonmises_dt(double y, double th) { return std::sin(y - th); }
inline double vonmises_d2(double, double phi) {
    return -bessel_i1_over_i0(phi);
}
inline double vonmises_c(double, double phi) {
    return -(std::log(2.0 * pi) + std::log(bessel_i0_scaled(phi)) + phi);
}
inline double vonmises_c1(double, double phi) {
    return -bessel_i1_over_i0(phi);
}
inline double vonmises_start(double y) { return wrap_angle(y); }

// --- hyperbolic secant (mean-parameterized, theta real, y real) ---------------
//
// t = y*arctan(theta) - log(1 + theta^2)/2;  the normalizer mixes y and phi,
// so there is no a2 chain: the family supports position inference only.

inline double hypsec_t(double y, double th) {
    return y * std::atan(th) - 0.5 * std::log1p(th * th);
}
inline double hypsec_dt(double y, double th) { return (y - th) / (1.0 + th * th); }
inline double hypsec_d2(double th, double) { return -1.0 / (1.0 + th * th); }
inline double hypsec_d3(double th, double) {
    const double s = 1.0 + th * th;
    return 4.0 * th / (s * s);
}
inline double hypsec_d2p(double th, double) {
    const double s = 1.0 + th * th;
    return 2.0 * th / (s * s);
}
inline double hypsec_c(double y, double phi) {
    const std::complex<double> z(0.5 * phi, 0.5 * phi * y);
    return std::log(phi) + (phi - 2.0) * std::log(2.0) - std::log(pi) -
           ln_gamma(phi) + 2.0 * ln_gamma(z).real();
}
inline double hypsec_c1(double y, double phi) {
    const std::complex<double> z(0.5 * phi, 0.5 * phi * y);
    const std::complex<double> dz(0.5, 0.5 * y);
    return 1.0 / phi + std::log(2.0) - digamma(phi) +
           2.0 * (dz * digamma(z)).real();
}

} // namespace detail::fam

/// Look up a built-in family by name. Throws config_error for unknown names,
/// listing the supported set.
inline const FamilyDescriptor& builtin_family(std::string_view name) {
    namespace f = detail::fam;
    static const FamilyDescriptor normal{
        "normal", Support::real_line, {},
        f::normal_t, f::normal_dt, f::normal_d2, f::normal_zero, f::normal_zero,
        f::normal_c, f::normal_c1,
        f::pdm_half_log,
        EdmMeanVariance{f::normal_mu, f::normal_theta_of_mu, f::normal_var,
                        f::normal_dvar},
        f::identity_start, true};
    static const FamilyDescriptor gamma{
        "gamma", Support::positive, {-std::numeric_limits<double>::infinity(), 0.0},
        f::gamma_t, f::gamma_dt, f::gamma_d2, f::gamma_d3, f::gamma_d3,
        f::gamma_c, f::gamma_c1,
        f::pdm_gamma,
        EdmMeanVariance{f::gamma_mu, f::gamma_theta_of_mu, f::gamma_var,
                        f::gamma_dvar},
        f::gamma_start, false};
    static const FamilyDescriptor invgauss{
        "inverse-gaussian", Support::positive,
        {-std::numeric_limits<double>::infinity(), 0.0},
        f::invgauss_t, f::invgauss_dt, f::invgauss_d2, f::invgauss_d3,
        f::invgauss_d3,
        f::invgauss_c, f::invgauss_c1,
        f::pdm_half_log,
        EdmMeanVariance{f::invgauss_mu, f::invgauss_theta_of_mu, f::invgauss_var,
                        f::invgauss_dvar},
        f::invgauss_start, true};
    static const FamilyDescriptor recinvgauss{
        "reciprocal-inverse-gaussian", Support::positive,
        {0.0, std::numeric_limits<double>::infinity()},
        f::recinvgauss_t, f::recinvgauss_dt, f::recinvgauss_d2, f::normal_zero,
        f::recinvgauss_d2p,
        f::recinvgauss_c, f::recinvgauss_c1,
        f::pdm_half_log, std::nullopt, f::positive_start, true};
    static const FamilyDescriptor recgamma{
        "reciprocal-gamma", Support::positive,
        {-std::numeric_limits<double>::infinity(), 0.0},
        f::recgamma_t, f::recgamma_dt, f::recgamma_d2, f::recgamma_d3,
        f::recgamma_d3,
        f::recgamma_c, f::gamma_c1,
        f::pdm_gamma, std::nullopt, f::recgamma_start, false};
    static const FamilyDescriptor loggamma{
        "log-gamma", Support::real_line, {},
        f::loggamma_t, f::loggamma_dt, f::loggamma_d2, f::loggamma_d3,
        f::normal_zero,
        f::loggamma_c, f::loggamma_c1,
        f::pdm_gamma, std::nullopt, f::identity_start, false};
    static const FamilyDescriptor vonmises{
        "von-mises", Support::circle, {},
        f::vonmises_t, f::vonmises_dt, f::vonmises_d2, f::normal_zero,
        f::normal_zero,
        f::vonmises_c, f::vonmises_c1,
        f::pdm_vonmises, std::nullopt, f::vonmises_start, false, true};
    static const FamilyDescriptor hypsec{
        "generalized-hyperbolic-secant", Support::real_line, {},
        f::hypsec_t, f::hypsec_dt, f::hypsec_d2, f::hypsec_d3, f::hypsec_d2p,
        f::hypsec_c, f::hypsec_c1,
        std::nullopt, std::nullopt, f::identity_start, false};

    if (name == "normal") return normal;
    if (name == "gamma") return gamma;
    if (name == "inverse-gaussian") return invgauss;
    if (name == "reciprocal-inverse-gaussian") return recinvgauss;
    if (name == "reciprocal-gamma") return recgamma;
    if (name == "log-gamma") return loggamma;
    if (name == "von-mises") return vonmises;
    if (name == "generalized-hyperbolic-secant") return hypsec;
    throw config_error(
        "unknown family '" + std::string(name) +
        "'; supported: normal, inverse-gaussian, "
        "reciprocal-inverse-gaussian, gamma, reciprocal-gamma, log-gamma, "
        "von-mises, generalized-hyperbolic-secant");
}

// ---------------------------------------------------------------------------
// Links
// ---------------------------------------------------------------------------

/// Position link: eta = d(theta), with theta(eta) and its two derivatives.
struct LinkDescriptor {
    std::string name;
    std::function<double(double)> eta_of_theta;
    std::function<double(double)> theta_of_eta;
    std::function<double(double)> dtheta_deta;
    std::function<double(double)> d2theta_deta2;
};

namespace detail::fam {

inline LinkDescriptor make_identity_link() {
    return {"identity",
            [](double th) { return th; },
            [](double e) { return e; },
            [](double) { return 1.0; },
            [](double) { return 0.0; }};
}

inline LinkDescriptor make_log_link() {
    return {"log",
            [](double th) { return std::log(th); },
            [](double e) { return std::exp(e); },
            [](double e) { return std::exp(e); },
            [](double e) { return std::exp(e); }};
}

inline LinkDescriptor make_reciprocal_link() {
    return {"reciprocal",
            [](double th) { return 1.0 / th; },
            [](double e) { return 1.0 / e; },
            [](double e) { return -1.0 / (e * e); },
            [](double e) { return 2.0 / (e * e * e); }};
}

inline LinkDescriptor make_tan_half_link() {
    return {"tan-half",
            [](double th) { return std::tan(0.5 * th); },
            [](double e) { return 2.0 * std::atan(e); },
            [](double e) { return 2.0 / (1.0 + e * e); },
            [](double e) {
                const double s = 1.0 + e * e;
                return -4.0 * e / (s * s);
            }};
}

inline LinkDescriptor make_power_link(double c) {
    // eta = theta^c on theta > 0.
    const double inv = 1.0 / c;
    return {"power(" + std::to_string(c) + ")",
            [c](double th) { return std::pow(th, c); },
            [inv](double e) { return std::pow(e, inv); },
            [inv](double e) { return inv * std::pow(e, inv - 1.0); },
            [inv](double e) { return inv * (inv - 1.0) * std::pow(e, inv - 2.0); }};
}

// Parse the numeric argument of power(...): decimal ("0.5") or ratio ("-1/3").
inline double parse_power_argument(std::string_view body) {
    const std::string s(body);
    const auto slash = s.find('/');
    try {
        std::size_t used = 0;
        if (slash == std::string::npos) {
            const double v = std::stod(s, &used);
            if (used != s.size()) throw std::invalid_argument(s);
            return v;
        }
        const std::string num = s.substr(0, slash);
        const std::string den = s.substr(slash + 1);
        const double a = std::stod(num, &used);
        if (used != num.size()) throw std::invalid_argument(s);
        const double b = std::stod(den, &used);
        if (used != den.size()) throw std::invalid_argument(s);
        if (b == 0.0) throw std::invalid_argument(s);
        return a / b;
    } catch (const std::exception&) {
        throw config_error("power link: cannot parse exponent '" + s + "'");
    }
}

} // namespace detail::fam

/// Compose a scalar link through an exponential-family mean map: the scalar
/// link relates eta to the mean mu, and theta follows via the family's
/// theta(mu). Requires the family to expose its mean/variance structure.
inline LinkDescriptor mean_link(const FamilyDescriptor& family,
                                const LinkDescriptor& mu_link) {
    if (!family.edm.has_value()) {
        throw unsupported_error("mean links require an exponential-family mean "
                                "structure, which family '" +
                                family.name + "' does not provide");
    }
    const EdmMeanVariance edm = *family.edm;
    LinkDescriptor out;
    out.name = "mean-" + mu_link.name;
    out.eta_of_theta = [edm, mu_link](double th) {
        return mu_link.eta_of_theta(edm.mu_of_theta(th));
    };
    out.theta_of_eta = [edm, mu_link](double e) {
        return edm.theta_of_mu(mu_link.theta_of_eta(e));
    };
    out.dtheta_deta = [edm, mu_link](double e) {
        const double mu = mu_link.theta_of_eta(e);
        return mu_link.dtheta_deta(e) / edm.variance(mu);
    };
    out.d2theta_deta2 = [edm, mu_link](double e) {
        const double mu = mu_link.theta_of_eta(e);
        const double mu1 = mu_link.dtheta_deta(e);
        const double mu2 = mu_link.d2theta_deta2(e);
        const double v = edm.variance(mu);
        return mu2 / v - mu1 * mu1 * edm.dvariance_dmu(mu) / (v * v);
    };
    return out;
}

/// Look up a built-in link by name. Bare names are position links; the
/// "mean-" prefix composes the named scalar link through the family mean
/// (exponential families only). power takes a decimal or p/q exponent.
inline LinkDescriptor builtin_link(std::string_view name,
                                   const FamilyDescriptor* family = nullptr) {
    namespace f = detail::fam;
    constexpr std::string_view mean_prefix = "mean-";
    if (name.substr(0, mean_prefix.size()) == mean_prefix) {
        if (family == nullptr) {
            throw config_error("mean links need a family context");
        }
        return mean_link(*family, builtin_link(name.substr(mean_prefix.size())));
    }
    if (name == "identity") return f::make_identity_link();
    if (name == "log") return f::make_log_link();
    if (name == "reciprocal") return f::make_reciprocal_link();
    if (name == "tan-half") return f::make_tan_half_link();
    constexpr std::string_view power_prefix = "power(";
    if (name.substr(0, power_prefix.size()) == power_prefix && name.back() == ')') {
        const auto body = name.substr(power_prefix.size(),
                                      name.size() - power_prefix.size() - 1);
        const double c = f::parse_power_argument(body);
        if (c == 0.0) throw config_error("power link: exponent must be nonzero");
        return f::make_power_link(c);
    }
    throw config_error("unknown link '" + std::string(name) +
                       "'; supported: identity, log, reciprocal, tan-half, "
                       "power(c), and mean-<link> for exponential families");
}

// ---------------------------------------------------------------------------
// Derived per-observation quantities
// ---------------------------------------------------------------------------

/// Per-observation weights entering the information matrix and the
/// second-order expansion:
///   w = -D2 (dtheta/deta)^2
///   f = -(dtheta/deta)(d2theta/deta2) D2 - (dtheta/deta)^3 D3
///   g = -(dtheta/deta)(d2theta/deta2) D2
///   e = -(dtheta/deta)^3 D2'
struct FgeWeights {
    std::vector<double> w;
    std::vector<double> f;
    std::vector<double> g;
    std::vector<double> e;
};

inline FgeWeights fge_weights(const FamilyDescriptor& family,
                              const LinkDescriptor& link,
                              const std::vector<double>& eta, double phi) {
    if (!(phi > 0.0) || !std::isfinite(phi)) {
        throw domain_error("fge_weights: phi must be finite and positive");
    }
    const std::size_t n = eta.size();
    FgeWeights out;
    out.w.resize(n);
    out.f.resize(n);
    out.g.resize(n);
    out.e.resize(n);
    for (std::size_t l = 0; l < n; ++l) {
        const double th = link.theta_of_eta(eta[l]);
        if (!family.theta_domain.contains(th)) {
            throw domain_error("fge_weights: theta = " + std::to_string(th) +
                               " outside the domain of family '" + family.name +
                               "' at observation " + std::to_string(l + 1));
        }
        const double t1 = link.dtheta_deta(eta[l]);
        const double t2 = link.d2theta_deta2(eta[l]);
        const double d2 = family.d2(th, phi);
        const double d3 = family.d3(th, phi);
        const double d2p = family.d2_prime(th, phi);
        out.w[l] = -d2 * t1 * t1;
        out.g[l] = -t1 * t2 * d2;
        out.f[l] = out.g[l] - t1 * t1 * t1 * d3;
        out.e[l] = -t1 * t1 * t1 * d2p;
        if (!(out.w[l] > 0.0) || !std::isfinite(out.w[l])) {
            throw domain_error(
                "fge_weights: nonpositive information weight at observation " +
                std::to_string(l + 1));
        }
    }
    return out;
}

/// Log-density of one observation. Circular positions are wrapped first.
inline double log_density(const FamilyDescriptor& family, double y, double theta,
                          double phi) {
    if (!(phi > 0.0) || !std::isfinite(phi)) {
        throw domain_error("log_density: phi must be finite and positive");
    }
    if (family.is_circular()) theta = wrap_angle(theta);
    if (!support_contains(family.support, y)) {
        throw domain_error("log_density: response " + std::to_string(y) +
                           " outside the support of family '" + family.name + "'");
    }
    if (!family.theta_domain.contains(theta)) {
        throw domain_error("log_density: theta outside the domain of family '" +
                           family.name + "'");
    }
    return phi * family.t(y, theta) + family.c(y, phi);
}

} // namespace dml
