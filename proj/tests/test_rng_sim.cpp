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

// Generator known-answer vectors, stream composition, uniform-law checks,
// exact-sampler moment validation against numeric integration of each
// family density, and the Monte Carlo engine's determinism and size
// behaviour.

#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <set>

#include "dml/sim.hpp"
#include "oracle_helpers.hpp"

TEST_CASE("block cipher known-answer vectors", "[rng]") {
    using A4 = std::array<std::uint32_t, 4>;
    using A2 = std::array<std::uint32_t, 2>;
    CHECK(dml::philox4x32(A4{0, 0, 0, 0}, A2{0, 0}) ==
          A4{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
    CHECK(dml::philox4x32(
              A4{0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
              A2{0xffffffffu, 0xffffffffu}) ==
          A4{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
    CHECK(dml::philox4x32(
              A4{0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
              A2{0xa4093822u, 0x299f31d0u}) ==
          A4{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("stream words compose counter blocks in order", "[rng]") {
    const std::uint64_t seed = 0x0123456789abcdefull;
    const std::uint64_t stream = 0xfedcba9876543210ull;
    dml::Philox gen(seed, stream);
    const std::array<std::uint32_t, 2> key{
        static_cast<std::uint32_t>(seed),
        static_cast<std::uint32_t>(seed >> 32)};
    for (std::uint64_t block = 0; block < 4; ++block) {
        const auto out = dml::philox4x32(
            {static_cast<std::uint32_t>(stream),
             static_cast<std::uint32_t>(stream >> 32),
             static_cast<std::uint32_t>(block),
             static_cast<std::uint32_t>(block >> 32)},
            key);
        const std::uint64_t lo = static_cast<std::uint64_t>(out[0]) |
                                 (static_cast<std::uint64_t>(out[1]) << 32);
        const std::uint64_t hi = static_cast<std::uint64_t>(out[2]) |
                                 (static_cast<std::uint64_t>(out[3]) << 32);
        CHECK(gen.next_u64() == lo);
        CHECK(gen.next_u64() == hi);
    }

    // Distinct streams and distinct seeds decorrelate immediately.
    dml::Philox a(1, 0), b(1, 1), c(2, 0);
    CHECK(a.next_u64() != b.next_u64());
    dml::Philox a2(1, 0);
    CHECK(a2.next_u64() != c.next_u64());
}

TEST_CASE("uniform draws lie strictly inside the unit interval", "[rng]") {
    dml::Philox gen(2026, 11);
    const int n = 200000;
    double sum = 0.0, sum2 = 0.0, mn = 1.0, mx = 0.0;
    for (int i = 0; i < n; ++i) {
        const double u = gen.uniform();
        REQUIRE(u > 0.0);
        REQUIRE(u < 1.0);
        sum += u;
        sum2 += u * u;
        mn = std::min(mn, u);
        mx = std::max(mx, u);
    }
    const double mean = sum / n;
    const double var = sum2 / n - mean * mean;
    // 5-sigma bands: sd(mean) = 1/sqrt(12 n).
    CHECK(std::abs(mean - 0.5) < 5.0 / std::sqrt(12.0 * n));
    CHECK(var == Catch::Approx(1.0 / 12.0).epsilon(0.02));
    CHECK(mn < 2e-4);
    CHECK(mx > 1.0 - 2e-4);
}

namespace {

struct MomentOracle {
    double mean, var;
};

// Exact mean and variance of probe(Y) under the family at (theta, phi) by
// quadrature of its own density.  The probe lets heavy-tailed families be
// checked through a transform with finite fourth moments.
MomentOracle integrate_moments(const dml::FamilyDescriptor& fam, double theta,
                               double phi, bool positive_support,
                               double (*probe)(double)) {
    const auto dens = [&](double y) {
        // Quadrature probes beyond the support (underflow to 0, infinities):
        // the density is simply zero there.
        if (!std::isfinite(y) || (positive_support && !(y > 0.0))) return 0.0;
        return std::exp(dml::log_density(fam, y, theta, phi));
    };
    double mass, m1, m2;
    if (positive_support) {
        // Integrate in log scale: smooth through any integrable power
        // singularity at the origin (e.g. gamma with shape below one).
        const auto logscale = [&](auto&& weight) {
            return oracle::integrate_real_line([&](double s) {
                const double y = std::exp(s);
                return weight(y) * dens(y) * y;
            });
        };
        mass = logscale([](double) { return 1.0; });
        m1 = logscale([&](double y) { return probe(y); });
        m2 = logscale([&](double y) { return probe(y) * probe(y); });
    } else {
        mass = oracle::integrate_real_line(dens);
        m1 = oracle::integrate_real_line(
            [&](double y) { return probe(y) * dens(y); });
        m2 = oracle::integrate_real_line(
            [&](double y) { return probe(y) * probe(y) * dens(y); });
    }
    REQUIRE(mass == Catch::Approx(1.0).epsilon(1e-8));
    return {m1, m2 - m1 * m1};
}

double identity_probe(double y) { return y; }
double reciprocal_probe(double y) { return 1.0 / y; }

}  // namespace

TEST_CASE("samplers reproduce the family moments", "[rng][sample]") {
    struct Case {
        const char* family;
        double theta, phi;
        bool positive;
        // Transform with finite fourth moment under the case's law, so the
        // sample-variance band below is statistically valid.
        double (*probe)(double) = identity_probe;
    };
    const Case cases[] = {
        {"normal", 0.7, 2.2, false, identity_probe},
        {"gamma", -0.8, 2.3, true, identity_probe},
        {"gamma", -1.1, 0.6, true, identity_probe},  // shape below one
        // Inverse-gamma law: raw moments above the shape diverge, but the
        // reciprocal is gamma with every moment finite.
        {"reciprocal-gamma", -0.7, 2.6, true, reciprocal_probe},
        {"log-gamma", 0.3, 2.0, false, identity_probe},
        {"inverse-gaussian", -0.5, 1.7, true, identity_probe},
    };
    const int n = 200000;
    for (const auto& c : cases) {
        INFO(c.family << " theta=" << c.theta << " phi=" << c.phi);
        const auto& fam = dml::builtin_family(c.family);
        const MomentOracle exact =
            integrate_moments(fam, c.theta, c.phi, c.positive, c.probe);
        dml::Philox gen(99, 1);
        double sum = 0.0, sum2 = 0.0;
        for (int i = 0; i < n; ++i) {
            const double z =
                c.probe(dml::sample_response(fam, gen, c.theta, c.phi));
            sum += z;
            sum2 += z * z;
        }
        const double mean = sum / n;
        const double var = sum2 / n - mean * mean;
        const double se_mean = std::sqrt(exact.var / n);
        CHECK(std::abs(mean - exact.mean) < 5.0 * se_mean);
        CHECK(var == Catch::Approx(exact.var).epsilon(0.05));
    }
}

TEST_CASE("circular sampler reproduces the trigonometric moments",
          "[rng][sample]") {
    const auto& fam = dml::builtin_family("von-mises");
    const double theta = 0.6;
    for (const double phi : {0.4, 1.8, 6.0}) {
        INFO("phi=" << phi);
        const auto dens = [&](double y) {
            // The support convention is (-pi, pi]; the quadrature endpoint
            // -pi is the same circle point as pi.
            if (y <= -std::numbers::pi) y = std::numbers::pi;
            return std::exp(dml::log_density(fam, y, theta, phi));
        };
        const double mass = oracle::integrate(
            dens, -std::numbers::pi, std::numbers::pi);
        REQUIRE(mass == Catch::Approx(1.0).epsilon(1e-8));
        const double exact_cos =
            oracle::integrate([&](double y) { return std::cos(y) * dens(y); },
                              -std::numbers::pi, std::numbers::pi);
        const double exact_sin =
            oracle::integrate([&](double y) { return std::sin(y) * dens(y); },
                              -std::numbers::pi, std::numbers::pi);

        dml::Philox gen(7, 3);
        const int n = 200000;
        double sc = 0.0, ss = 0.0;
        for (int i = 0; i < n; ++i) {
            const double y = dml::sample_response(fam, gen, theta, phi);
            REQUIRE(y > -std::numbers::pi);
            REQUIRE(y <= std::numbers::pi);
            sc += std::cos(y);
            ss += std::sin(y);
        }
        // Component variances are bounded by 1/2; use generous 5-sigma.
        const double band = 5.0 / std::sqrt(2.0 * n);
        CHECK(std::abs(sc / n - exact_cos) < band);
        CHECK(std::abs(ss / n - exact_sin) < band);
    }
}

TEST_CASE("sampler error contract", "[rng][sample]") {
    dml::Philox gen(1, 1);
    const auto& gamma = dml::builtin_family("gamma");
    CHECK_THROWS_AS(dml::sample_response(gamma, gen, 0.5, 1.0),
                    dml::contract_error);
    CHECK_THROWS_AS(dml::sample_response(gamma, gen, -0.5, -1.0),
                    dml::contract_error);
    const auto& rig = dml::builtin_family("reciprocal-inverse-gaussian");
    CHECK_THROWS_AS(dml::sample_response(rig, gen, 1.0, 1.0),
                    dml::unsupported_error);
    const auto& ghs = dml::builtin_family("generalized-hyperbolic-secant");
    CHECK_THROWS_AS(dml::sample_response(ghs, gen, 0.0, 1.0),
                    dml::unsupported_error);
}

TEST_CASE("covariate designs are reproducible and well formed", "[sim]") {
    const Eigen::MatrixXd X = dml::random_design(25, 4, 42);
    CHECK(X.rows() == 25);
    CHECK(X.cols() == 4);
    CHECK((X.col(0).array() == 1.0).all());
    CHECK((X.rightCols(3).array() > 0.0).all());
    CHECK((X.rightCols(3).array() < 1.0).all());
    const Eigen::MatrixXd same = dml::random_design(25, 4, 42);
    CHECK(X == same);
    const Eigen::MatrixXd other = dml::random_design(25, 4, 43);
    CHECK(X != other);
    CHECK_THROWS_AS(dml::random_design(0, 2, 1), dml::contract_error);
}

TEST_CASE("thread count resolution", "[sim]") {
    CHECK(dml::resolve_thread_count(5) == 5);
    ::setenv("DM_TESTLAB_THREADS", "3", 1);
    CHECK(dml::resolve_thread_count(0) == 3);
    CHECK(dml::resolve_thread_count(2) == 2);  // explicit request wins
    ::setenv("DM_TESTLAB_THREADS", "zero", 1);
    CHECK(dml::resolve_thread_count(0) >= 1);  // garbage falls through
    ::unsetenv("DM_TESTLAB_THREADS");
    CHECK(dml::resolve_thread_count(0) >= 1);
}

TEST_CASE("simulation reports are identical for any thread count", "[sim]") {
    dml::SimConfig config;
    config.family = "von-mises";
    config.link = "tan-half";
    config.X = dml::random_design(25, 3, 7);
    config.beta = Eigen::Vector3d(1.0, 1.0, 0.0);
    config.phi = 2.0;
    config.test_indices = {2};
    config.null_values = Eigen::VectorXd::Zero(1);
    config.replications = 300;
    config.seed = 31;

    config.threads = 1;
    const dml::SimReport one = dml::run_simulation(config);
    config.threads = 4;
    const dml::SimReport four = dml::run_simulation(config);

    REQUIRE(one.statistics.size() == four.statistics.size());
    for (std::size_t r = 0; r < one.statistics.size(); ++r) {
        for (int s = 0; s < 4; ++s) {
            CHECK(one.statistics[r][static_cast<std::size_t>(s)] ==
                  four.statistics[r][static_cast<std::size_t>(s)]);
        }
    }
    CHECK(one.failures == four.failures);
    for (int s = 0; s < 4; ++s) {
        CHECK(one.mean[static_cast<std::size_t>(s)] ==
              four.mean[static_cast<std::size_t>(s)]);
        CHECK(one.variance[static_cast<std::size_t>(s)] ==
              four.variance[static_cast<std::size_t>(s)]);
        CHECK(one.rejection[static_cast<std::size_t>(s)] ==
              four.rejection[static_cast<std::size_t>(s)]);
    }
}

TEST_CASE("null rejection rates approach the nominal levels", "[sim][slow]") {
    dml::SimConfig config;
    config.family = "normal";
    config.link = "identity";
    config.X = dml::random_design(80, 3, 11);
    config.beta = Eigen::Vector3d(0.5, -0.3, 0.0);
    config.phi = 1.4;
    config.test_indices = {2};
    config.null_values = Eigen::VectorXd::Zero(1);
    config.replications = 4000;
    config.seed = 5;

    const dml::SimReport rep = dml::run_simulation(config);
    REQUIRE(rep.reliable);
    CHECK(rep.failures == 0);
    CHECK(rep.df == 1);
    // MC standard error at 10% with 4000 reps is about 0.47 pp; allow 4 sigma
    // plus a little finite-sample distortion.
    for (int s = 0; s < 4; ++s) {
        INFO("statistic " << dml::test_names[static_cast<std::size_t>(s)]);
        CHECK(std::abs(rep.rejection[static_cast<std::size_t>(s)][0] - 0.10) <
              0.025);
        CHECK(std::abs(rep.rejection[static_cast<std::size_t>(s)][1] - 0.05) <
              0.02);
        // Statistic means sit near the chi-square df.
        CHECK(rep.mean[static_cast<std::size_t>(s)] ==
              Catch::Approx(1.0).margin(0.25));
    }

    SECTION("precision hypothesis at the true value") {
        dml::SimConfig pc = config;
        pc.test_indices.clear();
        pc.null_values.resize(0);
        pc.precision_null = pc.phi;
        pc.replications = 4000;
        const dml::SimReport prec = dml::run_simulation(pc);
        REQUIRE(prec.reliable);
        CHECK(prec.df == 1);
        // Likelihood-ratio and gradient run genuinely liberal for precision
        // hypotheses at this n (sizes near 12-13%), so the sanity band is
        // wider than for the coefficient tests.
        for (int s = 0; s < 4; ++s) {
            INFO("statistic " << dml::test_names[static_cast<std::size_t>(s)]);
            CHECK(std::abs(prec.rejection[static_cast<std::size_t>(s)][0] -
                           0.10) < 0.04);
        }
        // The Wald and score statistics share one closed form for this
        // family, so their whole empirical laws coincide.
        CHECK(prec.rejection[1] == prec.rejection[2]);
        CHECK(prec.mean[1] == prec.mean[2]);
    }
}

TEST_CASE("simulation configuration contract", "[sim]") {
    dml::SimConfig config;
    config.family = "normal";
    config.link = "identity";
    config.X = dml::random_design(20, 2, 1);
    config.beta = Eigen::Vector2d(0.2, 0.1);
    config.phi = 1.0;
    config.replications = 10;

    // Neither mode selected.
    CHECK_THROWS_AS(dml::run_simulation(config), dml::contract_error);
    // Both modes selected.
    config.test_indices = {1};
    config.null_values = Eigen::VectorXd::Zero(1);
    config.precision_null = 1.0;
    CHECK_THROWS_AS(dml::run_simulation(config), dml::contract_error);
    config.precision_null.reset();

    dml::SimConfig bad = config;
    bad.beta = Eigen::Vector3d(0.1, 0.2, 0.3);
    CHECK_THROWS_AS(dml::run_simulation(bad), dml::contract_error);
    bad = config;
    bad.levels = {0.0};
    CHECK_THROWS_AS(dml::run_simulation(bad), dml::contract_error);
    bad = config;
    bad.replications = 0;
    CHECK_THROWS_AS(dml::run_simulation(bad), dml::contract_error);
    bad = config;
    bad.phi = -2.0;
    CHECK_THROWS_AS(dml::run_simulation(bad), dml::contract_error);

    // A family without a sampler fails every replication and the report
    // says so instead of pretending.
    dml::SimConfig rig = config;
    rig.family = "reciprocal-inverse-gaussian";
    rig.link = "log";
    rig.replications = 5;
    const dml::SimReport report = dml::run_simulation(rig);
    CHECK(report.failures == 5);
    CHECK(report.replications == 0);
    CHECK_FALSE(report.reliable);
}
