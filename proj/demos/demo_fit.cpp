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

// Library walkthrough: simulate a gamma regression with a log mean link,
// estimate it by maximum likelihood, and test whether the last coefficient
// is zero with the four classical statistics.

#include <cstdio>

#include "dml/sample.hpp"
#include "dml/sim.hpp"
#include "dml/stats.hpp"

int main() {
    const Eigen::Index n = 80;
    const auto& family = dml::builtin_family("gamma");
    const auto link = dml::builtin_link("mean-log", &family);
    const auto predictor = dml::builtin_predictor("linear");

    // Fixed design: intercept plus two uniform covariates.
    const Eigen::MatrixXd X = dml::random_design(n, 3, /*seed=*/2024);
    Eigen::VectorXd beta(3);
    beta << 0.4, 0.8, 0.0;  // the tested coefficient is truly zero
    const double phi = 3.0;

    // Draw responses at the chosen truth.
    dml::Philox gen(/*seed=*/7, /*stream=*/0);
    Eigen::VectorXd y(n);
    const Eigen::VectorXd eta = X * beta;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double theta = link.theta_of_eta(eta[i]);
        y[i] = dml::sample_response(family, gen, theta, phi);
    }

    // Maximum likelihood: coefficients by Fisher scoring, precision by a
    // one-dimensional root solve. The two blocks are information-orthogonal.
    const dml::FitResult fit =
        dml::fit_model(family, link, predictor, X, y);
    std::printf("fitted in %d scoring iterations (precision: %d)\n",
                fit.iterations, fit.phi_iterations);
    for (Eigen::Index j = 0; j < fit.beta.size(); ++j) {
        std::printf("  beta%lld = %+.4f   (truth %+.4f)\n",
                    static_cast<long long>(j + 1), fit.beta[j], beta[j]);
    }
    std::printf("  phi   = %+.4f   (truth %+.4f)\n", fit.phi, phi);
    std::printf("  log-likelihood = %.6f\n\n", fit.loglik);

    // Null hypothesis: beta3 = 0 (position 2, zero-based).
    dml::SubsetSpec spec;
    spec.indices = {2};
    spec.null_values = Eigen::VectorXd::Zero(1);
    const dml::SubsetTestResult test =
        dml::subset_tests(family, link, predictor, X, y, spec);
    std::printf("H0: beta3 = 0   (df = %d)\n", test.tests.df);
    for (std::size_t s = 0; s < dml::test_names.size(); ++s) {
        std::printf("  %-16s  statistic = %7.4f   p = %.4f\n",
                    dml::test_names[s], test.tests.statistic[s],
                    test.tests.p_value[s]);
    }
    return 0;
}
