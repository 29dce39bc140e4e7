#include "rbsde/error.hpp"
#include "rbsde/regression.hpp"

#include <doctest.h>

#include <array>
#include <cmath>

using namespace rbsde;

namespace {

PathBundle bundle_for(const LevyModel& m, int steps, std::size_t paths, std::uint64_t seed) {
    return simulate(m, build_basis(moments(m, 4), 4), GridSpec(steps, 1.0), paths, seed, 1);
}

}  // namespace

TEST_CASE("feature counts") {
    RegressionBasis rb;
    CHECK(rb.feature_count() == 5);
    rb.hinge_lower = 0.0;
    CHECK(rb.feature_count() == 6);
    rb.hinge_upper = 1.0;
    CHECK(rb.feature_count() == 7);
}

TEST_CASE("polynomial targets are reproduced exactly") {
    const auto bundle = bundle_for(make_model(0.0, 1.0, {}), 5, 5000, 3);
    const RegressionPlan plan(bundle, RegressionBasis{}, 1);
    CHECK(plan.feature_count(0) == 1);
    for (int k = 1; k < 5; ++k) {
        CHECK(plan.feature_count(k) == 5);
        std::vector<double> target(bundle.paths());
        for (std::size_t m = 0; m < target.size(); ++m) {
            const double x = bundle.state(k, m);
            target[m] = 1.0 - 2.0 * x + 0.5 * x * x * x + 3.0 * bundle.h_increment(k, m, 1) * x;
        }
        const auto coef = plan.fit(k, target);
        const int p = plan.feature_count(k);
        REQUIRE(coef.size() == 2 * p);
        std::array<double, kMaxFeatures> phi{};
        double worst = 0.0;
        for (std::size_t m = 0; m < target.size(); m += 11) {
            const double x = bundle.state(k, m);
            plan.features(k, x, phi);
            double yhat = 0.0, z = 0.0;
            for (int a = 0; a < p; ++a) {
                yhat += coef(a) * phi[static_cast<std::size_t>(a)];
                z += coef(p + a) * phi[static_cast<std::size_t>(a)];
            }
            worst = std::max(worst, std::abs(yhat - (1.0 - 2.0 * x + 0.5 * x * x * x)));
            worst = std::max(worst, std::abs(z - 3.0 * x));
        }
        CHECK(worst <= 1e-8);
    }
}

TEST_CASE("conditional expectation of a future value") {
    // E[L_{k+1}^2 | L_k] = L_k^2 + dt for Brownian motion.
    const auto bundle = bundle_for(make_model(0.0, 1.0, {}), 10, 50000, 4);
    const RegressionPlan plan(bundle, RegressionBasis{2, std::nullopt, std::nullopt}, 0);
    const int k = 5;
    std::vector<double> target(bundle.paths());
    for (std::size_t m = 0; m < target.size(); ++m) target[m] = std::pow(bundle.state(k + 1, m), 2);
    const auto coef = plan.fit(k, target);
    std::array<double, kMaxFeatures> phi{};
    for (double x : {-1.0, 0.0, 0.7}) {
        plan.features(k, x, phi);
        double yhat = 0.0, z = 0.0;
        for (int a = 0; a < 3; ++a) {
            yhat += coef(a) * phi[static_cast<std::size_t>(a)];
            z += coef(3 + a) * phi[static_cast<std::size_t>(a)];
        }
        CHECK(yhat == doctest::Approx(x * x + 0.1).epsilon(1e-2).scale(1.0));
        CHECK(z == doctest::Approx(2.0 * x).epsilon(2e-2).scale(1.0));
    }
}

TEST_CASE("conditioning diagnostics") {
    const auto bundle = bundle_for(make_model(0.0, 1.0, {}), 4, 4000, 5);
    const RegressionPlan plan(bundle, RegressionBasis{4, 0.0, std::nullopt}, 1);
    for (int k = 1; k < 4; ++k) {
        CHECK(plan.condition_number(k) >= 1.0);
        CHECK(std::isfinite(plan.condition_number(k)));
    }
    CHECK_THROWS(RegressionPlan(bundle, RegressionBasis{20, std::nullopt, std::nullopt}, 1));
}
