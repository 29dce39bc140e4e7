#include "rbsde/error.hpp"
#include "rbsde/pdii_fd_oracle.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace rbsde;

namespace {

TeugelsBasis basis_for(const LevyModel& m, int K) { return build_basis(moments(m, K), K); }

DriverSpec with_terminal(DriverSpec d, const std::string& kind, double strike = 0.0) {
    set_terminal(d, kind, strike);
    return d;
}

DriverSpec obstacle_driver() { return with_terminal(linear_y_driver(-0.5, 0.0), "positive_part"); }

double expected_increment(const LevyModel& m) {
    double e = m.drift();
    for (const auto& a : m.atoms()) {
        if (std::abs(a.location) >= 1.0) e += a.rate * a.location;
    }
    return e;
}

}  // namespace

TEST_CASE("linear terminal is propagated exactly") {
    for (const auto& m : {make_model(0.3, 0.05, {}), make_model(-0.2, 0.7, {}),
                          make_model(0.1, 0.5, {{1.5, 0.4}, {-0.5, 1.0}, {0.25, 2.0}})}) {
        FdGridParams g;
        g.x_min = -20.0;
        g.x_max = 20.0;
        g.dx = 0.05;
        g.dtau = 2e-3;
        g.max_extrapolated_share = 0.05;
        const auto s = solve_pdii(m, basis_for(m, 2), ConvexBarrier::zero(), with_terminal(zero_driver(), "identity"),
                                  1.0, g);
        const double e = expected_increment(m);
        const auto& times = s.times();
        double worst = 0.0;
        for (std::size_t q = 0; q < times.size(); q += 50) {
            const auto& row = s.row(q);
            for (std::size_t i = 0; i < s.nodes(); ++i) {
                worst = std::max(worst, std::abs(row[i] - (s.node(i) + (m.horizon() - times[q]) * e)));
            }
        }
        CHECK(worst <= 1e-11);
    }
}

TEST_CASE("heat equation with a quadratic terminal") {
    const auto m = make_model(0.0, 1.0, {});
    FdGridParams g;
    g.x_min = -8.0;
    g.x_max = 8.0;
    g.dx = 0.02;
    g.dtau = 1e-3;
    const auto s = solve_pdii(m, basis_for(m, 1), ConvexBarrier::zero(), with_terminal(zero_driver(), "square"), 1.0, g);
    double worst = 0.0;
    for (std::size_t q = 0; q < s.times().size(); q += 50) {
        for (std::size_t i = 0; i < s.nodes(); ++i) {
            const double x = s.node(i);
            if (std::abs(x) > 2.0) continue;
            worst = std::max(worst, std::abs(s.row(q)[i] - (x * x + 1.0 - s.times()[q])));
        }
    }
    CHECK(worst <= 1e-9);
}

TEST_CASE("grid validation") {
    const auto m = make_model(2.0, 0.0, {{3.0, 1.0}});
    FdGridParams g;
    g.x_min = -40.0;
    g.x_max = 40.0;
    g.dx = 0.01;
    g.dtau = 0.01;
    CHECK_THROWS_AS(solve_pdii(m, basis_for(m, 1), ConvexBarrier::zero(), with_terminal(zero_driver(), "identity"), 1.0, g),
                    CflViolation);
    g.dx = 0.1;
    g.dtau = 1e-3;
    g.x_min = -4.0;
    g.x_max = 4.0;
    CHECK_THROWS_AS(solve_pdii(m, basis_for(m, 1), ConvexBarrier::zero(), with_terminal(zero_driver(), "identity"), 1.0, g),
                    BoxTooSmall);
    g.x_min = -400.0;
    g.x_max = 400.0;
    CHECK_NOTHROW(solve_pdii(m, basis_for(m, 1), ConvexBarrier::zero(), with_terminal(zero_driver(), "identity"), 1.0, g));
}

TEST_CASE("penalized surfaces under a lower obstacle") {
    const auto m = make_model(0.0, 1.0, {});
    const auto bar = ConvexBarrier::indicator(0.0);
    FdGridParams g;
    g.x_min = -6.0;
    g.x_max = 6.0;
    g.dx = 0.02;
    g.dtau = 1e-3;
    std::vector<PdiiSurface> surfaces;
    for (double n : {4.0, 32.0, 256.0}) surfaces.push_back(solve_pdii(m, basis_for(m, 1), bar, obstacle_driver(), n, g));

    const auto& last = surfaces[0].row(surfaces[0].times().size() - 1);
    for (std::size_t i = 0; i < last.size(); ++i) CHECK(last[i] == std::max(surfaces[0].node(i), 0.0));

    for (std::size_t s = 1; s < surfaces.size(); ++s) {
        for (std::size_t q = 0; q < surfaces[s].times().size(); q += 100) {
            for (std::size_t i = 0; i < surfaces[s].nodes(); i += 7) {
                CHECK(surfaces[s].row(q)[i] >= surfaces[s - 1].row(q)[i] - 1e-14);
            }
        }
    }

    std::vector<double> undershoot;
    for (const auto& s : surfaces) {
        double lo = 0.0;
        for (std::size_t q = 0; q < s.times().size(); ++q) lo = std::min(lo, *std::min_element(s.row(q).begin(), s.row(q).end()));
        undershoot.push_back(-lo);
    }
    CHECK(undershoot[0] > undershoot[1]);
    CHECK(undershoot[1] > undershoot[2]);
    // f = -1/2 pushes below zero at rate at most 1/2 / n.
    for (std::size_t s = 0; s < surfaces.size(); ++s) CHECK(undershoot[s] <= 0.5 / surfaces[s].penalization() + 1e-12);
}

TEST_CASE("comparison under ordered terminals") {
    const auto m = make_model(0.1, 0.6, {{0.8, 0.7}, {-0.4, 1.2}});
    const auto bar = ConvexBarrier::indicator(-0.5, 1.5);
    FdGridParams g;
    g.x_min = -40.0;
    g.x_max = 40.0;
    g.dx = 0.04;
    g.dtau = 2e-3;
    auto lo = zero_driver();
    lo.terminal = [](double x) { return std::tanh(x); };
    auto hi = lo;
    hi.terminal = [](double x) { return std::tanh(x) + 0.2 * std::exp(-x * x); };
    const auto a = solve_pdii(m, basis_for(m, 2), bar, lo, 64.0, g);
    const auto b = solve_pdii(m, basis_for(m, 2), bar, hi, 64.0, g);
    for (std::size_t q = 0; q < a.times().size(); ++q) {
        for (std::size_t i = 0; i < a.nodes(); ++i) REQUIRE(a.row(q)[i] <= b.row(q)[i] + 1e-14);
    }
}

TEST_CASE("surface coefficients of a linear surface") {
    const auto m = make_model(0.0, 0.5, {{1.0, 1.0}, {-2.0, 0.5}});
    const auto basis = basis_for(m, 2);
    FdGridParams g;
    g.x_min = -30.0;
    g.x_max = 30.0;
    g.dx = 0.05;
    g.dtau = 2e-3;
    g.max_extrapolated_share = 0.05;
    const auto s = solve_pdii(m, basis, ConvexBarrier::zero(), with_terminal(zero_driver(), "identity"), 1.0, g);
    const auto z = surface_coefficients(s, m, basis, 0.3, 0.7);
    REQUIRE(z.size() == 2);
    CHECK(z[0] == doctest::Approx(std::sqrt(basis.moment_table().mu(0))).epsilon(1e-10));
    CHECK(std::abs(z[1]) <= 1e-10);
}

TEST_CASE("jump-sum identity") {
    SUBCASE("Poisson with c = y^2") {
        const auto m = make_model(0.0, 0.0, {{1.0, 1.0}});
        const auto bundle = simulate(m, basis_for(m, 1), GridSpec(50, 1.0), 4000, 3, 0);
        const auto rep = jump_sum_identity_check(bundle, [](double, double, double y) { return y * y; });
        CHECK(rep.rms_mismatch <= 1e-12 * std::max(1.0, rep.rms_lhs));
        CHECK(rep.rms_lhs > 0.5);
    }
    SUBCASE("two atoms, c depending on y only") {
        const auto m = make_model(0.0, 0.0, {{1.0, 0.8}, {-0.5, 1.5}});
        const auto bundle = simulate(m, basis_for(m, 2), GridSpec(50, 1.0), 4000, 4, 0);
        const auto rep = jump_sum_identity_check(bundle, [](double, double, double y) { return y * y * y + 2.0 * y; });
        CHECK(rep.rms_mismatch <= 1e-12 * std::max(1.0, rep.rms_lhs));
    }
    SUBCASE("c = 0") {
        const auto m = make_model(0.0, 0.3, {{1.0, 0.8}, {-0.5, 1.5}});
        const auto bundle = simulate(m, basis_for(m, 2), GridSpec(20, 1.0), 1000, 5, 0);
        const auto rep = jump_sum_identity_check(bundle, [](double, double, double) { return 0.0; });
        CHECK(rep.rms_mismatch == 0.0);
        CHECK(rep.c_scale == 0.0);
    }
    SUBCASE("Brownian surface") {
        const auto m = make_model(0.0, 1.0, {});
        FdGridParams g;
        g.dx = 0.05;
        g.dtau = 2e-3;
        const auto s = solve_pdii(m, basis_for(m, 1), ConvexBarrier::indicator(0.0), obstacle_driver(), 16.0, g);
        const auto bundle = simulate(m, basis_for(m, 1), GridSpec(20, 1.0), 1000, 6, 0);
        CHECK(jump_sum_identity_check(bundle, s).rms_mismatch == 0.0);
    }
    SUBCASE("two atoms, state-dependent surface") {
        const auto m = make_model(0.0, 0.0, {{1.0, 0.8}, {-0.5, 1.5}});
        FdGridParams g;
        g.x_min = -40.0;
        g.x_max = 40.0;
        g.dx = 0.05;
        g.dtau = 2e-3;
        const auto s = solve_pdii(m, basis_for(m, 2), ConvexBarrier::indicator(0.0),
                                  with_terminal(zero_driver(), "softplus"), 16.0, g);
        const int N = 100;
        const auto bundle = simulate(m, basis_for(m, 2), GridSpec(N, 1.0), 4000, 7, 0);
        const auto rep = jump_sum_identity_check(bundle, s);
        CHECK(rep.c_scale > 0.0);
        CHECK(rep.rms_mismatch <= 3.0 * std::sqrt(1.0 / N) * rep.c_scale);
    }
}
