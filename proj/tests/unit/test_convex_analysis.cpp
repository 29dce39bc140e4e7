#include "rbsde/convex_analysis.hpp"
#include "rbsde/error.hpp"

#include <doctest.h>

#include <cmath>
#include <vector>

using namespace rbsde;

namespace {

// phi(y) = e^y - y - 1 on [-3, inf), minimum 0 at y = 0.
ConvexBarrier custom_barrier() {
    barrier::Custom c;
    c.value = [](double y) { return y < -3.0 ? kInf : std::exp(y) - y; };
    c.subgradient = [](double y) -> std::optional<Interval> {
        if (y < -3.0) return std::nullopt;
        const double g = std::exp(y) - 1.0;
        if (y == -3.0) return Interval{-kInf, g};
        return Interval{g, g};
    };
    c.domain_lower = -3.0;
    c.subgradient_bound = 2.0;
    return ConvexBarrier(c);
}

std::vector<ConvexBarrier> all_kinds() {
    return {ConvexBarrier::indicator(-0.5, 1.5), ConvexBarrier::quadratic(2.0), ConvexBarrier::hinge(1.5, 0.25),
            custom_barrier()};
}

// argmin of (n/2)(x-y)^2 + phi(y) by scanning a fine grid, then a local refinement.
std::pair<double, double> grid_prox(const ConvexBarrier& b, double n, double x) {
    auto obj = [&](double y) { return 0.5 * n * (x - y) * (x - y) + b.value(y); };
    double best = kInf, arg = 0.0;
    for (int i = 0; i <= 200000; ++i) {
        const double y = x - 10.0 + 20.0 * i / 200000.0;
        const double v = obj(y);
        if (v < best) {
            best = v;
            arg = y;
        }
    }
    double lo = arg - 1e-4, hi = arg + 1e-4;
    for (int it = 0; it < 200; ++it) {
        const double a = lo + (hi - lo) / 3.0, c = hi - (hi - lo) / 3.0;
        if (obj(a) <= obj(c)) hi = c; else lo = a;
    }
    arg = 0.5 * (lo + hi);
    return {arg, std::min(best, obj(arg))};
}

std::vector<double> grid(double lo, double hi, int points) {
    std::vector<double> g(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i) g[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (points - 1);
    return g;
}

}  // namespace

TEST_CASE("resolvent closed forms") {
    CHECK(resolvent(ConvexBarrier::indicator(0.0), 5.0, -2.0) == 0.0);
    CHECK(resolvent(ConvexBarrier::quadratic(1.0), 3.0, 4.0) == doctest::Approx(3.0));
    const auto h = ConvexBarrier::hinge(1.0, 0.0);
    for (double n : {1.0, 4.0, 50.0}) {
        const double x = -1.0;
        CHECK(resolvent(h, n, x) == doctest::Approx(std::min(0.0, x + 1.0 / n)).epsilon(1e-12));
        CHECK(resolvent(h, n, x) == doctest::Approx(grid_prox(h, n, x).first).epsilon(1e-6));
    }
}

TEST_CASE("yosida and envelope closed forms") {
    const auto ind = ConvexBarrier::indicator(0.0);
    CHECK(YosidaLevel(ind, 4.0).yosida(-2.0) == doctest::Approx(-8.0));
    for (double n : {1.0, 8.0, 1024.0}) CHECK(YosidaLevel(ind, n).yosida(3.0) == 0.0);
    CHECK(YosidaLevel(ConvexBarrier::quadratic(1.0), 3.0).yosida(4.0) == doctest::Approx(3.0));
    CHECK(YosidaLevel(ind, 2.0).envelope(-1.0) == doctest::Approx(1.0));
    CHECK(YosidaLevel(ind, 2.0).envelope(5.0) == 0.0);
    const YosidaLevel q(ConvexBarrier::quadratic(1.0), 1.0);
    CHECK(q.envelope(2.0) == doctest::Approx(1.0));
    CHECK(q.envelope(2.0) == doctest::Approx(grid_prox(ConvexBarrier::quadratic(1.0), 1.0, 2.0).second).epsilon(1e-8));
    CHECK(envelope(q, 2.0) == q.envelope(2.0));
    CHECK(yosida(q, 2.0) == q.yosida(2.0));
}

TEST_CASE("numeric resolvent matches brute-force minimization") {
    for (const auto& b : all_kinds()) {
        for (double n : {0.5, 3.0, 40.0}) {
            for (double x : {-4.0, -1.0, 0.1, 0.9, 2.5}) {
                const auto [arg, val] = grid_prox(b, n, x);
                const YosidaLevel lv(b, n);
                CHECK(lv.resolvent(x) == doctest::Approx(arg).epsilon(1e-6));
                CHECK(lv.envelope(x) == doctest::Approx(val).epsilon(1e-8));
            }
        }
    }
}

TEST_CASE("custom barrier resolvent reaches the stated tolerance") {
    // A custom wrapper around kappa y^2 / 2 has the closed-form prox n x / (n + kappa).
    barrier::Custom c;
    c.value = [](double y) { return 1.5 * y * y; };
    c.subgradient = [](double y) -> std::optional<Interval> { return Interval{3.0 * y, 3.0 * y}; };
    const ConvexBarrier b(c);
    for (double n : {1.0, 64.0, 1024.0}) {
        for (double x : {-7.0, -0.3, 0.0, 2.2, 40.0}) {
            CHECK(std::abs(resolvent(b, n, x) - n * x / (n + 3.0)) <= 2e-12 * std::max(1.0, std::abs(x)));
        }
    }
}

TEST_CASE("barrier normalization") {
    const auto b = custom_barrier();
    CHECK(b.shift() == doctest::Approx(1.0));
    CHECK(b.value(0.0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(b.value(-4.0) == kInf);
    CHECK(b.domain().lo == -3.0);
    CHECK(ConvexBarrier::indicator(0.0, 2.0).value(1.0) == 0.0);
    CHECK(ConvexBarrier::indicator(0.0, 2.0).value(2.5) == kInf);
    CHECK(ConvexBarrier::zero().is_zero());
    CHECK_THROWS_AS(ConvexBarrier::indicator(1.0, 0.0), InvalidBarrier);
    CHECK_THROWS_AS(ConvexBarrier::quadratic(-1.0), InvalidBarrier);
    CHECK_THROWS_AS(ConvexBarrier::hinge(-1.0, 0.0), InvalidBarrier);
}

TEST_CASE("Yosida map is monotone, n-Lipschitz and in the subdifferential") {
    const auto xs = grid(-5.0, 5.0, 1000);
    const auto zs = grid(-5.0, 5.0, 201);
    for (const auto& b : all_kinds()) {
        for (double n : {1.0, 16.0, 1024.0}) {
            const YosidaLevel lv(b, n);
            std::vector<double> a(xs.size()), j(xs.size());
            for (std::size_t i = 0; i < xs.size(); ++i) {
                a[i] = lv.yosida(xs[i]);
                j[i] = lv.resolvent(xs[i]);
            }
            bool monotone = true, lipschitz = true, subgradient = true, membership = true;
            for (std::size_t i = 1; i < xs.size(); ++i) {
                monotone = monotone && a[i - 1] <= a[i] + 1e-9;
                lipschitz = lipschitz && std::abs(a[i] - a[i - 1]) <= n * (xs[i] - xs[i - 1]) * (1.0 + 1e-9) + 1e-9;
            }
            for (std::size_t i = 0; i < xs.size(); i += 7) {
                const auto g = b.subgradient(j[i]);
                membership = membership && g && g->lo - 1e-6 * n <= a[i] && a[i] <= g->hi + 1e-6 * n;
                for (double z : zs) {
                    const double lhs = b.value(z);
                    if (!std::isfinite(lhs)) continue;
                    subgradient = subgradient && lhs >= b.value(j[i]) + a[i] * (z - j[i]) - 1e-7 * (1.0 + n);
                }
            }
            CHECK(monotone);
            CHECK(lipschitz);
            CHECK(subgradient);
            CHECK(membership);
        }
    }
}

TEST_CASE("envelope derivative equals the Yosida map") {
    const auto xs = grid(-3.0, 3.0, 1000);
    for (const auto& b : all_kinds()) {
        const YosidaLevel lv(b, 5.0);
        for (double h : {1e-4, 1e-5}) {
            double worst = 0.0;
            for (double x : xs) {
                const double fd = (lv.envelope(x + h) - lv.envelope(x - h)) / (2.0 * h);
                worst = std::max(worst, std::abs(fd - lv.yosida(x)));
            }
            // O(h^2) away from kinks of A_n; kinks contribute O(n h).
            CHECK(worst <= 5.0 * 5.0 * h + 1e-6);
        }
    }
}

TEST_CASE("envelope increases to the barrier") {
    for (const auto& b : all_kinds()) {
        for (double x : grid(-2.0, 2.0, 41)) {
            double prev = -1.0;
            for (double n = 1.0; n <= 1024.0; n *= 2.0) {
                const double e = YosidaLevel(b, n).envelope(x);
                CHECK(e >= prev - 1e-12);
                CHECK(e <= b.value(x) + 1e-12);
                prev = e;
            }
            if (std::isfinite(b.value(x))) CHECK(prev == doctest::Approx(b.value(x)).epsilon(1e-2).scale(1.0));
        }
    }
}

TEST_CASE("coercivity holds with an n-independent constant") {
    const auto b = ConvexBarrier::indicator(0.0);
    const double a = 1.0;
    const double radius = 1.0;
    double worst = 0.0;
    for (double n = 2.0; n <= 1024.0; n *= 2.0) {
        const YosidaLevel lv(b, n);
        double c_needed = 0.0;
        for (double z : grid(-10.0, 10.0, 2001)) {
            const double an = lv.yosida(z);
            const double gap = radius * std::abs(an) - an * (z - a);
            c_needed = std::max(c_needed, gap / (std::abs(z) + 1.0));
        }
        if (n == 2.0) worst = c_needed;
        CHECK(c_needed <= worst + 1e-12);
    }
    CHECK(worst < 1.0);
}

TEST_CASE("implicit step solves y + dt A_n(y) = x") {
    for (const auto& b : all_kinds()) {
        for (double n : {1.0, 100.0, 1024.0}) {
            const YosidaLevel lv(b, n);
            for (double dt : {0.01, 0.1}) {
                for (double x : grid(-4.0, 4.0, 33)) {
                    const double y = lv.implicit_step(dt, x);
                    CHECK(y + dt * lv.yosida(y) == doctest::Approx(x).epsilon(1e-9).scale(1.0));
                }
            }
        }
    }
}

TEST_CASE("graph test pairs") {
    const std::vector<double> t{0.0, 0.5, 1.0};
    const auto ind = ConvexBarrier::indicator(0.0);
    auto p = graph_test_pair(ind, t);
    CHECK(p.alpha.size() == 3);
    CHECK(p.alpha[0] == 1.0);
    CHECK(p.beta[2] == 0.0);
    p = graph_test_pair(ind, t, 0.0, -1.0);
    CHECK(p.beta[1] == -1.0);
    p = graph_test_pair(ConvexBarrier::quadratic(1.0), t, 2.0);
    CHECK(p.beta[0] == doctest::Approx(2.0));
    CHECK_NOTHROW(graph_test_pair(ConvexBarrier::quadratic(1.0), t, 2.0, 2.0));
    CHECK_THROWS_AS(graph_test_pair(ind, t, -1.0), EmptySubdifferential);
    CHECK_THROWS_AS(graph_test_pair(ind, t, -1.0, 0.0), EmptySubdifferential);
    CHECK_THROWS_AS(graph_test_pair(ind, t, 0.0, 1.0), std::invalid_argument);
}

TEST_CASE("non-monotone callback is reported") {
    barrier::Custom c;
    c.value = [](double y) { return -y * y; };
    c.subgradient = [](double y) -> std::optional<Interval> { return Interval{-2.0 * y, -2.0 * y}; };
    CHECK_THROWS(ConvexBarrier(c));
}
