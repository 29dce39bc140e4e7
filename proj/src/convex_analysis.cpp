#include "rbsde/convex_analysis.hpp"

#include "rbsde/error.hpp"

#include <algorithm>
#include <cmath>

namespace rbsde {

double Interval::min_norm() const noexcept {
    if (lo <= 0.0 && 0.0 <= hi) return 0.0;
    return lo > 0.0 ? lo : hi;
}

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

constexpr int kMaxExpansions = 200;
constexpr int kMaxBisections = 400;

// Sign of the monotone set-valued map y -> a (y - x) + dPhi(y): -1 below zero,
// +1 above zero, 0 if it contains zero.
int classify(const barrier::Custom& c, double a, double x, double y) {
    if (y < c.domain_lower) return -1;
    if (y > c.domain_upper) return +1;
    const auto g = c.subgradient(y);
    if (!g) {
        if (y == c.domain_lower) return -1;
        if (y == c.domain_upper) return +1;
        throw ProxDiverged("empty subdifferential at interior point " + std::to_string(y));
    }
    const double base = a * (y - x);
    if (base + g->lo > 0.0) return +1;
    if (base + g->hi < 0.0) return -1;
    return 0;
}

// Finds y with 0 in a (y - x) + dPhi(y) by bracketing and bisection.
double solve_inclusion(const barrier::Custom& c, double a, double x) {
    double w = a > 0.0 ? std::max(c.subgradient_bound / a, 1e-8) : std::max(c.subgradient_bound, 1.0);
    double lo = x - w;
    double hi = x + w;
    int s_lo = classify(c, a, x, lo);
    for (int it = 0; s_lo > 0; ++it) {
        if (it == kMaxExpansions) throw ProxDiverged("could not bracket from below");
        lo -= w;
        w *= 2.0;
        s_lo = classify(c, a, x, lo);
    }
    if (s_lo == 0) return lo;
    w = a > 0.0 ? std::max(c.subgradient_bound / a, 1e-8) : std::max(c.subgradient_bound, 1.0);
    int s_hi = classify(c, a, x, hi);
    for (int it = 0; s_hi < 0; ++it) {
        if (it == kMaxExpansions) throw ProxDiverged("could not bracket from above");
        hi += w;
        w *= 2.0;
        s_hi = classify(c, a, x, hi);
    }
    if (s_hi == 0) return hi;
    if (!(lo < hi)) throw ProxDiverged("inconsistent bracket (non-monotone subgradient)");

    for (int it = 0; it < kMaxBisections; ++it) {
        const double tol = std::max(kResolventTolerance,
                                    4.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(lo), std::abs(hi)));
        if (hi - lo <= tol) break;
        const double mid = 0.5 * (lo + hi);
        const int s = classify(c, a, x, mid);
        if (s == 0) return mid;
        (s < 0 ? lo : hi) = mid;
    }
    // Solutions on a domain endpoint sit in the normal cone there.
    for (const double e : {c.domain_lower, c.domain_upper}) {
        if (std::isfinite(e) && lo <= e && e <= hi && classify(c, a, x, e) == 0) return e;
    }
    return std::clamp(0.5 * (lo + hi), c.domain_lower, c.domain_upper);
}

}  // namespace

ConvexBarrier::ConvexBarrier(Kind kind) : kind_(std::move(kind)) {
    std::visit(overloaded{
                   [](const barrier::Indicator& b) {
                       if (std::isnan(b.lower) || std::isnan(b.upper) || b.lower > b.upper || b.lower == kInf ||
                           b.upper == -kInf) {
                           throw InvalidBarrier("indicator needs lower <= upper");
                       }
                   },
                   [](const barrier::Quadratic& b) {
                       if (!std::isfinite(b.kappa) || b.kappa < 0.0) throw InvalidBarrier("kappa must be >= 0");
                   },
                   [](const barrier::Hinge& b) {
                       if (!std::isfinite(b.slope) || b.slope < 0.0 || !std::isfinite(b.level)) {
                           throw InvalidBarrier("hinge needs finite slope >= 0 and finite level");
                       }
                   },
                   [this](const barrier::Custom& b) {
                       if (!b.value || !b.subgradient) throw InvalidBarrier("custom barrier needs callbacks");
                       if (!(b.domain_lower <= b.domain_upper)) throw InvalidBarrier("empty custom domain");
                       if (!(b.subgradient_bound > 0.0)) throw InvalidBarrier("subgradient bound must be > 0");
                       double xmin = 0.0;
                       try {
                           xmin = solve_inclusion(b, 0.0, 0.0);
                       } catch (const ProxDiverged&) {
                           throw InvalidBarrier("custom barrier has no minimizer");
                       }
                       const double v = b.value(xmin);
                       if (!std::isfinite(v)) throw InvalidBarrier("custom barrier minimum is not finite");
                       shift_ = v;
                   },
               },
               kind_);
}

std::string ConvexBarrier::kind_name() const {
    return std::visit(overloaded{
                          [](const barrier::Indicator&) { return std::string("indicator"); },
                          [](const barrier::Quadratic&) { return std::string("quadratic"); },
                          [](const barrier::Hinge&) { return std::string("hinge"); },
                          [](const barrier::Custom&) { return std::string("custom"); },
                      },
                      kind_);
}

bool ConvexBarrier::is_zero() const noexcept {
    return std::visit(overloaded{
                          [](const barrier::Indicator& b) { return b.lower == -kInf && b.upper == kInf; },
                          [](const barrier::Quadratic& b) { return b.kappa == 0.0; },
                          [](const barrier::Hinge& b) { return b.slope == 0.0; },
                          [](const barrier::Custom&) { return false; },
                      },
                      kind_);
}

Interval ConvexBarrier::domain() const noexcept {
    return std::visit(overloaded{
                          [](const barrier::Indicator& b) { return Interval{b.lower, b.upper}; },
                          [](const barrier::Custom& b) { return Interval{b.domain_lower, b.domain_upper}; },
                          [](const auto&) { return Interval{-kInf, kInf}; },
                      },
                      kind_);
}

double ConvexBarrier::value(double x) const {
    return std::visit(overloaded{
                          [x](const barrier::Indicator& b) { return (x >= b.lower && x <= b.upper) ? 0.0 : kInf; },
                          [x](const barrier::Quadratic& b) { return 0.5 * b.kappa * x * x; },
                          [x](const barrier::Hinge& b) { return b.slope * std::max(0.0, b.level - x); },
                          [x, this](const barrier::Custom& b) {
                              if (x < b.domain_lower || x > b.domain_upper) return kInf;
                              const double v = b.value(x);
                              return std::isfinite(v) ? v - shift_ : kInf;
                          },
                      },
                      kind_);
}

std::optional<Interval> ConvexBarrier::subgradient(double x) const {
    return std::visit(overloaded{
                          [x](const barrier::Indicator& b) -> std::optional<Interval> {
                              if (x < b.lower || x > b.upper) return std::nullopt;
                              return Interval{x == b.lower ? -kInf : 0.0, x == b.upper ? kInf : 0.0};
                          },
                          [x](const barrier::Quadratic& b) -> std::optional<Interval> {
                              return Interval{b.kappa * x, b.kappa * x};
                          },
                          [x](const barrier::Hinge& b) -> std::optional<Interval> {
                              if (x < b.level) return Interval{-b.slope, -b.slope};
                              if (x > b.level) return Interval{0.0, 0.0};
                              return Interval{-b.slope, 0.0};
                          },
                          [x](const barrier::Custom& b) -> std::optional<Interval> {
                              if (x < b.domain_lower || x > b.domain_upper) return std::nullopt;
                              return b.subgradient(x);
                          },
                      },
                      kind_);
}

double ConvexBarrier::domain_distance(double x) const noexcept {
    const auto d = domain();
    return std::max({d.lo - x, x - d.hi, 0.0});
}

double ConvexBarrier::interior_point() const {
    return std::visit(overloaded{
                          [](const barrier::Quadratic&) { return 1.0; },
                          [](const barrier::Hinge& b) { return b.level + 1.0; },
                          [this](const auto&) {
                              const auto d = domain();
                              const bool lf = std::isfinite(d.lo);
                              const bool uf = std::isfinite(d.hi);
                              if (lf && uf) return 0.5 * (d.lo + d.hi);
                              if (lf) return d.lo + 1.0;
                              if (uf) return d.hi - 1.0;
                              return 0.0;
                          },
                      },
                      kind_);
}

double resolvent(const ConvexBarrier& barrier, double n, double x) {
    if (!(n > 0.0)) throw std::invalid_argument("resolvent: level must be > 0");
    return std::visit(overloaded{
                          [x](const barrier::Indicator& b) { return std::clamp(x, b.lower, b.upper); },
                          [n, x](const barrier::Quadratic& b) { return n * x / (n + b.kappa); },
                          [n, x](const barrier::Hinge& b) {
                              if (x >= b.level) return x;
                              return std::min(x + b.slope / n, b.level);
                          },
                          [n, x](const barrier::Custom& b) { return solve_inclusion(b, n, x); },
                      },
                      barrier.kind());
}

YosidaLevel::YosidaLevel(const ConvexBarrier& barrier, double n) : barrier_(barrier), n_(n) {
    if (!(n > 0.0)) throw std::invalid_argument("YosidaLevel: n must be > 0");
}

double YosidaLevel::resolvent(double x) const { return rbsde::resolvent(barrier_, n_, x); }

double YosidaLevel::yosida(double x) const { return n_ * (x - resolvent(x)); }

double YosidaLevel::envelope(double x) const {
    const double j = resolvent(x);
    return 0.5 * n_ * (x - j) * (x - j) + barrier_.value(j);
}

double YosidaLevel::implicit_step(double dt, double x) const {
    if (dt == 0.0) return x;
    const double s = 1.0 + dt * n_;
    const double j = rbsde::resolvent(barrier_, n_ / s, x);
    return j + (x - j) / s;
}

double resolvent(const YosidaLevel& level, double x) { return level.resolvent(x); }
double yosida(const YosidaLevel& level, double x) { return level.yosida(x); }
double envelope(const YosidaLevel& level, double x) { return level.envelope(x); }

GraphPair graph_test_pair(const ConvexBarrier& barrier, const std::vector<double>& t_grid) {
    return graph_test_pair(barrier, t_grid, barrier.interior_point());
}

GraphPair graph_test_pair(const ConvexBarrier& barrier, const std::vector<double>& t_grid, double alpha) {
    const auto g = barrier.subgradient(alpha);
    if (!g) throw EmptySubdifferential("no subgradient at alpha = " + std::to_string(alpha));
    return graph_test_pair(barrier, t_grid, alpha, g->min_norm());
}

GraphPair graph_test_pair(const ConvexBarrier& barrier, const std::vector<double>& t_grid, double alpha,
                          double beta) {
    const auto g = barrier.subgradient(alpha);
    if (!g) throw EmptySubdifferential("no subgradient at alpha = " + std::to_string(alpha));
    if (!g->contains(beta)) {
        throw std::invalid_argument("graph_test_pair: beta is not a subgradient at alpha");
    }
    return GraphPair{std::vector<double>(t_grid.size(), alpha), std::vector<double>(t_grid.size(), beta)};
}

}  // namespace rbsde
