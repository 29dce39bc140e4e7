#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace rbsde {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Closed interval [lo, hi] of the extended reals.
struct Interval {
    double lo;
    double hi;

    bool contains(double v) const noexcept { return lo <= v && v <= hi; }
    /// Element of minimal absolute value.
    double min_norm() const noexcept;
};

namespace barrier {

/// Indicator of [lower, upper]; either end may be infinite.
struct Indicator {
    double lower = -kInf;
    double upper = kInf;
};

/// kappa x^2 / 2, kappa >= 0.
struct Quadratic {
    double kappa = 1.0;
};

/// slope * max(0, level - x), slope >= 0.
struct Hinge {
    double slope = 1.0;
    double level = 0.0;
};

/// User-supplied 1-d convex function.
struct Custom {
    /// Phi(x); +inf outside the domain.
    std::function<double(double)> value;
    /// Subdifferential at x (endpoints may be infinite); nullopt when empty.
    std::function<std::optional<Interval>(double)> subgradient;
    double domain_lower = -kInf;
    double domain_upper = kInf;
    /// Rough bound on |subgradients| near typical arguments; seeds the prox bracket.
    double subgradient_bound = 1.0;
};

}  // namespace barrier

/// Proper lower semicontinuous convex Phi on the real line, normalized at
/// construction so that min Phi = 0.
class ConvexBarrier {
public:
    using Kind = std::variant<barrier::Indicator, barrier::Quadratic, barrier::Hinge, barrier::Custom>;

    explicit ConvexBarrier(Kind kind);

    static ConvexBarrier zero() { return ConvexBarrier(barrier::Indicator{}); }
    static ConvexBarrier indicator(double lower, double upper = kInf) {
        return ConvexBarrier(barrier::Indicator{lower, upper});
    }
    static ConvexBarrier quadratic(double kappa) { return ConvexBarrier(barrier::Quadratic{kappa}); }
    static ConvexBarrier hinge(double slope, double level) { return ConvexBarrier(barrier::Hinge{slope, level}); }

    const Kind& kind() const noexcept { return kind_; }
    std::string kind_name() const;
    bool is_indicator() const noexcept { return std::holds_alternative<barrier::Indicator>(kind_); }
    /// True when Phi is identically zero.
    bool is_zero() const noexcept;

    /// Closure of Dom(Phi).
    Interval domain() const noexcept;
    /// Phi(x) after normalization; +inf outside the domain.
    double value(double x) const;
    /// dPhi(x); nullopt when empty.
    std::optional<Interval> subgradient(double x) const;
    /// Constant subtracted at construction so that min Phi = 0.
    double shift() const noexcept { return shift_; }
    /// Distance from x to the closure of Dom(Phi).
    double domain_distance(double x) const noexcept;
    /// A point in the interior of the domain.
    double interior_point() const;

private:
    Kind kind_;
    double shift_ = 0.0;
};

/// Absolute tolerance of numerically solved resolvents.
inline constexpr double kResolventTolerance = 1e-12;

/// Moreau–Yosida regularization of a barrier at level n:
///   Phi_n(x) = min_y (n/2)|x - y|^2 + Phi(y),
///   J_n(x)   = argmin of the above,
///   A_n(x)   = n (x - J_n(x)) = Phi_n'(x).
class YosidaLevel {
public:
    YosidaLevel(const ConvexBarrier& barrier, double n);

    double n() const noexcept { return n_; }
    const ConvexBarrier& barrier() const noexcept { return barrier_; }

    double resolvent(double x) const;
    double yosida(double x) const;
    double envelope(double x) const;

    /// Solves y + dt A_n(y) = x, i.e. (I + dt A_n)^{-1} x.
    ///
    /// With n' = n / (1 + dt n): y = J_{n'}(x) + (x - J_{n'}(x)) / (1 + dt n).
    double implicit_step(double dt, double x) const;

private:
    ConvexBarrier barrier_;
    double n_;
};

/// J_n, A_n and Phi_n as free functions.
double resolvent(const YosidaLevel& level, double x);
double yosida(const YosidaLevel& level, double x);
double envelope(const YosidaLevel& level, double x);

/// Resolvent of an arbitrary barrier at level n.
double resolvent(const ConvexBarrier& barrier, double n, double x);

/// Constant test process (alpha_t, beta_t) in Gr(dPhi) on a time grid.
struct GraphPair {
    std::vector<double> alpha;
    std::vector<double> beta;
};

/// Default pair: alpha = interior point, beta = minimal-norm subgradient there.
GraphPair graph_test_pair(const ConvexBarrier& barrier, const std::vector<double>& t_grid);
/// Pair at a given alpha with the minimal-norm subgradient.
GraphPair graph_test_pair(const ConvexBarrier& barrier, const std::vector<double>& t_grid, double alpha);
/// Explicit pair; throws EmptySubdifferential unless beta is in dPhi(alpha).
GraphPair graph_test_pair(const ConvexBarrier& barrier, const std::vector<double>& t_grid, double alpha,
                          double beta);

}  // namespace rbsde
