#pragma once

#include "rbsde/convex_analysis.hpp"
#include "rbsde/driver.hpp"
#include "rbsde/path_engine.hpp"
#include "rbsde/pdii_fd_oracle.hpp"
#include "rbsde/regression.hpp"

#include <vector>

namespace rbsde {

struct SolverOptions {
    int max_fixed_point_iterations = 50;
    double fixed_point_tolerance = 1e-10;
    unsigned threads = 0;
};

struct StepDiagnostics {
    double condition_number = 1.0;
    bool ridge = false;
    /// RMS over paths of Y_{k+1} - Yhat_k - sum_i Z^(i)_k dH^(i)_k.
    double residual_rms = 0.0;
};

/// Penalized solution (Y^n, Z^n, K^n) on the simulation grid, per path.
/// K^n_{t_k} = -sum_{q<k} A_n(Y^n_q) dt, so K_0 = 0.
struct RbsdeSolution {
    double n = 0.0;
    int steps = 0;
    std::size_t paths = 0;
    int rank = 0;
    double dt = 0.0;
    std::vector<double> y;   // (steps+1) x paths
    std::vector<double> z;   // steps x paths x rank
    std::vector<double> k;   // (steps+1) x paths
    std::vector<StepDiagnostics> diagnostics;
    double y0_stderr = 0.0;

    double Y(int step, std::size_t m) const noexcept { return y[static_cast<std::size_t>(step) * paths + m]; }
    double Z(int step, std::size_t m, int i) const noexcept {
        return z[(static_cast<std::size_t>(step) * paths + m) * static_cast<std::size_t>(rank) +
                 static_cast<std::size_t>(i - 1)];
    }
    double K(int step, std::size_t m) const noexcept { return k[static_cast<std::size_t>(step) * paths + m]; }
    /// -A_n(Y_step) recovered from the K increment.
    double push(int step, std::size_t m) const noexcept { return (K(step + 1, m) - K(step, m)) / dt; }
    double y0() const noexcept { return y.empty() ? 0.0 : y[0]; }
};

/// Backward least-squares Monte Carlo recursion for
///   Y^n_t = xi + int_t^T [f(s, L_s, Y^n_s, Z^n_s) - A_n(Y^n_s)] ds - sum_i int_t^T Z^(i),n_s dH^(i)_s.
/// Each step regresses Y_{k+1} jointly on phi(L_k) and phi(L_k) dH^(i)_k, then
/// solves y = Yhat + dt f(t_k, x, y, Z) - dt A_n(y) through (I + dt A_n)^{-1}
/// with a fixed point on the y-dependence of f.
RbsdeSolution solve_penalized(const RegressionPlan& plan, const ConvexBarrier& barrier, const DriverSpec& driver,
                              double n, const SolverOptions& options = {});
RbsdeSolution solve_penalized(const PathBundle& bundle, const ConvexBarrier& barrier, const DriverSpec& driver,
                              double n, const RegressionBasis& basis, const SolverOptions& options = {});

/// Terminal values xi = h(L_T), clamped into the domain for indicator
/// barriers; throws InfeasibleTerminal when Phi(xi) is infinite otherwise.
std::vector<double> terminal_values(const PathBundle& bundle, const ConvexBarrier& barrier, const DriverSpec& driver);

/// Regression basis used by default for a barrier: polynomial degree, hinges
/// at finite indicator bounds, and quantile knots.
inline constexpr int kDefaultKnots = 8;
RegressionBasis default_regression_basis(const ConvexBarrier& barrier, int degree = 4, int knots = kDefaultKnots);

/// g(n, m) = mean_paths sup_k |Y^n - Y^m|^2 + 1/2 mean_paths sum_k ||Z^n - Z^m||^2 dt.
double cauchy_gap(const RbsdeSolution& a, const RbsdeSolution& b, unsigned threads = 0);

struct LevelStats {
    double n = 0.0;
    /// Gap to the next rung; NaN on the last rung.
    double gap_next = 0.0;
    double y0 = 0.0;
    double y0_stderr = 0.0;
    double domain_violation = 0.0;
    double minimality_stat = 0.0;
    double minimality_stderr = 0.0;
    /// mean sum_k |A_n(Y_k)|^2 dt
    double energy_a = 0.0;
    /// mean sum_k ||Z_k||^2 dt
    double energy_z = 0.0;
    /// mean sup_k |Y_k|^2
    double sup_y2 = 0.0;
    /// mean sum_k |A_n(Y_k)| dt
    double abs_a = 0.0;
};

struct ConvergenceReport {
    std::vector<LevelStats> levels;
    /// Least-squares fit of gap_next ~ C (1/n + 1/m) through the origin.
    double fitted_constant = 0.0;
    /// True when some gap fails to decrease along the ladder.
    bool non_cauchy = false;
};

/// Runs solve_penalized along a strictly increasing ladder of n and reports
/// pairwise gaps between consecutive rungs. Returns the largest-n solution.
std::pair<RbsdeSolution, ConvergenceReport> solve_reflected(const RegressionPlan& plan, const ConvexBarrier& barrier,
                                                            const DriverSpec& driver, const std::vector<double>& ladder,
                                                            const SolverOptions& options = {});

struct MinimalityResult {
    double alpha = 0.0;
    double beta = 0.0;
    /// mean over paths of sum_k (Y_k - alpha)(dK_k + beta dt)
    double mean = 0.0;
    double stderr_ = 0.0;
};

struct ContractReport {
    /// max over paths and times of dist(Y, closure Dom Phi)
    double domain_violation = 0.0;
    std::vector<MinimalityResult> minimality;
    /// sqrt(mean_paths sum_k r_k^2), r_k the one-step residual of the discrete equation.
    double residual_rms = 0.0;
    bool k_starts_at_zero = true;
    /// max |Y_N - xi| over paths
    double terminal_mismatch = 0.0;
};

ContractReport check_solution_contract(const RbsdeSolution& sol, const PathBundle& bundle,
                                       const ConvexBarrier& barrier, const DriverSpec& driver,
                                       const std::vector<GraphPair>& test_pairs, unsigned threads = 0);

/// Mean over paths of sum_k (Y_k - alpha)(dK_k + beta dt), with its standard error.
MinimalityResult minimality_statistic(const RbsdeSolution& sol, double alpha, double beta, unsigned threads = 0);

struct FeynmanKacReport {
    /// max over the time subgrid of mean_paths |Y_k - u(t_k, L_k)|
    double y_error = 0.0;
    /// max over the time subgrid of mean_paths |Z^(1)_k - u^(1)(t_k, L_k)|
    double z1_error = 0.0;
    /// |Y_0 - u(0, 0)|
    double y0_gap = 0.0;
    double escape_fraction = 0.0;
};

/// Compares a Monte Carlo solution with an oracle surface on `time_points`
/// evenly spaced grid steps. Throws DomainEscape if more than 1% of the
/// paths leave the surface box.
FeynmanKacReport feynman_kac_check(const RbsdeSolution& sol, const PdiiSurface& surface, const PathBundle& bundle,
                                   int time_points = 10, unsigned threads = 0);

}  // namespace rbsde
