#pragma once

#include "rbsde/convex_analysis.hpp"
#include "rbsde/driver.hpp"
#include "rbsde/levy_model.hpp"
#include "rbsde/path_engine.hpp"
#include "rbsde/teugels_basis.hpp"

#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

namespace rbsde {

struct FdGridParams {
    double x_min = -6.0;
    double x_max = 6.0;
    double dx = 0.01;
    double dtau = 1e-3;
    /// Largest tolerated share of nonlocal evaluations landing outside the box.
    double max_extrapolated_share = 0.01;
};

/// Numerical solution u(t, x) of the penalized integro-differential problem
///   u_t + a' u_x + sigma^2/2 u_xx + f(t, x, u, {u^(i)}) + int u^1(t,x,y) nu(dy) = A_n(u),
///   u(T, x) = h(x),
/// with u^1(t,x,y) = u(t,x+y) - u(t,x) - u_x(t,x) y, stored on a uniform
/// (time x space) grid.
class PdiiSurface {
public:
    PdiiSurface(double x_min, double dx, std::size_t nodes, std::vector<double> times,
                std::vector<std::vector<double>> rows, double n);

    double x_min() const noexcept { return x_min_; }
    double x_max() const noexcept { return x_min_ + dx_ * static_cast<double>(nodes_ - 1); }
    double dx() const noexcept { return dx_; }
    std::size_t nodes() const noexcept { return nodes_; }
    double node(std::size_t i) const noexcept { return x_min_ + dx_ * static_cast<double>(i); }
    const std::vector<double>& times() const noexcept { return times_; }
    /// Spatial row at time index q.
    const std::vector<double>& row(std::size_t q) const { return rows_.at(q); }
    double penalization() const noexcept { return n_; }

    /// u(t, x), bilinear in (t, x); linear extrapolation in x outside the box.
    double value(double t, double x) const;
    /// du/dx (central difference of the interpolant).
    double derivative(double t, double x) const;
    /// u^1(t, x, y).
    double jump_remainder(double t, double x, double y) const;

    /// max |u_xx| (second differences) over the grid.
    double max_second_difference() const;

    void write_csv(std::ostream& os) const;

private:
    double row_value(std::size_t q, double x) const;
    double row_derivative(std::size_t q, double x) const;

    double x_min_;
    double dx_;
    std::size_t nodes_;
    std::vector<double> times_;
    std::vector<std::vector<double>> rows_;
    double n_;
};

/// Martingale coefficients implied by a surface:
///   u^(i)(t,x) = sum_j lambda_j u^1(t,x,y_j) p_i(y_j) + 1{i=1} u_x(t,x) sqrt(sigma^2 + int y^2 nu(dy)).
std::vector<double> surface_coefficients(const PdiiSurface& surface, const LevyModel& model,
                                         const TeugelsBasis& basis, double t, double x);

/// Backward time stepping: explicit upwind drift, explicit nonlocal term with
/// linear interpolation, implicit diffusion (tridiagonal), and implicit
/// penalization through (I + dtau A_n)^{-1} per node.
/// Throws CflViolation or BoxTooSmall.
PdiiSurface solve_pdii(const LevyModel& model, const TeugelsBasis& basis, const ConvexBarrier& barrier,
                       const DriverSpec& driver, double n, const FdGridParams& grid);

/// Lemma-style jump-sum identity check. For c(s, x, y) and each path,
///   lhs = sum over recorded jumps of c(t_k, L_{s-}, y),
///   rhs = sum_k sum_i <c(t_k, L_k, .), p_i>_{L^2(nu)} dH^(i)_k + sum_k sum_j lambda_j c(t_k, L_k, y_j) dt.
/// Jumps inside a step are applied in atom order, each seeing the state left
/// by the previous ones. Returns the root-mean-square of lhs - rhs.
using JumpFunctional = std::function<double(double t, double x, double y)>;

struct JumpSumReport {
    double rms_mismatch = 0.0;
    double rms_lhs = 0.0;
    /// sup |c| over grid times, path states and atoms.
    double c_scale = 0.0;
};

JumpSumReport jump_sum_identity_check(const PathBundle& bundle, const JumpFunctional& c, unsigned threads = 0);
/// c(s, x, y) = u^1(s, x, y) from a surface.
JumpSumReport jump_sum_identity_check(const PathBundle& bundle, const PdiiSurface& surface, unsigned threads = 0);

}  // namespace rbsde
