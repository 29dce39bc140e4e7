#pragma once

#include "rbsde/levy_model.hpp"

#include <iosfwd>
#include <vector>

namespace rbsde {

/// Orthonormal polynomials q_0, ..., q_{r-1} with respect to
/// mu(dx) = x^2 nu(dx) + sigma^2 delta_0(dx), and the coefficients c_{i,k} of
/// the Teugels martingales
///   H^(i) = c_{i,i} Y^(i) + ... + c_{i,1} Y^(1),
///   q_{i-1}(x) = c_{i,i} x^{i-1} + ... + c_{i,1}.
///
/// Degenerate directions (finite support of mu) truncate the basis at the
/// effective rank r <= K. Leading coefficients c_{i,i} are positive.
class TeugelsBasis {
public:
    TeugelsBasis(MomentTable moments, int truncation, std::vector<std::vector<double>> coeffs);

    int truncation() const noexcept { return truncation_; }
    int rank() const noexcept { return static_cast<int>(coeffs_.size()); }
    const MomentTable& moment_table() const noexcept { return moments_; }

    /// c_{i,k}, 1 <= k <= i <= rank.
    double coeff(int i, int k) const;
    /// Coefficients of q_{i-1} in increasing degree: c_{i,1}, ..., c_{i,i}.
    const std::vector<double>& q_coeffs(int i) const;

    /// q_{i-1}(x); throws IndexOutOfRank unless 1 <= i <= rank.
    double q(int i, double x) const;
    /// p_i(y) = y q_{i-1}(y) = sum_k c_{i,k} y^k.
    double p(int i, double y) const;

    /// Compensator rate of H^(i): sum_k c_{i,k} m_k.
    double compensator_rate(int i) const;
    /// Coefficient of sigma dW in dH^(i): c_{i,1} sigma.
    double gaussian_loading(int i) const;

    void write_csv(std::ostream& os) const;

private:
    void check_index(int i) const;

    MomentTable moments_;
    int truncation_;
    std::vector<std::vector<double>> coeffs_;
};

/// Degeneracy cutoff: a direction is null when its squared mu-norm is below
/// this fraction of mu_0.
inline constexpr double kBasisNullTolerance = 1e-10;

/// Two-pass Gram–Schmidt on 1, x, ..., x^{K-1} in the Hankel inner product
/// G_{jk} = mu_{j+k}. Throws RankZero if mu_0 vanishes.
TeugelsBasis build_basis(const MomentTable& moments, int truncation);

/// Projection polynomials p_i(y) = y q_{i-1}(y), i = 1..r, stored as
/// coefficient vectors in increasing degree (index 0 is the constant term, always 0).
struct ProjectionPolys {
    std::vector<std::vector<double>> coeffs;

    int size() const noexcept { return static_cast<int>(coeffs.size()); }
    double operator()(int i, double y) const;
};

ProjectionPolys projection_polys(const TeugelsBasis& basis);

/// (p_1(y), ..., p_r(y)): the uncompensated contribution of one jump of size y
/// to each H^(i).
std::vector<double> h_increment_weights(const TeugelsBasis& basis, double jump);

}  // namespace rbsde
