#pragma once

#include <cstdint>
#include <vector>

namespace rbsde {

/// One atom of a finite Lévy measure: jumps of size `location` arriving at
/// Poisson rate `rate`.
struct JumpAtom {
    double location;
    double rate;
};

/// Generating triplet (a, sigma, nu) of a real Lévy process with a finite
/// atomic Lévy measure, together with the horizon T.
///
/// The characteristic exponent uses the truncation 1{|y| < 1}, so the path
/// dynamics are
///   L_t = b t + sigma W_t + (sum of jumps up to t),
///   b   = a - sum_{|y_j| < 1} lambda_j y_j,
/// and E L_1 = a + sum_{|y_j| >= 1} lambda_j y_j.
///
/// Immutable after construction.
class LevyModel {
public:
    LevyModel(double drift, double sigma, std::vector<JumpAtom> atoms, double horizon = 1.0);

    double drift() const noexcept { return drift_; }
    double sigma() const noexcept { return sigma_; }
    double horizon() const noexcept { return horizon_; }
    const std::vector<JumpAtom>& atoms() const noexcept { return atoms_; }
    bool has_jumps() const noexcept { return !atoms_.empty(); }

    /// Total jump intensity sum_j lambda_j.
    double total_rate() const noexcept;
    /// Drift of the uncompensated path representation (b above).
    double path_drift() const noexcept;
    /// max_j |y_j|, 0 without jumps.
    double max_jump() const noexcept;

    /// int (1 ∧ y^2) nu(dy); finite for every atomic measure.
    double small_jump_integral() const noexcept;
    /// int_{|y| >= eps} exp(lambda |y|) nu(dy); finite for every atomic measure.
    double exponential_moment(double lambda, double eps) const noexcept;

    /// Stable 64-bit fingerprint of (drift, sigma, atoms, horizon).
    std::uint64_t fingerprint() const noexcept;

private:
    double drift_;
    double sigma_;
    std::vector<JumpAtom> atoms_;
    double horizon_;
};

/// Validating factory. Throws InvalidAtom or DegenerateModel.
LevyModel make_model(double drift, double sigma, std::vector<JumpAtom> atoms, double horizon = 1.0);

/// Moment functionals of nu and of mu(dx) = x^2 nu(dx) + sigma^2 delta_0(dx).
struct MomentTable {
    int order = 0;
    /// nu_moments[k] = int y^k nu(dy) for k = 0..2*order+2 (index 0 is the total rate).
    std::vector<double> nu_moments;
    /// mu_moments[k] = int x^k mu(dx) for k = 0..2*order.
    std::vector<double> mu_moments;
    /// E L_1 = a + int_{|y|>=1} y nu(dy).
    double mean_increment = 0.0;
    /// a' in the integro-differential generator; equal to mean_increment here.
    double drift_prime = 0.0;
    double sigma = 0.0;

    double nu(int k) const { return nu_moments.at(static_cast<std::size_t>(k)); }
    double mu(int k) const { return mu_moments.at(static_cast<std::size_t>(k)); }
};

/// Moments up to the given order (order >= 1). Accumulates in long double.
MomentTable moments(const LevyModel& model, int order);

}  // namespace rbsde
