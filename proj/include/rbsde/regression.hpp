#pragma once

#include "rbsde/path_engine.hpp"

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <vector>

namespace rbsde {

/// Feature map of the state x = L_{t_k}: standardized monomials up to
/// `degree`, optional hinges (x - lower)^+ and (upper - x)^+, and `knots`
/// hinges (x - kappa_j)^+ at evenly spaced quantiles of L_{t_k}.
struct RegressionBasis {
    int degree = 4;
    std::optional<double> hinge_lower;
    std::optional<double> hinge_upper;
    int knots = 0;

    int feature_count() const noexcept {
        return degree + 1 + (hinge_lower ? 1 : 0) + (hinge_upper ? 1 : 0) + knots;
    }
};

/// Condition number above which ridge regularization is applied.
inline constexpr double kRidgeConditionThreshold = 1e10;
inline constexpr double kRidgeFactor = 1e-10;
inline constexpr std::size_t kMaxFeatures = 16;

/// Per-step least-squares design for the joint regression
///   Y_{k+1} ~ sum_a beta_a phi_a(L_k) + sum_i sum_a gamma_{i,a} phi_a(L_k) dH^(i)_k,
/// whose population solution gives E[Y_{k+1} | L_k] = beta . phi and
/// E[Y_{k+1} dH^(i)_k | L_k] / dt = gamma_i . phi.
///
/// The Gram matrices depend only on the bundle, so they are factorized once
/// and reused for every target (every penalization level).
class RegressionPlan {
public:
    RegressionPlan(const PathBundle& bundle, RegressionBasis basis, unsigned threads = 0);

    const PathBundle& bundle() const noexcept { return *bundle_; }
    const RegressionBasis& basis() const noexcept { return basis_; }
    int rank() const noexcept { return rank_; }

    /// Number of state features at step k (1 when the state is deterministic).
    int feature_count(int k) const noexcept { return steps_[static_cast<std::size_t>(k)].features; }
    /// Writes phi(x) at step k into out; returns the number of features.
    int features(int k, double x, std::span<double> out) const noexcept;

    /// Coefficients (beta, gamma_1, ..., gamma_r), each of length feature_count(k).
    Eigen::VectorXd fit(int k, std::span<const double> target) const;

    double condition_number(int k) const noexcept { return steps_[static_cast<std::size_t>(k)].condition; }
    bool ridge_applied(int k) const noexcept { return steps_[static_cast<std::size_t>(k)].ridge; }
    unsigned threads() const noexcept { return threads_; }

private:
    struct Step {
        int features = 1;
        double center = 0.0;
        double scale = 1.0;
        std::vector<double> knots;
        double condition = 1.0;
        bool ridge = false;
        Eigen::VectorXd column_scale;
        std::vector<bool> active;
        Eigen::LLT<Eigen::MatrixXd> factor;
    };

    int fill_row(int k, std::size_t m, std::span<double> row) const noexcept;

    const PathBundle* bundle_;
    RegressionBasis basis_;
    int rank_;
    unsigned threads_;
    std::vector<Step> steps_;
};

}  // namespace rbsde
