#pragma once

#include "rbsde/levy_model.hpp"
#include "rbsde/teugels_basis.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace rbsde {

/// Uniform grid t_k = k T / N on [0, T].
struct GridSpec {
    int steps = 100;
    double horizon = 1.0;

    GridSpec(int steps_, double horizon_);
    double dt() const noexcept { return horizon / steps; }
    double time(int k) const noexcept { return k * dt(); }
    std::vector<double> times() const;
};

/// M simulated paths of L on a grid with exact jump bookkeeping (jump counts
/// per atom and step), the Gaussian increments, and on-demand increments of
/// the Teugels martingales
///   dH^(i)_k = c_{i,1} sigma dW_k + sum_j N_{k,j} p_i(y_j) - dt sum_k' c_{i,k'} m_k'.
///
/// Storage is step-major so that a backward sweep reads contiguous slices.
class PathBundle {
public:
    PathBundle(LevyModel model, TeugelsBasis basis, GridSpec grid, std::size_t paths, std::uint64_t seed,
               std::vector<double> states, std::vector<double> gaussian, std::vector<std::uint16_t> counts);

    const LevyModel& model() const noexcept { return model_; }
    const TeugelsBasis& basis() const noexcept { return basis_; }
    const GridSpec& grid() const noexcept { return grid_; }
    std::size_t paths() const noexcept { return paths_; }
    int steps() const noexcept { return grid_.steps; }
    int rank() const noexcept { return basis_.rank(); }
    std::uint64_t seed() const noexcept { return seed_; }
    std::size_t atom_count() const noexcept { return model_.atoms().size(); }

    /// L_{t_k} on path m.
    double state(int k, std::size_t m) const noexcept { return states_[idx(k, m)]; }
    /// All paths at t_k.
    std::span<const double> states_at(int k) const noexcept {
        return {states_.data() + idx(k, 0), paths_};
    }
    /// Gaussian increment W_{t_{k+1}} - W_{t_k}; zero when sigma = 0.
    double gaussian(int k, std::size_t m) const noexcept {
        return gaussian_.empty() ? 0.0 : gaussian_[idx(k, m)];
    }
    /// Number of jumps of atom j in (t_k, t_{k+1}].
    std::uint16_t count(int k, std::size_t m, std::size_t j) const noexcept {
        return counts_.empty() ? 0 : counts_[(idx(k, m)) * atom_count() + j];
    }

    /// dH^(i)_k on path m, 1 <= i <= truncation; exactly 0 for i > rank.
    double h_increment(int k, std::size_t m, int i) const noexcept;
    /// Writes dH^(1..rank)_k for path m into out (size >= rank).
    void h_increments(int k, std::size_t m, std::span<double> out) const noexcept;
    /// H^(i)_{t_k} on path m (cumulative sum of increments).
    double h_value(int k, std::size_t m, int i) const noexcept;

    /// Raw arrays (step-major), used by the dump writer.
    const std::vector<double>& raw_states() const noexcept { return states_; }
    const std::vector<double>& raw_gaussian() const noexcept { return gaussian_; }
    const std::vector<std::uint16_t>& raw_counts() const noexcept { return counts_; }

    /// Fraction of paths whose grid values ever leave [lo, hi].
    double escape_fraction(double lo, double hi) const;

private:
    std::size_t idx(int k, std::size_t m) const noexcept { return static_cast<std::size_t>(k) * paths_ + m; }

    LevyModel model_;
    TeugelsBasis basis_;
    GridSpec grid_;
    std::size_t paths_;
    std::uint64_t seed_;
    std::vector<double> states_;            // (N+1) x M
    std::vector<double> gaussian_;          // N x M, empty if sigma = 0
    std::vector<std::uint16_t> counts_;     // N x M x J
    std::vector<double> jump_weight_;       // rank x J, p_i(y_j)
    std::vector<double> gauss_loading_;     // rank
    std::vector<double> compensation_;      // rank, dt * compensator rate
};

/// Simulates M paths starting at L_0 = 0. Path m uses RNG stream m of `seed`;
/// the result does not depend on `threads` (0 = hardware concurrency).
PathBundle simulate(const LevyModel& model, const TeugelsBasis& basis, const GridSpec& grid, std::size_t paths,
                    std::uint64_t seed, unsigned threads = 0);

/// L^(i) along a path: L itself for i = 1, otherwise the cumulative sum of
/// i-th powers of the jumps. Throws IndexError on a bad path index.
std::vector<double> power_jump(const PathBundle& bundle, int i, std::size_t path);

/// Binary dump: header (magic, seed, model fingerprint, grid, sizes, embedded
/// config text) followed by 64-bit float bodies in path-major (M x steps) order.
void write_dump(const PathBundle& bundle, const std::filesystem::path& file, const std::string& config_text);

struct BundleDump {
    std::uint64_t seed = 0;
    std::uint64_t model_hash = 0;
    int steps = 0;
    double horizon = 0.0;
    std::size_t paths = 0;
    std::size_t atoms = 0;
    std::string config_text;
    std::vector<double> states;     // step-major
    std::vector<double> gaussian;   // step-major
    std::vector<std::uint16_t> counts;
};

BundleDump read_dump(const std::filesystem::path& file);

/// Rebuilds a bundle from a dump; throws HashMismatch when the model differs.
PathBundle bundle_from_dump(BundleDump dump, const LevyModel& model, const TeugelsBasis& basis);

}  // namespace rbsde
