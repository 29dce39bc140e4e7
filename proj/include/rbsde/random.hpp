#pragma once

#include <cstdint>

namespace rbsde {

/// Counter-based generator: the k-th draw of a stream is a pure function of
/// (seed, stream, k), so every path can be simulated independently of any
/// scheduling order. Output mixing is the SplitMix64 finalizer.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream) noexcept;

    std::uint64_t next_u64() noexcept;
    /// Uniform on the open interval (0, 1).
    double uniform() noexcept;
    /// Standard normal via Box–Muller (one draw per call).
    double normal() noexcept;
    /// Poisson(mean) by inversion; mean must be modest (< ~700).
    std::uint32_t poisson(double mean) noexcept;

    std::uint64_t counter() const noexcept { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

std::uint64_t mix64(std::uint64_t z) noexcept;

}  // namespace rbsde
