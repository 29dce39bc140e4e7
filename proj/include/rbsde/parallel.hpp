#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace rbsde::parallel {

/// Work is always split into fixed-size chunks that do not depend on the
/// thread count; reductions combine per-chunk partials in chunk order, so
/// results are bit-identical for any number of threads.
inline constexpr std::size_t kChunk = 2048;

inline std::size_t chunk_count(std::size_t items) { return (items + kChunk - 1) / kChunk; }

inline unsigned resolve_threads(unsigned threads) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    return threads;
}

/// Calls fn(chunk_index, begin, end) for every chunk of [0, items).
template <class Fn>
void for_chunks(std::size_t items, unsigned threads, Fn&& fn) {
    const std::size_t chunks = chunk_count(items);
    threads = static_cast<unsigned>(std::min<std::size_t>(resolve_threads(threads), chunks));
    auto run = [&](std::size_t c) {
        const std::size_t begin = c * kChunk;
        fn(c, begin, std::min(items, begin + kChunk));
    };
    if (threads <= 1) {
        for (std::size_t c = 0; c < chunks; ++c) run(c);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
            try {
                for (std::size_t c = t; c < chunks; c += threads) run(c);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& err : errors) {
        if (err) std::rethrow_exception(err);
    }
}

/// Pairwise (tree) summation of per-chunk partial vectors, in place into partials[0].
inline void tree_reduce(std::vector<std::vector<double>>& partials) {
    for (std::size_t stride = 1; stride < partials.size(); stride *= 2) {
        for (std::size_t i = 0; i + stride < partials.size(); i += 2 * stride) {
            auto& dst = partials[i];
            const auto& src = partials[i + stride];
            for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
        }
    }
}

/// Deterministic sum of fn(i) over [0, items), accumulating `width` values per item.
template <class Fn>
std::vector<double> reduce(std::size_t items, std::size_t width, unsigned threads, Fn&& fn) {
    std::vector<std::vector<double>> partials(std::max<std::size_t>(1, chunk_count(items)),
                                              std::vector<double>(width, 0.0));
    for_chunks(items, threads, [&](std::size_t c, std::size_t b, std::size_t e) {
        auto& acc = partials[c];
        for (std::size_t i = b; i < e; ++i) fn(i, acc);
    });
    tree_reduce(partials);
    return std::move(partials[0]);
}

}  // namespace rbsde::parallel
