#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace gelstep {

/// Resolves the thread-count knob: 0 = hardware concurrency, k ≥ 1 = k.
inline int resolve_threads(int requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Splits [0, n) into `threads` contiguous chunks and runs fn(begin, end,
/// chunk) on each. Chunk boundaries depend only on (n, threads), so
/// reductions done per chunk and combined in chunk order are reproducible.
template <class Fn>
void parallel_chunks(std::size_t n, int threads, Fn&& fn) {
    const std::size_t k = std::max<std::size_t>(1, std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), n));
    if (k == 1) {
        fn(std::size_t{0}, n, std::size_t{0});
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(k);
    pool.reserve(k - 1);
    auto run = [&](std::size_t c) {
        const std::size_t b = n * c / k;
        const std::size_t e = n * (c + 1) / k;
        try {
            fn(b, e, c);
        } catch (...) {
            errors[c] = std::current_exception();
        }
    };
    for (std::size_t c = 1; c < k; ++c) pool.emplace_back(run, c);
    run(0);
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

inline std::size_t chunk_count(std::size_t n, int threads) {
    return std::max<std::size_t>(1, std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), n));
}

}  // namespace gelstep
