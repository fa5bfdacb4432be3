#pragma once

#include <cstddef>
#include <thread>
#include <vector>

namespace cesdp {

/// Run body(i) for i in [0, count) on `workers` threads.
///
/// Indices are split into contiguous disjoint slices, one per worker, and
/// every body(i) writes only to its own index's output slot. With no
/// reductions and no shared accumulation, results are bit-identical for any
/// worker count, which the solvers rely on for reproducibility.
template <typename Body>
void parallel_for(std::size_t count, unsigned workers, Body&& body) {
    if (count == 0) return;
    if (workers <= 1 || count < 2 * static_cast<std::size_t>(workers)) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    const auto w = static_cast<std::size_t>(workers);
    std::vector<std::thread> pool;
    pool.reserve(w);
    for (std::size_t s = 0; s < w; ++s) {
        const std::size_t lo = count * s / w;
        const std::size_t hi = count * (s + 1) / w;
        pool.emplace_back([lo, hi, &body] {
            for (std::size_t i = lo; i < hi; ++i) body(i);
        });
    }
    for (std::thread& th : pool) th.join();
}

}  // namespace cesdp
