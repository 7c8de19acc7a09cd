#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace qdiff {

// Static block partition of [0, n) over `threads` workers. Results written by
// index stay independent of the thread count.
template <class F>
void parallel_for(std::size_t n, int threads, F&& f) {
    std::size_t nt = static_cast<std::size_t>(std::max(1, threads));
    nt = std::min(nt, std::max<std::size_t>(n, 1));
    if (nt == 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::vector<std::thread> pool;
    std::size_t chunk = (n + nt - 1) / nt;
    for (std::size_t t = 0; t < nt; ++t) {
        std::size_t lo = t * chunk, hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &f] {
            for (std::size_t i = lo; i < hi; ++i) f(i);
        });
    }
    for (auto& th : pool) th.join();
}

int default_threads();

}  // namespace qdiff
