#pragma once

#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace aforge {

/// Worker cap: ANOMALY_FORGE_THREADS if set, otherwise 1. Results never
/// depend on the cap; parallel loops write to disjoint slots and all
/// reductions happen afterwards in index order.
inline unsigned max_threads() {
    static const unsigned cached = [] {
        if (const char* env = std::getenv("ANOMALY_FORGE_THREADS")) {
            const long v = std::strtol(env, nullptr, 10);
            if (v >= 1) return static_cast<unsigned>(v);
        }
        return 1u;
    }();
    return cached;
}

/// Runs fn(i) for i in [0, n), chunked over at most max_threads() workers.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    const unsigned workers = std::min<std::size_t>(max_threads(), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&fn, w, workers, n] {
            for (std::size_t i = w; i < n; i += workers) fn(i);
        });
    }
    for (std::thread& t : pool) t.join();
}

}  // namespace aforge
