#pragma once

#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace relex {

// Worker count for read-only fan-out: explicit request, else the
// NOISY_RELEX_THREADS cap, else single-threaded.
inline int resolve_threads(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("NOISY_RELEX_THREADS")) {
        int n = std::atoi(env);
        if (n > 0) return n;
    }
    return 1;
}

// Runs fn(i) for i in [0, n) across `threads` workers. Callers write results
// into index i of a preallocated buffer and reduce sequentially afterwards,
// so the outcome does not depend on the worker count.
inline void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
    threads = resolve_threads(threads);
    if (threads <= 1 || n <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    if (threads > n) threads = n;
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
            for (int i = t; i < n; i += threads) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace relex
