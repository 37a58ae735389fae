#pragma once

#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace flip {

// FLIP_LAB_THREADS caps worker count; defaults to the hardware concurrency.
inline int thread_budget() {
    if (const char* env = std::getenv("FLIP_LAB_THREADS")) {
        int n = std::atoi(env);
        if (n >= 1) return std::min(n, 64);
    }
    unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(std::min(hc, 64u));
}

// Index-parallel loop with a fixed partition; the work items must be
// independent (deterministic results do not depend on the thread count).
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    int workers = thread_budget();
    if (workers <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::size_t stride = static_cast<std::size_t>(workers);
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w]() {
            for (std::size_t i = static_cast<std::size_t>(w); i < n; i += stride) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace flip
