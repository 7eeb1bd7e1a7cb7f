#pragma once

// Minimal deterministic job runner: jobs write only to their own slots and
// derive their own RNG streams, so results are independent of scheduling.

#include <atomic>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace stiffdyn {

inline void run_parallel(std::vector<std::function<void()>>& jobs, int n_threads) {
    if (n_threads <= 1 || jobs.size() <= 1) {
        for (auto& job : jobs) job();
        return;
    }
    std::atomic<std::size_t> next{0};
    const int workers = static_cast<int>(
        std::min<std::size_t>(static_cast<std::size_t>(n_threads), jobs.size()));
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        threads.emplace_back([&]() {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= jobs.size()) return;
                jobs[i]();
            }
        });
    }
    for (auto& t : threads) t.join();
}

}  // namespace stiffdyn
