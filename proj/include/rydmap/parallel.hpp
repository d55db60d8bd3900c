#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace rydmap {

/// Number of workers a module may use. Zero means "all available cores".
struct Parallelism {
    unsigned workers = 0;

    unsigned resolved() const {
        if (workers != 0) return workers;
        return std::max(1u, std::thread::hardware_concurrency());
    }
};

/// Runs fn(i) for i in [0, count) on at most `budget` threads. Each index is
/// processed exactly once; the first exception thrown is rethrown after all
/// workers have joined.
inline void parallel_for(std::size_t count, Parallelism budget, const std::function<void(std::size_t)>& fn) {
    const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(budget.resolved(), count));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    pool.clear();
    if (error) std::rethrow_exception(error);
}

}  // namespace rydmap
