#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace solrcmf {

/// Number of worker threads used by parallel_for; 0 selects the hardware
/// concurrency. Set once at startup (not thread-safe to change mid-run).
inline int& thread_count() {
    static int count = 0;
    return count;
}

/// Runs fn(0..n-1), splitting indices across threads. Tasks must be
/// independent; determinism is preserved as long as each task writes only
/// to its own index slot.
template <typename Fn>
void parallel_for(int n, Fn&& fn) {
    if (n <= 0) return;
    int workers = thread_count() > 0
                      ? thread_count()
                      : static_cast<int>(std::thread::hardware_concurrency());
    if (workers < 1) workers = 1;
    workers = std::min(workers, n);
    if (workers == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }

    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers));
    std::atomic<int> next{0};
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&]() {
            for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace solrcmf
