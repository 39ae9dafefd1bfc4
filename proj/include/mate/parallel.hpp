#pragma once

#include <atomic>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace mate {

inline int worker_count() {
    if (const char* env = std::getenv("MATE_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return hc > 0 ? static_cast<int>(hc) : 1;
}

namespace detail {
inline thread_local bool inside_worker = false;
}

/// Index-parallel loop over [0, n). Work items must be independent; callers
/// pre-derive per-index RNG seeds so results do not depend on scheduling.
/// Nested calls run serially to avoid oversubscription.
template <typename Fn>
void parallel_for(std::int64_t n, Fn&& fn) {
    const int workers = detail::inside_worker ? 1 : worker_count();
    if (workers <= 1 || n <= 1) {
        for (std::int64_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::int64_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    std::exception_ptr error;
    std::mutex error_mutex;
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            detail::inside_worker = true;
            for (;;) {
                const std::int64_t i = next.fetch_add(1);
                if (i >= n) break;
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

}  // namespace mate
