#pragma once

#include <atomic>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace regrace {

/// Runs fn(i) for all i in [0, n) on up to `workers` threads. Callers write
/// results into pre-sized slots indexed by i, so output order is independent
/// of scheduling. workers <= 1 runs inline. The first exception thrown by any
/// worker is rethrown after the pool joins.
inline void parallel_for(int n, int workers, const std::function<void(int)>& fn) {
    if (n <= 0) return;
    if (workers <= 1 || n == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    const int count = std::min(workers, n);
    std::atomic<int> next{0};
    std::vector<std::exception_ptr> errors(count);
    std::vector<std::thread> pool;
    pool.reserve(count);
    for (int t = 0; t < count; ++t) {
        pool.emplace_back([&, t] {
            try {
                for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    for (std::thread& th : pool) th.join();
    for (const std::exception_ptr& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

}  // namespace regrace
