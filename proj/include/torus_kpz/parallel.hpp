#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace torus_kpz {

// Index-parallel map with deterministic result placement: item i writes only
// slot i, so the outcome is identical for any worker count (a single worker
// reproduces the multi-worker run exactly).
template <typename Fn>
void parallel_for_index(std::size_t n, int workers, Fn&& fn) {
    if (workers <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    std::vector<std::thread> pool;
    const std::size_t w = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
    pool.reserve(w);
    for (std::size_t t = 0; t < w; ++t) {
        pool.emplace_back([&, t] {
            try {
                for (;;) {
                    const std::size_t i = next.fetch_add(1);
                    if (i >= n) break;
                    fn(i);
                }
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace torus_kpz
