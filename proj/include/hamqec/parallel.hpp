#pragma once

#include <algorithm>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace hamqec {

// runs f(0..n-1) on up to `threads` workers; each index is handled by exactly one worker
inline void parallel_for(int n, int threads, const std::function<void(int)> &f) {
    threads = std::max(1, std::min(threads, n));
    if (threads == 1) {
        for (int i = 0; i < n; ++i) f(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errs(threads);
    for (int w = 0; w < threads; ++w)
        pool.emplace_back([&, w] {
            try {
                for (int i = w; i < n; i += threads) f(i);
            } catch (...) {
                errs[w] = std::current_exception();
            }
        });
    for (auto &t : pool) t.join();
    for (auto &e : errs)
        if (e) std::rethrow_exception(e);
}

}  // namespace hamqec
