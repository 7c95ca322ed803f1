#pragma once

#include <cstdint>
#include <functional>
#include <thread>
#include <vector>

namespace rtar {

/// Global worker count for kernel-internal parallelism. 1 = fully serial.
inline int& num_threads() {
    static int n = 1;
    return n;
}

inline void set_num_threads(int n) { num_threads() = n < 1 ? 1 : n; }

/// Splits [0, count) across workers. Each index is processed exactly once and
/// every output element is written by exactly one worker, so results are
/// bitwise identical for any thread count.
inline void parallel_for(std::int64_t count, const std::function<void(std::int64_t)>& fn) {
    const int nt = num_threads();
    if (nt <= 1 || count < 2) {
        for (std::int64_t i = 0; i < count; ++i) fn(i);
        return;
    }
    const int workers = static_cast<int>(std::min<std::int64_t>(nt, count));
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::int64_t i = w; i < count; i += workers) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace rtar
