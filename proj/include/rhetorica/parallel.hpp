#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace rhetorica {

inline int& thread_count() {
    static int n = 1;
    return n;
}

inline void set_thread_count(int n) {
    thread_count() = std::max(1, n);
}

// Runs fn(begin, end) over fixed-size blocks of [0, n). Blocks are assigned
// to workers round-robin, but block boundaries and any per-block outputs are
// independent of the worker count, so reductions done block-by-block in index
// order stay deterministic.
inline void parallel_blocks(std::size_t n, std::size_t block,
                            const std::function<void(std::size_t, std::size_t)>& fn) {
    if (n == 0) return;
    const int workers = thread_count();
    const std::size_t nblocks = (n + block - 1) / block;
    if (workers <= 1 || nblocks <= 1) {
        for (std::size_t b = 0; b < nblocks; ++b)
            fn(b * block, std::min(n, (b + 1) * block));
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t b = static_cast<std::size_t>(w); b < nblocks;
                 b += static_cast<std::size_t>(workers))
                fn(b * block, std::min(n, (b + 1) * block));
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace rhetorica
