#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace ropelab::detail {

// Runs fn(begin, end, worker) over contiguous blocks of [0, n). Blocks are
// assigned by index so callers can reduce per-worker results in order.
template <class Fn>
void parallel_blocks(std::size_t n, unsigned threads, Fn&& fn) {
    const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(threads, n));
    if (workers == 1) {
        fn(std::size_t{0}, n, std::size_t{0});
        return;
    }
    const std::size_t block = (n + workers - 1) / workers;
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = std::min(n, w * block);
        const std::size_t end = std::min(n, begin + block);
        pool.emplace_back([&fn, begin, end, w] { fn(begin, end, w); });
    }
}

inline std::size_t worker_count(std::size_t n, unsigned threads) {
    return std::max<std::size_t>(1, std::min<std::size_t>(threads, n));
}

} // namespace ropelab::detail
