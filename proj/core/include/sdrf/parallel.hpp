// Copyright (c) The sdrf Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace sdrf {

/// Runs fn(worker_id, begin, end) over a static contiguous partition of
/// [0, n). With threads <= 1 the call is inline on the current thread.
/// Workers never share output state; callers reduce per-worker buffers in
/// worker order to keep results deterministic for a fixed thread count.
inline void parallel_for(std::size_t n, int threads, const std::function<void(int, std::size_t, std::size_t)>& fn) {
    if (n == 0) return;
    if (threads <= 1 || n == 1) {
        fn(0, 0, n);
        return;
    }
    const std::size_t workers = std::min<std::size_t>(std::size_t(threads), n);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = w * chunk;
        const std::size_t end = std::min(n, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([&fn, w, begin, end] { fn(int(w), begin, end); });
    }
    for (auto& t : pool) t.join();
}

}  // namespace sdrf
