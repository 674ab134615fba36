// Copyright Contributors to the splatflow project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace splatflow {

inline int resolve_threads(int requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : int(hw);
}

/// Split [0, n) into `workers` contiguous chunks and call fn(begin, end, worker)
/// for each. The chunk assignment depends only on n and the worker count.
template <typename Fn>
void parallel_chunks(std::size_t n, int workers, Fn&& fn) {
    workers = std::max(1, std::min<int>(workers, int(std::max<std::size_t>(n, 1))));
    auto bounds = [&](int w) { return n * std::size_t(w) / std::size_t(workers); };
    if (workers == 1) {
        fn(std::size_t(0), n, 0);
        return;
    }
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(std::size_t(workers - 1));
    auto run = [&](int w) {
        try {
            fn(bounds(w), bounds(w + 1), w);
        } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
        }
    };
    for (int w = 1; w < workers; ++w) pool.emplace_back(run, w);
    run(0);
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
    parallel_chunks(n, resolve_threads(threads), [&](std::size_t b, std::size_t e, int) {
        for (std::size_t i = b; i < e; ++i) fn(i);
    });
}

} // namespace splatflow
