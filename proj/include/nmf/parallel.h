// Copyright 2026 The NMF Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace nmf {

/// Worker count: NMF_THREADS when set (>= 1), else the hardware concurrency.
inline int workerCount() {
    int n = static_cast<int>(std::thread::hardware_concurrency());
    if (const char* env = std::getenv("NMF_THREADS")) {
        const int v = std::atoi(env);
        if (v >= 1) n = std::min(n > 0 ? n : v, v);
    }
    return std::max(1, n);
}

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Items are handed out
/// in contiguous static blocks, so each item always runs exactly once and
/// results that depend only on i are independent of the worker count.
/// The first exception thrown by any item is rethrown on the caller.
template <typename Fn>
void parallelFor(int n, int workers, Fn&& fn) {
    workers = std::clamp(workers, 1, std::max(1, n));
    if (workers == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::exception_ptr error;
    std::mutex mu;
    std::vector<std::thread> threads;
    for (int w = 0; w < workers; ++w) {
        const int begin = static_cast<int>(static_cast<long long>(n) * w / workers);
        const int end = static_cast<int>(static_cast<long long>(n) * (w + 1) / workers);
        threads.emplace_back([&, begin, end] {
            try {
                for (int i = begin; i < end; ++i) fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(mu);
                if (!error) error = std::current_exception();
            }
        });
    }
    for (auto& t : threads) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace nmf
