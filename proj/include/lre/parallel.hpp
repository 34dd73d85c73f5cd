#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace lre {

/// Resolve a --threads style request: <= 0 means machine parallelism.
inline int resolve_threads(int requested) {
    if (requested > 0) return requested;
    const unsigned hc = std::thread::hardware_concurrency();
    return hc > 0 ? static_cast<int>(hc) : 1;
}

/// Run fn(begin, end) over a static partition of [0, n). Each worker owns a
/// contiguous range, so writes into per-index slots are race-free and the
/// result cannot depend on the number of threads.
template <class Fn>
void parallel_chunks(std::size_t n, int threads, Fn&& fn) {
    if (n == 0) return;
    const std::size_t workers =
        std::min<std::size_t>(static_cast<std::size_t>(resolve_threads(threads)), n);
    if (workers <= 1) {
        fn(std::size_t{0}, n);
        return;
    }
    const std::size_t chunk = (n + workers - 1) / workers;
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto run = [&](std::size_t begin, std::size_t end) {
        try {
            fn(begin, end);
        } catch (...) {
            std::lock_guard<std::mutex> lock(error_mutex);
            if (!first_error) first_error = std::current_exception();
        }
    };
    for (std::size_t w = 1; w < workers; ++w) {
        const std::size_t begin = w * chunk;
        const std::size_t end = std::min(n, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back(run, begin, end);
    }
    run(0, std::min(n, chunk));
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

} // namespace lre
