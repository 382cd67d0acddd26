#pragma once

#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace mirrorsim {

// Splits [0, n) into one contiguous block per worker and runs
// fn(worker_index, begin, end) on each.  Every index is owned by exactly one
// worker, and the block boundaries depend only on (n, workers), never on
// scheduling, so any per-index output is identical for any worker count.
// fn runs on the calling thread when workers <= 1.
template <class Fn>
void parallel_chunks(std::size_t n, unsigned workers, Fn&& fn) {
    if (n == 0) return;
    if (workers <= 1 || n == 1) {
        fn(0u, std::size_t{0}, n);
        return;
    }
    if (workers > n) workers = static_cast<unsigned>(n);

    std::vector<std::thread> pool;
    pool.reserve(workers);
    std::exception_ptr error;
    std::mutex error_mutex;
    for (unsigned w = 0; w < workers; ++w) {
        const std::size_t begin = n * w / workers;
        const std::size_t end = n * (w + 1) / workers;
        pool.emplace_back([&, w, begin, end] {
            try {
                fn(w, begin, end);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

template <class Fn>
void parallel_for(std::size_t n, unsigned workers, Fn&& fn) {
    parallel_chunks(n, workers, [&](unsigned, std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) fn(i);
    });
}

}  // namespace mirrorsim
