#pragma once

// Fixed-chunk parallel reductions. Work is split into chunks whose boundaries
// depend only on the problem size, each chunk is reduced serially, and chunk
// results are combined pairwise in index order, so the result is independent
// of the number of threads. CKL_THREADS caps the thread count.

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace ckl {

inline unsigned thread_count() {
    unsigned n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("CKL_THREADS")) {
        const int v = std::atoi(env);
        if (v >= 1) n = std::min(n, unsigned(v));
    }
    return n;
}

/// Runs body(chunk_index, begin, end) for every chunk of [0, n); chunk size is fixed.
template <class Body>
void parallel_chunks(std::size_t n, std::size_t chunk, Body&& body) {
    const std::size_t nchunks = (n + chunk - 1) / chunk;
    const unsigned nthreads = std::min<std::size_t>(thread_count(), std::max<std::size_t>(nchunks, 1));
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t c = next.fetch_add(1);
            if (c >= nchunks) return;
            try {
                body(c, c * chunk, std::min(n, (c + 1) * chunk));
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                next = nchunks;
            }
        }
    };
    if (nthreads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < nthreads; ++t) pool.emplace_back(worker);
        for (std::thread& t : pool) t.join();
    }
    if (error) std::rethrow_exception(error);
}

/// Pairwise sum in index order.
template <class T, class Add>
T pairwise_reduce(std::vector<T> v, T zero, Add add) {
    if (v.empty()) return zero;
    while (v.size() > 1) {
        std::vector<T> next;
        for (std::size_t i = 0; i + 1 < v.size(); i += 2) next.push_back(add(v[i], v[i + 1]));
        if (v.size() % 2) next.push_back(v.back());
        v = std::move(next);
    }
    return v.front();
}

inline constexpr std::size_t kChunk = 2048;

/// Deterministic parallel sum of term(i) for i in [0, n).
template <class Term>
double parallel_sum(std::size_t n, Term&& term) {
    const std::size_t nchunks = (n + kChunk - 1) / kChunk;
    std::vector<double> partial(nchunks, 0.0);
    parallel_chunks(n, kChunk, [&](std::size_t c, std::size_t b, std::size_t e) {
        double s = 0.0;
        for (std::size_t i = b; i < e; ++i) s += term(i);
        partial[c] = s;
    });
    return pairwise_reduce(std::move(partial), 0.0, [](double a, double b) { return a + b; });
}

}  // namespace ckl
