#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <thread>
#include <vector>

namespace chargelab {

/// Worker threads used by parallel_* helpers. Resolution order: explicit
/// set_thread_count, CHARGELAB_THREADS, hardware concurrency.
inline int& thread_count_ref() {
    static int count = [] {
        if (const char* env = std::getenv("CHARGELAB_THREADS")) {
            const int n = std::atoi(env);
            if (n >= 1) return n;
        }
        const unsigned hc = std::thread::hardware_concurrency();
        return hc ? static_cast<int>(hc) : 1;
    }();
    return count;
}

inline int thread_count() { return thread_count_ref(); }
inline void set_thread_count(int n) { thread_count_ref() = std::max(1, n); }

namespace detail {

/// Fixed chunk decomposition of [0, n): depends only on n, never on the
/// thread count, so results that combine per-chunk partials in chunk
/// order are bit-identical for any number of workers.
inline std::size_t chunk_size_for(std::size_t n) {
    const std::size_t target_chunks = 64;
    return std::max<std::size_t>(1024, (n + target_chunks - 1) / target_chunks);
}

} // namespace detail

/// Runs body(begin, end, chunk_index) over a fixed decomposition of
/// [0, n). Chunks may execute on any thread; writes must go to disjoint
/// locations or per-chunk slots.
template <class Body>
void parallel_for_chunked(std::size_t n, Body&& body) {
    if (n == 0) return;
    const std::size_t chunk = detail::chunk_size_for(n);
    const std::size_t nchunks = (n + chunk - 1) / chunk;
    const int workers = std::min<std::size_t>(thread_count(), nchunks);
    if (workers <= 1) {
        for (std::size_t ci = 0; ci < nchunks; ++ci)
            body(ci * chunk, std::min(n, (ci + 1) * chunk), ci);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t ci = w; ci < nchunks; ci += workers)
                body(ci * chunk, std::min(n, (ci + 1) * chunk), ci);
        });
    }
    for (auto& th : pool) th.join();
}

/// Deterministic parallel sum: per-chunk partials combined in chunk
/// order regardless of thread count.
template <class Fn>
double parallel_sum(std::size_t n, Fn&& term) {
    if (n == 0) return 0.0;
    const std::size_t chunk = detail::chunk_size_for(n);
    const std::size_t nchunks = (n + chunk - 1) / chunk;
    std::vector<double> partial(nchunks, 0.0);
    parallel_for_chunked(n, [&](std::size_t b, std::size_t e, std::size_t ci) {
        double s = 0.0;
        for (std::size_t i = b; i < e; ++i) s += term(i);
        partial[ci] = s;
    });
    double total = 0.0;
    for (double p : partial) total += p;
    return total;
}

} // namespace chargelab
