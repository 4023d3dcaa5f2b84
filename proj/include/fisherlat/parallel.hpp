#pragma once

#include <cstddef>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

// Parallelism policy: every OpenMP kernel in this project must produce the
// same bits for any thread count. Loops over independent outputs are safe as
// is; reductions go through fixed-size chunks that are combined in chunk
// order, so the summation order never depends on the schedule.

namespace fisherlat {

inline void set_threads(int n) {
#ifdef _OPENMP
    if (n > 0) omp_set_num_threads(n);
#else
    (void)n;
#endif
}

inline int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

inline double now_seconds() {
#ifdef _OPENMP
    return omp_get_wtime();
#else
    return 0.0;
#endif
}

constexpr std::size_t kReduceChunk = 64;

// Deterministic parallel sum of f(i) over [0, n). f must be pure.
template <typename F>
double chunked_sum(std::size_t n, F&& f) {
    const std::size_t nchunks = (n + kReduceChunk - 1) / kReduceChunk;
    std::vector<double> partial(nchunks, 0.0);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(nchunks); ++c) {
        const std::size_t lo = static_cast<std::size_t>(c) * kReduceChunk;
        const std::size_t hi = lo + kReduceChunk < n ? lo + kReduceChunk : n;
        double acc = 0.0;
        for (std::size_t i = lo; i < hi; ++i) acc += f(i);
        partial[static_cast<std::size_t>(c)] = acc;
    }
    double total = 0.0;
    for (double p : partial) total += p;
    return total;
}

// Deterministic parallel accumulation of per-index vectors into `out`:
// out[k] = sum_i contrib(i)[k]. Each chunk accumulates serially into its own
// buffer; buffers are merged in chunk order.
template <typename F>
void chunked_accumulate(std::size_t n, std::size_t dim, std::vector<double>& out, F&& add_into) {
    const std::size_t nchunks = (n + kReduceChunk - 1) / kReduceChunk;
    std::vector<std::vector<double>> partial(nchunks);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(nchunks); ++c) {
        auto& buf = partial[static_cast<std::size_t>(c)];
        buf.assign(dim, 0.0);
        const std::size_t lo = static_cast<std::size_t>(c) * kReduceChunk;
        const std::size_t hi = lo + kReduceChunk < n ? lo + kReduceChunk : n;
        for (std::size_t i = lo; i < hi; ++i) add_into(i, buf.data());
    }
    out.assign(dim, 0.0);
    for (const auto& buf : partial)
        for (std::size_t k = 0; k < dim; ++k) out[k] += buf[k];
}

}  // namespace fisherlat
