#pragma once

#include <cstddef>
#include <limits>
#include <utility>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mdlcal {

// Fixed chunk width for all reductions. Chunk boundaries depend only on the
// problem size, never on the thread count, so results are bit-identical whether
// the loop runs on one thread or many.
inline constexpr std::size_t kReductionChunk = 1024;

namespace detail {
inline std::size_t chunk_count(std::size_t n) {
    return (n + kReductionChunk - 1) / kReductionChunk;
}
}  // namespace detail

// Sum of term(i) for i in [0, n). Each chunk accumulates serially in index
// order; chunk partials combine in chunk order.
template <typename Term>
double chunked_sum(std::size_t n, Term&& term) {
    if (n == 0) return 0.0;
    const std::size_t chunks = detail::chunk_count(n);
    std::vector<double> partial(chunks, 0.0);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (long long c = 0; c < static_cast<long long>(chunks); ++c) {
        const std::size_t begin = static_cast<std::size_t>(c) * kReductionChunk;
        const std::size_t end = std::min(begin + kReductionChunk, n);
        double acc = 0.0;
        for (std::size_t i = begin; i < end; ++i) acc += term(i);
        partial[static_cast<std::size_t>(c)] = acc;
    }
    double total = 0.0;
    for (double p : partial) total += p;
    return total;
}

// Independent iterations; body(i) must not touch shared mutable state.
template <typename Body>
void parallel_for(std::size_t n, Body&& body) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (long long i = 0; i < static_cast<long long>(n); ++i) {
        body(static_cast<std::size_t>(i));
    }
}

// Argmin of cost(i) over [0, n); ties resolve to the lowest index regardless of
// scheduling. Returns {index, cost}; {n, +inf} when n == 0.
template <typename Cost>
std::pair<std::size_t, double> chunked_argmin(std::size_t n, Cost&& cost) {
    if (n == 0) return {n, std::numeric_limits<double>::infinity()};
    const std::size_t chunks = detail::chunk_count(n);
    std::vector<std::pair<std::size_t, double>> partial(
        chunks, {n, std::numeric_limits<double>::infinity()});
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (long long c = 0; c < static_cast<long long>(chunks); ++c) {
        const std::size_t begin = static_cast<std::size_t>(c) * kReductionChunk;
        const std::size_t end = std::min(begin + kReductionChunk, n);
        std::size_t best = begin;
        double best_cost = cost(begin);
        for (std::size_t i = begin + 1; i < end; ++i) {
            const double v = cost(i);
            if (v < best_cost) {
                best_cost = v;
                best = i;
            }
        }
        partial[static_cast<std::size_t>(c)] = {best, best_cost};
    }
    std::pair<std::size_t, double> out = partial[0];
    for (std::size_t c = 1; c < chunks; ++c) {
        if (partial[c].second < out.second) out = partial[c];
    }
    return out;
}

namespace reference {

// Plain serial twins of the kernels above, kept for testing the parallel path.

template <typename Term>
double sum(std::size_t n, Term&& term) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += term(i);
    return acc;
}

template <typename Cost>
std::pair<std::size_t, double> argmin(std::size_t n, Cost&& cost) {
    if (n == 0) return {n, std::numeric_limits<double>::infinity()};
    std::size_t best = 0;
    double best_cost = cost(0);
    for (std::size_t i = 1; i < n; ++i) {
        const double v = cost(i);
        if (v < best_cost) {
            best_cost = v;
            best = i;
        }
    }
    return {best, best_cost};
}

}  // namespace reference

}  // namespace mdlcal
