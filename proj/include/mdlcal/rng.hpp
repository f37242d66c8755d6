#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace mdlcal {

// Deterministic 64-bit stream (splitmix64). This is the project-wide source of
// randomness: scenario generation, probe sampling, and tests all draw from it so
// that identical seeds reproduce identical bytes on any platform.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1) with 53 random bits.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double next_range(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // Exp(1) by inverse CDF.
    double next_exp() { return -std::log1p(-next_double()); }

    // Dirichlet(1,...,1): normalized Exp(1) draws.
    std::vector<double> next_simplex(std::size_t dim) {
        std::vector<double> v(dim);
        double total = 0.0;
        for (auto& x : v) {
            x = next_exp();
            total += x;
        }
        if (total <= 0.0) {
            // all draws zero is impossible in exact arithmetic; guard anyway
            for (auto& x : v) x = 1.0 / static_cast<double>(dim);
            return v;
        }
        for (auto& x : v) x /= total;
        return v;
    }

private:
    std::uint64_t state_;
};

}  // namespace mdlcal
