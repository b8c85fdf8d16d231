// Test-only oracles, deliberately independent of the library code paths
// they check: a plain RK4 integrator for the master equation (the library
// evolves small systems with a matrix exponential), an O(n^2) pair counter
// (the library uses a two-pointer sweep), and small statistics helpers.

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "qdot/ladder.hpp"

namespace oracle {

// Fixed-step RK4 for dp/dt = M p with an explicit step count.
inline std::vector<double> rk4(const qdot::Matrix& m, std::vector<double> p, double t,
                               std::size_t n_steps) {
    const double h = t / static_cast<double>(n_steps);
    std::vector<double> k1, k2, k3, k4, tmp(p.size());
    for (std::size_t s = 0; s < n_steps; ++s) {
        k1 = m * p;
        for (std::size_t i = 0; i < p.size(); ++i) tmp[i] = p[i] + 0.5 * h * k1[i];
        k2 = m * tmp;
        for (std::size_t i = 0; i < p.size(); ++i) tmp[i] = p[i] + 0.5 * h * k2[i];
        k3 = m * tmp;
        for (std::size_t i = 0; i < p.size(); ++i) tmp[i] = p[i] + h * k3[i];
        k4 = m * tmp;
        for (std::size_t i = 0; i < p.size(); ++i)
            p[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    return p;
}

// All (start, stop) pairs with tau in [lo_fs, hi_fs), binned exhaustively.
// Bin layout mirrors the library convention (centers at k * width).
inline std::vector<std::uint64_t> brute_force_pairs(std::span<const std::uint64_t> start,
                                                    std::span<const std::uint64_t> stop,
                                                    std::int64_t width_fs,
                                                    std::int64_t k_min, std::int64_t k_max) {
    std::vector<std::uint64_t> counts(static_cast<std::size_t>(k_max - k_min + 1), 0);
    for (const auto ts : start)
        for (const auto tp : stop) {
            const __int128 tau2 = 2 * (__int128(tp) - __int128(ts));
            if (tau2 < __int128(2 * k_min - 1) * width_fs ||
                tau2 >= __int128(2 * k_max + 1) * width_fs)
                continue;
            __int128 q = (tau2 + width_fs) / (2 * width_fs);
            if ((tau2 + width_fs) % (2 * width_fs) != 0 && tau2 + width_fs < 0) --q;
            ++counts[static_cast<std::size_t>(static_cast<std::int64_t>(q) - k_min)];
        }
    return counts;
}

inline double mean(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

// Sample mean of exponentially distributed delays with the given RNG; used
// to freeze expected decay means independent of the simulator.
inline double exponential_sample_mean(double mean_ps, std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::exponential_distribution<double> exp1(1.0);
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += exp1(rng) * mean_ps;
    return s / static_cast<double>(n);
}

} // namespace oracle
