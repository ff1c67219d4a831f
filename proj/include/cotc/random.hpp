#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace cotc {

// mt19937_64 output is fully specified by the standard; the distributions in
// <random> are not. These helpers keep sampled values identical across
// standard libraries.
using Rng = std::mt19937_64;

// Uniform integer in [0, n). n must be > 0.
inline std::uint64_t uniform_below(Rng& rng, std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % n);
    std::uint64_t x;
    do {
        x = rng();
    } while (x >= limit);
    return x % n;
}

// Uniform double in [0, 1).
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double standard_normal(Rng& rng) {
    double u1 = uniform01(rng);
    while (u1 <= 0.0) u1 = uniform01(rng);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

template <typename T>
void shuffle_in_place(std::vector<T>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(uniform_below(rng, i));
        std::swap(v[i - 1], v[j]);
    }
}

// k distinct indices from [0, n), in increasing order.
inline std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k, Rng& rng) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    // Partial Fisher-Yates over the first k slots.
    for (std::size_t i = 0; i < k && i < n; ++i) {
        const auto j = i + static_cast<std::size_t>(uniform_below(rng, n - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(std::min(k, n));
    std::sort(idx.begin(), idx.end());
    return idx;
}

}  // namespace cotc
