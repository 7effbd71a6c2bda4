#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace policyprobe {

// Deterministic randomness helpers. std::shuffle and the std distributions
// are implementation-defined, so anything that must reproduce bit-identical
// results across platforms (splits, shot selection) goes through these.

inline std::uint64_t bounded_uint(std::mt19937_64& rng, std::uint64_t n) {
    // rejection sampling, unbiased
    if (n == 0) return 0;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x = rng();
    while (x >= limit) x = rng();
    return x % n;
}

template <typename T>
void deterministic_shuffle(std::vector<T>& items, std::mt19937_64& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(bounded_uint(rng, i));
        std::swap(items[i - 1], items[j]);
    }
}

// Uniform double in [0,1) from the top 53 bits.
inline double unit_real(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace policyprobe
