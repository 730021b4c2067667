#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

#include "stg/error.hpp"

namespace stg {

// Counter-based deterministic generator. A draw is a pure function of
// (seed, position), so identical seeds and positions give identical bits on
// every platform, independent of how many values were drawn elsewhere.
struct RngState {
    std::uint64_t seed = 0;
    std::uint64_t pos = 0;

    RngState() = default;
    explicit RngState(std::uint64_t s, std::uint64_t p = 0) : seed(s), pos(p) {}

    std::uint64_t next_u64() {
        std::uint64_t x = seed + 0x9E3779B97F4A7C15ULL * (pos + 1);
        ++pos;
        x ^= x >> 30;
        x *= 0xBF58476D1CE4E5B9ULL;
        x ^= x >> 27;
        x *= 0x94D049BB133111EBULL;
        x ^= x >> 31;
        return x;
    }

    // Uniform in [0, 1) with 53 random bits.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    float next_float() { return static_cast<float>(next_double()); }

    // Unbiased uniform integer in [0, n).
    std::uint64_t next_below(std::uint64_t n) {
        if (n == 0) throw ParameterError("next_below: n must be positive");
        std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
        std::uint64_t x = next_u64();
        while (x >= limit) x = next_u64();
        return x % n;
    }

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // Approximate standard normal as a sum of 12 uniforms. Uses only
    // additions, so draws are bit-identical across platforms and libm builds.
    double normal() {
        double acc = 0.0;
        for (int i = 0; i < 12; ++i) acc += next_double();
        return acc - 6.0;
    }

    // Independent named stream derived from this state's seed.
    RngState substream(std::string_view name) const {
        std::uint64_t h = 0xCBF29CE484222325ULL;  // FNV-1a 64
        for (char c : name) {
            h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
            h *= 0x100000001B3ULL;
        }
        RngState mix(seed ^ h);
        return RngState(mix.next_u64());
    }

    RngState substream(std::uint64_t salt) const {
        RngState mix(seed ^ (salt * 0x9E3779B97F4A7C15ULL + 0x632BE59BD9B4E019ULL));
        return RngState(mix.next_u64());
    }
};

}  // namespace stg
