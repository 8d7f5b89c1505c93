#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace crosstalk {

// Counter-based deterministic random streams.
//
// Every consumer of randomness owns a SubStream keyed by (seed, label, salt)
// and indexes values by a local counter. Streams never interleave, so adding
// traffic to a simulation does not disturb the draws seen by other actors.
// Paired runs (same seed, different load level) therefore share the exact
// same jitter and dither sequences.

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline std::uint64_t hash_label(std::string_view label) {
    std::uint64_t h = 0xCBF29CE484222325ULL;  // FNV-1a
    for (char c : label) {
        h ^= static_cast<std::uint8_t>(c);
        h *= 0x100000001B3ULL;
    }
    return h;
}

class SubStream {
public:
    SubStream() = default;
    SubStream(std::uint64_t seed, std::string_view label, std::uint64_t salt = 0)
        : key_(splitmix64(seed ^ splitmix64(hash_label(label) + salt))) {}

    std::uint64_t bits(std::uint64_t index) const { return splitmix64(key_ + index); }

    // Uniform in [0, 1).
    double uniform(std::uint64_t index) const {
        return static_cast<double>(bits(index) >> 11) * 0x1.0p-53;
    }

    // Exponential with the given mean; strictly positive.
    double exponential(std::uint64_t index, double mean) const {
        double u = uniform(index);
        return -mean * std::log1p(-u);
    }

    // Standard normal via Box-Muller on two derived uniforms.
    double normal(std::uint64_t index) const {
        double u1 = static_cast<double>(bits(2 * index) >> 11) * 0x1.0p-53;
        double u2 = static_cast<double>(bits(2 * index + 1) >> 11) * 0x1.0p-53;
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    std::uint64_t key_ = 0;
};

}  // namespace crosstalk
