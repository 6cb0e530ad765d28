#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace currmask {

using Rng = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view s) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Independent stream for a named component of a run.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::string_view component) noexcept {
    return splitmix64(base ^ fnv1a64(component));
}

inline Rng make_rng(std::uint64_t seed) { return Rng(splitmix64(seed)); }

// Uniform double in [0, 1) built from the top 53 bits; avoids the
// implementation-defined generate_canonical.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Uniform integer in [0, n) by rejection on the raw 64-bit output.
std::uint64_t uniform_index(Rng& rng, std::uint64_t n);

// Inverse-CDF draw from a probability vector. Entries need not sum to exactly one.
std::size_t sample_categorical(std::span<const double> probs, Rng& rng);

// Standard normal via Box-Muller over uniform01 (no cached spare, so the stream
// position is a pure function of the number of draws).
double standard_normal(Rng& rng);

}  // namespace currmask
