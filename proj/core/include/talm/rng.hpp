#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace talm {

/// 64-bit FNV-1a over a byte string. Used to derive named sub-seeds so that
/// corpus, split, init, batch and eval randomness can be varied independently
/// from one global seed.
constexpr std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (char c : s) {
        h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
        h *= 0x100000001b3ull;
    }
    return h;
}

constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

/// Derive a sub-seed from (seed, tag). Stable across platforms and runs.
constexpr std::uint64_t sub_seed(std::uint64_t seed, std::string_view tag) {
    return splitmix64(seed ^ fnv1a64(tag));
}

/// Mix additional integer keys into a seed.
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t k) {
    return splitmix64(seed ^ (0x9e3779b97f4a7c15ull + k));
}

/// Small deterministic PRNG (splitmix64 stream). We avoid <random>
/// distributions on purpose: their output is implementation-defined, and
/// checkpoints / manifests are required to be bit-reproducible.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ull;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). n must be > 0.
    std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

    /// Standard normal via Box-Muller (deterministic, no cached spare).
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    /// Child generator for a named purpose.
    Rng fork(std::string_view tag) { return Rng(sub_seed(next_u64(), tag)); }

private:
    std::uint64_t state_;
};

/// Portable Fisher-Yates shuffle (std::shuffle is implementation-defined).
template <typename T>
void seeded_shuffle(std::vector<T>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(rng.below(i));
        std::swap(v[i - 1], v[j]);
    }
}

}  // namespace talm
