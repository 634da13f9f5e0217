#pragma once

#include <cstdint>
#include <vector>

namespace ftdl {

/// splitmix64: tiny, seedable, identical output on every platform.
/// Used for weight init and shard shuffles so runs are reproducible
/// independent of the standard library's distribution implementations.
class SplitMix64 {
  public:
    explicit SplitMix64(uint64_t seed) : state_(seed) {}

    uint64_t next() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1).
    double next_double() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Uniform double in [-a, a).
    double next_symmetric(double a) { return (2.0 * next_double() - 1.0) * a; }

    /// Uniform integer in [0, n). n must be > 0.
    uint64_t next_below(uint64_t n) {
        // fixed-point multiply; bias is negligible for the index ranges used here
        return static_cast<uint64_t>((static_cast<__uint128_t>(next()) * n) >> 64);
    }

  private:
    uint64_t state_;
};

/// Mix several seed components into one 64-bit stream seed.
inline uint64_t derive_seed(uint64_t seed, uint64_t a, uint64_t b = 0, uint64_t c = 0) {
    SplitMix64 m(seed);
    uint64_t s = m.next() ^ (a * 0x9e3779b97f4a7c15ULL);
    SplitMix64 m2(s);
    s = m2.next() ^ (b * 0xc2b2ae3d27d4eb4fULL);
    SplitMix64 m3(s);
    return m3.next() ^ (c * 0x165667b19e3779f9ULL);
}

/// Fisher-Yates shuffle driven by SplitMix64.
template <typename T>
void shuffle(std::vector<T>& v, SplitMix64& rng) {
    for (size_t i = v.size(); i > 1; --i) {
        size_t j = static_cast<size_t>(rng.next_below(i));
        std::swap(v[i - 1], v[j]);
    }
}

}  // namespace ftdl
