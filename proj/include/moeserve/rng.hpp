// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

namespace moeserve {

// xoshiro256** seeded through splitmix64. The generator is part of the file
// format contract: plans and traces must reproduce bit-identically for a
// given seed, so the algorithm is pinned instead of relying on std::mt19937_64
// or any library distribution.
class Xoshiro256 {
  public:
    explicit Xoshiro256(uint64_t seed) {
        uint64_t x = seed;
        for (auto& word : state_) word = splitmix64(x);
    }

    uint64_t next() {
        const uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Draw in [0, n). Plain modulo: the bias is < n / 2^64 and the draw
    // sequence stays trivially portable across implementations.
    uint64_t bounded(uint64_t n) { return next() % n; }

  private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    static uint64_t splitmix64(uint64_t& x) {
        x += 0x9E3779B97F4A7C15ULL;
        uint64_t z = x;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    std::array<uint64_t, 4> state_{};
};

// First n positions of a partial Fisher-Yates shuffle of {0, ..., count-1}:
// a uniformly random n-subset, in selection order.
inline std::vector<int> sample_without_replacement(int count, int n, Xoshiro256& rng) {
    std::vector<int> ids(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i) ids[static_cast<size_t>(i)] = i;
    for (int i = 0; i < n; ++i) {
        const int j = i + static_cast<int>(rng.bounded(static_cast<uint64_t>(count - i)));
        std::swap(ids[static_cast<size_t>(i)], ids[static_cast<size_t>(j)]);
    }
    ids.resize(static_cast<size_t>(n));
    return ids;
}

}  // namespace moeserve
