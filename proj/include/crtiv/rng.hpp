#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <limits>

namespace crtiv {

constexpr std::uint64_t splitmix64(std::uint64_t& state) noexcept {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// xoshiro256** seeded through splitmix64. Satisfies
/// UniformRandomBitGenerator so it can drive <random> distributions.
class Xoshiro256 {
   public:
    using result_type = std::uint64_t;

    explicit Xoshiro256(std::uint64_t seed = 0) noexcept { reseed(seed); }

    void reseed(std::uint64_t seed) noexcept {
        std::uint64_t sm = seed;
        for (auto& word : s_) word = splitmix64(sm);
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, bound) by Lemire's multiply-shift with rejection.
    std::uint64_t below(std::uint64_t bound) noexcept {
        __uint128_t m = static_cast<__uint128_t>((*this)()) * bound;
        auto low = static_cast<std::uint64_t>(m);
        if (low < bound) {
            const std::uint64_t threshold = (0 - bound) % bound;
            while (low < threshold) {
                m = static_cast<__uint128_t>((*this)()) * bound;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

   private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
        return (x << k) | (x >> (64 - k));
    }
    std::array<std::uint64_t, 4> s_{};
};

/// Seed for an independent stream identified by a tuple of counters. Each
/// counter is folded in through splitmix64, so the derived seed depends only
/// on (master, counters) and never on scheduling.
inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> counters) noexcept {
    std::uint64_t state = master;
    std::uint64_t h = splitmix64(state);
    for (auto c : counters) {
        state = h ^ (c + 0x632BE59BD9B4E019ULL);
        h = splitmix64(state);
    }
    return h;
}

}  // namespace crtiv
