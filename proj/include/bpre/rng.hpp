#pragma once

// Portable, counter-derivable random streams.
//
// Every stochastic routine in the library draws from `Rng` (xoshiro256**),
// seeded through SplitMix64. Independent substreams are obtained by hashing
// a base seed with stream identifiers (`derive_seed`), so replicate r of an
// experiment never shares state with replicate r' and results do not depend
// on scheduling. All integer/real conversions are spelled out here so the
// bit stream is identical on every platform; no <random> distributions are
// used.

#include <array>
#include <cstdint>
#include <initializer_list>
#include <limits>

namespace bpre {

inline constexpr std::uint64_t splitmix64_next(std::uint64_t& state) noexcept {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Stateless 64-bit mix (SplitMix64 finalizer applied to `x`).
inline constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    std::uint64_t s = x;
    return splitmix64_next(s);
}

/// Hash a base seed together with an ordered list of stream identifiers.
inline constexpr std::uint64_t derive_seed(std::uint64_t base,
                                           std::initializer_list<std::uint64_t> ids) noexcept {
    std::uint64_t h = mix64(base ^ 0x6A09E667F3BCC909ULL);
    for (std::uint64_t id : ids) {
        h = mix64(h ^ mix64(id + 0x243F6A8885A308D3ULL));
    }
    return h;
}

/// Map a 64-bit word to a double in [0, 1) using the top 53 bits.
inline constexpr double to_unit(std::uint64_t x) noexcept {
    return static_cast<double>(x >> 11) * 0x1.0p-53;
}

class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed = 0) noexcept { reseed(seed); }

    void reseed(std::uint64_t seed) noexcept {
        std::uint64_t sm = seed;
        for (auto& w : s_) w = splitmix64_next(sm);
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

    double uniform() noexcept { return to_unit((*this)()); }

    /// Uniform integer in [0, bound), bound > 0 (Lemire's multiply-shift with rejection).
    std::uint64_t below(std::uint64_t bound) noexcept {
        unsigned __int128 m = static_cast<unsigned __int128>((*this)()) * bound;
        auto low = static_cast<std::uint64_t>(m);
        if (low < bound) {
            const std::uint64_t threshold = (0 - bound) % bound;
            while (low < threshold) {
                m = static_cast<unsigned __int128>((*this)()) * bound;
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

}  // namespace bpre
