#pragma once

#include <cmath>
#include <cstdint>

namespace torus_kpz {

// Counter-based random numbers (Philox4x32-10).
//
// Every draw is a pure function of (key, counter), so a stream can be
// replayed from any point without storing state. Replica streams are derived
// from (master seed, stream id); within a stream the counter encodes
// (step index, draw index), which is what makes NoisePath replay and
// propagator column sharing exact by construction.

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

struct PhiloxBlock {
    std::uint32_t v[4];
};

inline void philox_round(std::uint32_t& c0, std::uint32_t& c1, std::uint32_t& c2,
                         std::uint32_t& c3, std::uint32_t k0, std::uint32_t k1) {
    constexpr std::uint64_t M0 = 0xD2511F53ULL;
    constexpr std::uint64_t M1 = 0xCD9E8D57ULL;
    const std::uint64_t p0 = M0 * c0;
    const std::uint64_t p1 = M1 * c2;
    const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
    const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
    c0 = hi1 ^ c1 ^ k0;
    c1 = lo1;
    c2 = hi0 ^ c3 ^ k1;
    c3 = lo0;
}

inline PhiloxBlock philox4x32(std::uint32_t k0, std::uint32_t k1, std::uint32_t c0,
                              std::uint32_t c1, std::uint32_t c2, std::uint32_t c3) {
    constexpr std::uint32_t W0 = 0x9E3779B9U;
    constexpr std::uint32_t W1 = 0xBB67AE85U;
    for (int r = 0; r < 10; ++r) {
        philox_round(c0, c1, c2, c3, k0, k1);
        k0 += W0;
        k1 += W1;
    }
    return PhiloxBlock{{c0, c1, c2, c3}};
}

// Uniform in (0,1), never exactly 0 or 1.
inline double u32pair_to_unit(std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t bits = (static_cast<std::uint64_t>(hi) << 32) | lo;
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace detail

// A stateless Gaussian source: stream identity is fixed at construction,
// individual draws are addressed by (step, index).
class CounterRng {
  public:
    CounterRng() : key0_(0), key1_(0) {}

    CounterRng(std::uint64_t master_seed, std::uint64_t stream) {
        std::uint64_t s = master_seed;
        const std::uint64_t a = detail::splitmix64(s);
        s = a ^ (stream * 0xA24BAED4963EE407ULL + 0x9FB21C651E98DF25ULL);
        const std::uint64_t b = detail::splitmix64(s);
        key0_ = static_cast<std::uint32_t>(b);
        key1_ = static_cast<std::uint32_t>(b >> 32);
    }

    // i-th standard Gaussian of a given step. Consecutive indices share a
    // Philox block pairwise (one Box-Muller per block).
    double normal(std::uint64_t step, std::uint64_t index) const {
        const std::uint64_t block = index >> 1;
        const auto r = detail::philox4x32(key0_, key1_,
                                          static_cast<std::uint32_t>(block),
                                          static_cast<std::uint32_t>(block >> 32),
                                          static_cast<std::uint32_t>(step),
                                          static_cast<std::uint32_t>(step >> 32));
        const double u1 = detail::u32pair_to_unit(r.v[0], r.v[1]);
        const double u2 = detail::u32pair_to_unit(r.v[2], r.v[3]);
        const double rad = std::sqrt(-2.0 * std::log(u1));
        const double ang = 6.283185307179586476925286766559 * u2;
        return (index & 1) ? rad * std::sin(ang) : rad * std::cos(ang);
    }

    // Fills out[0..count) with the Gaussians (step, 0..count), computing each
    // Box-Muller pair once.
    template <typename It>
    void normals(std::uint64_t step, std::uint64_t count, It out) const {
        for (std::uint64_t block = 0; block * 2 < count; ++block) {
            const auto r = detail::philox4x32(key0_, key1_,
                                              static_cast<std::uint32_t>(block),
                                              static_cast<std::uint32_t>(block >> 32),
                                              static_cast<std::uint32_t>(step),
                                              static_cast<std::uint32_t>(step >> 32));
            const double u1 = detail::u32pair_to_unit(r.v[0], r.v[1]);
            const double u2 = detail::u32pair_to_unit(r.v[2], r.v[3]);
            const double rad = std::sqrt(-2.0 * std::log(u1));
            const double ang = 6.283185307179586476925286766559 * u2;
            *out++ = rad * std::cos(ang);
            if (block * 2 + 1 < count) *out++ = rad * std::sin(ang);
        }
    }

    // Uniform in (0,1) addressed like normal().
    double uniform(std::uint64_t step, std::uint64_t index) const {
        const auto r = detail::philox4x32(key0_, key1_,
                                          static_cast<std::uint32_t>(index),
                                          static_cast<std::uint32_t>(index >> 32),
                                          static_cast<std::uint32_t>(step),
                                          static_cast<std::uint32_t>(step >> 32) ^ 0x5A5A5A5AU);
        return detail::u32pair_to_unit(r.v[0], r.v[1]);
    }

    std::uint32_t key0() const { return key0_; }
    std::uint32_t key1() const { return key1_; }

  private:
    std::uint32_t key0_;
    std::uint32_t key1_;
};

}  // namespace torus_kpz
