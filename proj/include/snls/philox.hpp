#pragma once
// Counter-based random number generation: Philox4x32-10 + Box-Muller.
//
// Why counter-based: every Brownian increment (and every synthetic random
// field entry) gets its own counter (c0, c1, c2, tag), keyed by the 64-bit
// run seed.  Distinct counters never collide, so streams are independent by
// construction, order-insensitive, trivially parallel, and bit-reproducible
// across platforms.  The 10-round Philox4x32 generator is the standard
// choice for this (crush-resistant, cheap, no state to carry around).

#include <cmath>
#include <cstdint>

namespace snls::rng {

struct Counter {
    std::uint32_t v[4];
};

// One 10-round Philox4x32 block.  Multiplier/Weyl constants are the published
// ones; the output word order matches the reference implementation.
inline Counter philox4x32(Counter ctr, std::uint64_t key) {
    std::uint32_t k0 = static_cast<std::uint32_t>(key);
    std::uint32_t k1 = static_cast<std::uint32_t>(key >> 32);
    for (int r = 0; r < 10; ++r) {
        if (r != 0) {
            k0 += 0x9E3779B9u;  // golden-ratio Weyl increment
            k1 += 0xBB67AE85u;  // sqrt(3)-1 Weyl increment
        }
        const std::uint64_t p0 = 0xD2511F53ull * ctr.v[0];
        const std::uint64_t p1 = 0xCD9E8D57ull * ctr.v[2];
        const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
        const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
        const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
        const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
        ctr = Counter{{hi1 ^ ctr.v[1] ^ k0, lo1, hi0 ^ ctr.v[3] ^ k1, lo0}};
    }
    return ctr;
}

// Map a 32-bit word to (0,1), strictly excluding the endpoints.
inline double uniform01(std::uint32_t x) { return (x + 0.5) * 0x1p-32; }

// Standard normal draw from one Philox block (Box-Muller, cosine branch).
inline double normal(std::uint64_t key, Counter ctr) {
    const Counter out = philox4x32(ctr, key);
    const double u1 = uniform01(out.v[0]);
    const double u2 = uniform01(out.v[1]);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

// Domain tags keep independent consumers of the same seed on disjoint
// counter subspaces.
enum Tag : std::uint32_t {
    kTagBrownian = 0xB0,   // (step, channel, sample, tag)
    kTagField = 0xF1,      // (flat grid index, time index, series index, tag)
    kTagGeneric = 0xA7,    // ad-hoc test draws
};

inline double normal(std::uint64_t key, std::uint32_t c0, std::uint32_t c1, std::uint32_t c2,
                     std::uint32_t tag) {
    return normal(key, Counter{{c0, c1, c2, tag}});
}

}  // namespace snls::rng
