#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>

namespace proxgen {

/// Stateless 64-bit mixer. Used to derive independent sub-seeds from a
/// master seed and an index, and as the hash primitive for state keys.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
    return splitmix64(seed ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

/// Counter-mode keyed generator (Philox4x32-10). Produces a deterministic
/// stream for a (key, counter) pair without any shared state, which is what
/// lazily generated per-state quantities need: 2^H states cannot be
/// pre-sampled, but any single state's draw must be reproducible.
class Philox4x32 {
public:
    using Block = std::array<std::uint32_t, 4>;

    static Block generate(std::uint64_t key, std::uint64_t ctr_hi, std::uint64_t ctr_lo) {
        std::uint32_t k0 = static_cast<std::uint32_t>(key);
        std::uint32_t k1 = static_cast<std::uint32_t>(key >> 32);
        Block c = {static_cast<std::uint32_t>(ctr_lo),
                   static_cast<std::uint32_t>(ctr_lo >> 32),
                   static_cast<std::uint32_t>(ctr_hi),
                   static_cast<std::uint32_t>(ctr_hi >> 32)};
        for (int round = 0; round < 10; ++round) {
            c = single_round(c, k0, k1);
            k0 += 0x9E3779B9u;
            k1 += 0xBB67AE85u;
        }
        return c;
    }

private:
    static void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
        std::uint64_t p = static_cast<std::uint64_t>(a) * b;
        hi = static_cast<std::uint32_t>(p >> 32);
        lo = static_cast<std::uint32_t>(p);
    }

    static Block single_round(const Block& c, std::uint32_t k0, std::uint32_t k1) {
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(0xD2511F53u, c[0], hi0, lo0);
        mulhilo(0xCD9E8D57u, c[2], hi1, lo1);
        return {hi1 ^ c[1] ^ k0, lo1, hi0 ^ c[3] ^ k1, lo0};
    }
};

inline double u32_pair_to_unit_double(std::uint32_t a, std::uint32_t b) {
    std::uint64_t x = (static_cast<std::uint64_t>(a) << 32) | b;
    return static_cast<double>(x >> 11) * 0x1.0p-53;
}

/// Deterministic uniform in [0,1) keyed by (key, counter).
inline double keyed_uniform(std::uint64_t key, std::uint64_t ctr_hi, std::uint64_t ctr_lo) {
    auto blk = Philox4x32::generate(key, ctr_hi, ctr_lo);
    return u32_pair_to_unit_double(blk[0], blk[1]);
}

/// Deterministic pair of standard Gaussians keyed by (key, counter),
/// via Box-Muller on two counter words.
inline std::pair<double, double> keyed_gaussian_pair(std::uint64_t key, std::uint64_t ctr_hi,
                                                     std::uint64_t ctr_lo) {
    auto blk = Philox4x32::generate(key, ctr_hi, ctr_lo);
    double u1 = u32_pair_to_unit_double(blk[0], blk[1]);
    double u2 = u32_pair_to_unit_double(blk[2], blk[3]);
    // Guard u1 away from zero so log() stays finite.
    double r = std::sqrt(-2.0 * std::log(1.0 - u1));
    double theta = 2.0 * M_PI * u2;
    return {r * std::cos(theta), r * std::sin(theta)};
}

/// Sequential RNG for sampling paths, members and rollouts. Wraps the
/// standardized mt19937_64 engine; all derived draws go through our own
/// arithmetic so streams are identical across standard libraries. The
/// engine state is materialized on first draw, so code paths that never
/// draw (deterministic transitions) never pay for seeding.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed) {}

    std::uint64_t next_u64() {
        if (!engine_) engine_.emplace(seed_);
        return (*engine_)();
    }

    /// Uniform in [0,1), 53-bit resolution.
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n), n >= 1. Bias is below 2^-33 for any
    /// n < 2^20, far under anything the statistical checks can resolve.
    std::uint64_t next_below(std::uint64_t n) {
        return static_cast<std::uint64_t>(next_unit() * static_cast<double>(n)) % n;
    }

    bool bernoulli(double p) { return next_unit() < p; }

private:
    std::uint64_t seed_;
    std::optional<std::mt19937_64> engine_;
};

} // namespace proxgen
