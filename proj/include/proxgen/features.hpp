#pragma once

#include <unordered_set>

#include "proxgen/mdp.hpp"
#include "proxgen/policy.hpp"

namespace proxgen {

/// Lazily generated incoherent featurization for binary-tree state spaces.
///
/// For action 0 the feature is normalize([z_s, 1, 0]) where z_s is a keyed
/// pseudo-random unit vector in R^(d-2); for action 1 it is
/// normalize([0...0, 1, 1]) made unique per state by a reserved dummy
/// component: a tiny keyed value placed at a keyed coordinate inside the
/// otherwise-zero block. z vectors are deterministic functions of
/// (seed, state identifier) and are generated on demand, so a 2^H state
/// space never materializes anything. Keys ignore rewards entirely, so the
/// featurization leaks no reward information.
class LazyFeatureMap final : public FeatureMap {
public:
    static constexpr double kIncoherenceTarget = 1.0 / 50.0;
    static constexpr double kDummyScale = 0x1.0p-20;

    LazyFeatureMap(std::uint64_t seed, int dim) : seed_(seed), dim_(dim) {
        if (dim_ < 8) throw InvalidParams("lazy feature map needs dim >= 8");
    }

    int dim() const override { return dim_; }
    std::uint64_t seed() const { return seed_; }

    /// Keyed unit vector z_s in R^(d-2).
    std::vector<double> z_vector(const StateRef& s) const {
        const int zdim = dim_ - 2;
        std::vector<double> z(static_cast<std::size_t>(zdim));
        std::uint64_t key = splitmix64(seed_ ^ 0x7a5a5a5a11111111ULL);
        std::uint64_t skey = s.key();
        for (int i = 0; i < zdim; i += 2) {
            auto [g0, g1] = keyed_gaussian_pair(key, skey, static_cast<std::uint64_t>(i / 2));
            z[static_cast<std::size_t>(i)] = g0;
            if (i + 1 < zdim) z[static_cast<std::size_t>(i + 1)] = g1;
        }
        return normalized(std::move(z));
    }

    /// Inner product of two z vectors; the incoherence statistic.
    double z_dot(const StateRef& a, const StateRef& b) const {
        std::vector<double> za = z_vector(a);
        std::vector<double> zb = z_vector(b);
        return dot(za, zb);
    }

    std::vector<double> feature(const StateRef& s, ActionId a) const override {
        std::vector<double> v(static_cast<std::size_t>(dim_), 0.0);
        if (a == 0) {
            std::vector<double> z = z_vector(s);
            std::copy(z.begin(), z.end(), v.begin());
            v[static_cast<std::size_t>(dim_ - 2)] = 1.0;
        } else {
            std::uint64_t key = splitmix64(seed_ ^ 0x2d2d2d2d22222222ULL ^
                                           static_cast<std::uint64_t>(a));
            std::uint64_t skey = s.key();
            auto blk = Philox4x32::generate(key, skey, 0);
            std::size_t slot = (static_cast<std::uint64_t>(blk[2]) << 32 | blk[3]) %
                               static_cast<std::uint64_t>(dim_ - 2);
            double u = u32_pair_to_unit_double(blk[0], blk[1]);
            v[slot] = kDummyScale * (0.5 + 0.5 * u);
            v[static_cast<std::size_t>(dim_ - 2)] = 1.0;
            v[static_cast<std::size_t>(dim_ - 1)] = 1.0;
        }
        return normalized(std::move(v));
    }

private:
    std::uint64_t seed_;
    int dim_;
};

struct IncoherenceReport {
    double max_abs_dot = 0.0;
    std::size_t violations = 0; // pairs with |z_i . z_j| above the 1/50 target
    std::size_t pairs = 0;
};

/// Exact incoherence statistics over `pair_samples` distinct state pairs,
/// drawn deterministically from the map's seed. A pair never repeats a
/// state against itself.
inline IncoherenceReport check_incoherence(const LazyFeatureMap& fm, std::size_t pair_samples,
                                           int path_length = 40) {
    if (pair_samples < 1) throw InvalidParams("need at least one pair sample");
    // Smallest pool whose pair count covers the request.
    std::size_t pool = 2;
    while (pool * (pool - 1) / 2 < pair_samples) ++pool;

    Rng rng(splitmix64(fm.seed() ^ 0x51c0ffee00000000ULL));
    std::vector<StateRef> states;
    std::unordered_set<StateRef, StateRefHash> seen;
    while (states.size() < pool) {
        int level = 1 + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(path_length)));
        std::uint64_t bits = rng.next_u64() & ((level >= 64) ? ~std::uint64_t{0}
                                                             : ((std::uint64_t{1} << level) - 1));
        StateRef s = StateRef::tree(bits, level);
        if (seen.insert(s).second) states.push_back(s);
    }

    std::vector<std::vector<double>> zs;
    zs.reserve(states.size());
    for (const StateRef& s : states) zs.push_back(fm.z_vector(s));

    IncoherenceReport report;
    for (std::size_t i = 0; i < states.size() && report.pairs < pair_samples; ++i) {
        for (std::size_t j = i + 1; j < states.size() && report.pairs < pair_samples; ++j) {
            double d = std::abs(dot(zs[i], zs[j]));
            report.max_abs_dot = std::max(report.max_abs_dot, d);
            if (d > LazyFeatureMap::kIncoherenceTarget) ++report.violations;
            ++report.pairs;
        }
    }
    return report;
}

} // namespace proxgen
