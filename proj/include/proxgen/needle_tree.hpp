#pragma once

#include "proxgen/family.hpp"
#include "proxgen/features.hpp"

namespace proxgen {

/// Parameters of the deterministic needle-tree family: a shared binary tree
/// of depth H whose members hide one unit-value leaf path per subtree at
/// depth H/2. The per-step reward is 1/(H/2 - gap), spread over the last
/// H/2 - gap levels of each designated path, so every designated path is
/// worth exactly one.
struct NeedleTreeParams {
    int horizon = 12;          // even, >= 8
    int gap = 2;               // >= 1 and H/2 - gap >= 1; probe depth inside a subtree
    int k = 3;                 // reported solver-cost exponent
    std::uint64_t seed = 1;
    int feature_dim = 1 << 16;
    std::int64_t sample_cost = 1;

    void validate() const {
        if (horizon < 8 || horizon % 2 != 0) throw InvalidParams("horizon must be even and >= 8");
        if (horizon > 62) throw InvalidParams("horizon above 62 does not fit path bits");
        if (gap < 1) throw InvalidParams("gap must be >= 1");
        if (horizon / 2 - gap < 1) throw InvalidParams("need horizon/2 - gap >= 1");
        if (k < 3) throw InvalidParams("k must be >= 3");
        if (feature_dim < 8) throw InvalidParams("feature_dim must be >= 8");
        if (sample_cost < 1) throw InvalidParams("sample cost must be >= 1");
    }

    int rewarded_levels() const { return horizon / 2 - gap; }
    double step_reward() const { return 1.0 / static_cast<double>(rewarded_levels()); }
    int reward_start_level() const { return horizon / 2 + gap; }
};

/// Default gap so that a subtree probe costs about H^k queries: the
/// smallest g with 2^g >= H^k, plus one.
inline int needle_default_gap(int horizon, int k) {
    long double target = std::pow(static_cast<long double>(horizon), k);
    int g = 0;
    long double p = 1.0L;
    while (p < target) {
        p *= 2.0L;
        ++g;
    }
    return g + 1;
}

/// One member of the needle-tree family. Transitions are the shared binary
/// tree (deterministic); rewards place step_reward on the designated path
/// of every depth-H/2 subtree: the hidden star leaf's path in its own
/// subtree, and the member's decoy leaf (same within-subtree index
/// everywhere) in all others.
class NeedleTreeMdp final : public LayeredMdp {
public:
    NeedleTreeMdp(const NeedleTreeParams& params, std::uint64_t star_leaf_bits,
                  std::uint64_t decoy_index, std::shared_ptr<const FeatureMap> features)
        : LayeredMdp(params.horizon, 2, std::move(features)), params_(params),
          star_bits_(star_leaf_bits), decoy_index_(decoy_index) {
        half_ = params.horizon / 2;
        star_subtree_ = star_bits_ & low_bits_mask(half_);
    }

    const NeedleTreeParams& params() const { return params_; }
    std::uint64_t star_leaf_bits() const { return star_bits_; }
    std::uint64_t decoy_index() const { return decoy_index_; }

    /// Leaf whose path carries reward inside the subtree rooted at
    /// `subtree_bits` (a depth-H/2 prefix).
    std::uint64_t designated_leaf(std::uint64_t subtree_bits) const {
        if (subtree_bits == star_subtree_) return star_bits_;
        return subtree_bits | (decoy_index_ << half_);
    }

    bool on_designated_path(std::uint64_t path_bits, int level) const {
        if (level <= half_) return true; // every subtree holds one designated leaf
        std::uint64_t leaf = designated_leaf(path_bits & low_bits_mask(half_));
        return (leaf & low_bits_mask(level)) == path_bits;
    }

    TransitionSupport transition(const StateRef& s, ActionId a) const override {
        require_tree(s);
        return TransitionSupport::deterministic(s.tree_child(a));
    }

    StateRef sample_next(const StateRef& s, ActionId a, Rng&) const override {
        require_tree(s);
        return s.tree_child(a);
    }

    double reward(const StateRef& s, ActionId a) const override {
        require_tree(s);
        if (s.level < params_.reward_start_level()) return 0.0;
        StateRef child = s.tree_child(a);
        return on_designated_path(child.bits, child.level) ? params_.step_reward() : 0.0;
    }

    std::optional<double> analytic_optimal_value(const StateRef& s) const override {
        if (s.kind != StateKind::TreeNode || s.level > horizon()) return std::nullopt;
        if (s.level >= horizon()) return 0.0;
        int remaining;
        if (s.level <= half_) {
            remaining = params_.rewarded_levels();
        } else if (on_designated_path(s.bits, s.level)) {
            remaining = horizon() - std::max(s.level, params_.reward_start_level());
        } else {
            remaining = 0;
        }
        // Fold the per-step reward the same way backward induction does, so
        // the closed form is bit-identical to dynamic programming.
        double v = 0.0;
        for (int i = 0; i < remaining; ++i) v = params_.step_reward() + v;
        return v;
    }

private:
    void require_tree(const StateRef& s) const {
        if (s.kind != StateKind::TreeNode || s.level >= horizon())
            throw InvalidState("needle tree has no actions at " + to_string(s));
    }

    NeedleTreeParams params_;
    std::uint64_t star_bits_;
    std::uint64_t decoy_index_;
    int half_;
    std::uint64_t star_subtree_;
};

/// Build the needle-tree family: the star leaf is drawn uniformly from the
/// 2^H leaves using the seed, and one member exists per within-subtree leaf
/// index (2^(H/2) members, uniform weights). Members are materialized on
/// demand; nothing scales with 2^H.
inline MdpDistribution build_needle_tree_family(const NeedleTreeParams& params) {
    params.validate();
    const int h = params.horizon;
    Rng rng(splitmix64(params.seed ^ 0xbadc0ffee0ddf00dULL));
    std::uint64_t star_bits = rng.next_u64() & low_bits_mask(h);
    auto features = std::make_shared<LazyFeatureMap>(splitmix64(params.seed ^ 0xfea7u),
                                                     params.feature_dim);
    std::size_t member_count = std::size_t{1} << (h / 2);

    FamilyMetadata meta;
    meta.has_star_leaf = true;
    meta.star_leaf_bits = star_bits;
    meta.shared_policy = tree_path_policy(star_bits, h);
    meta.shared_path = path_bits_to_sequence(star_bits, h);

    std::vector<std::pair<std::string, std::string>> info = {
        {"gap", std::to_string(params.gap)},
        {"k", std::to_string(params.k)},
        {"seed", std::to_string(params.seed)},
        {"step_reward", shortest_double_string(params.step_reward())},
        {"analytic_eps_r", shortest_double_string(params.step_reward())},
        {"analytic_eps_p", "0"},
    };

    MdpDistribution::MemberFactory factory =
        [params, star_bits, features](std::size_t i) -> std::shared_ptr<const LayeredMdp> {
        return std::make_shared<NeedleTreeMdp>(params, star_bits,
                                               static_cast<std::uint64_t>(i), features);
    };
    return MdpDistribution("needle_tree", member_count, std::move(factory), params.sample_cost,
                           /*shared_state_space=*/true,
                           /*shared_deterministic_transitions=*/true, std::move(meta),
                           std::move(info));
}

} // namespace proxgen
