#pragma once

#include "proxgen/family.hpp"

namespace proxgen {

/// Parameters of the block-tree instance: a deterministic binary tree whose
/// levels are chunked into blocks of length `block_len`. Optimal values are
/// assigned round by round: at each block boundary every anchor keeps one
/// uniformly chosen special descendant at its own value while all others
/// drop by beta. Rewards sit on the leaf exit actions and equal the
/// assigned leaf values, so a path that misses every special descendant is
/// worth v0 - beta * (H / block_len).
struct BlockTreeParams {
    int horizon = 12;
    int block_len = 3; // must divide horizon
    double beta = 0.05;
    double v0 = 1.0; // optimal value from the root
    std::uint64_t seed = 1;
    int feature_dim = 16;
    std::int64_t sample_cost = 1;

    void validate() const {
        if (horizon < 2 || horizon > 62) throw InvalidParams("horizon must be in [2, 62]");
        if (block_len < 1 || horizon % block_len != 0)
            throw InvalidParams("block_len must divide horizon");
        if (beta < 0.0) throw InvalidParams("beta must be >= 0");
        if (v0 <= 0.0 || v0 > 1.0) throw InvalidParams("v0 must be in (0, 1]");
        if (v0 - beta * blocks() < -1e-12)
            throw InvalidParams("beta too large: leaf values would go negative");
        if (feature_dim < 1) throw InvalidParams("feature_dim must be >= 1");
        if (sample_cost < 1) throw InvalidParams("sample cost must be >= 1");
    }

    int blocks() const { return horizon / block_len; }

    /// Block length b stands in for log2(50n); the equivalent query count.
    double implied_query_count() const {
        return std::pow(2.0, static_cast<double>(block_len)) / 50.0;
    }
};

/// The block-tree MDP. States occupy levels 0..H-1; leaves sit at level
/// H-1 and both exit actions pay the leaf's assigned value. Value-drop
/// rounds happen at levels b, 2b, ..., H-b and at the leaf level H-1 (the
/// last block ends with the exit step), giving H/b possible drops total.
class BlockTreeMdp final : public LayeredMdp {
public:
    BlockTreeMdp(const BlockTreeParams& params, std::shared_ptr<const FeatureMap> features)
        : LayeredMdp(params.horizon, 2, std::move(features)), params_(params) {
        rounds_.push_back(0);
        for (int m = params.block_len; m <= params.horizon - params.block_len;
             m += params.block_len)
            rounds_.push_back(m);
        rounds_.push_back(params.horizon - 1);
    }

    const BlockTreeParams& params() const { return params_; }

    /// Special descendant kept at full value in the round that ends at
    /// `round_level`, for the anchor at the previous round level.
    std::uint64_t special_descendant(std::uint64_t anchor_bits, int anchor_level,
                                     int round_level) const {
        int span = round_level - anchor_level;
        std::uint64_t key = splitmix64(params_.seed ^ 0x5b10c5ca1eb0ceULL);
        std::uint64_t pick = Philox4x32::generate(
            key, anchor_bits ^ (static_cast<std::uint64_t>(anchor_level) << 56),
            0x51ecULL)[0];
        std::uint64_t r = pick & low_bits_mask(span);
        return anchor_bits | (r << anchor_level);
    }

    /// Assigned value of a state sitting exactly on a round level.
    double assigned_value(std::uint64_t bits, int round_level) const {
        double v = params_.v0;
        for (std::size_t i = 1; i < rounds_.size() && rounds_[i] <= round_level; ++i) {
            int m = rounds_[i];
            int prev = rounds_[i - 1];
            std::uint64_t anchor = bits & low_bits_mask(prev);
            std::uint64_t special = special_descendant(anchor, prev, m);
            if ((bits & low_bits_mask(m)) != special) v -= params_.beta;
        }
        return v;
    }

    double reward(const StateRef& s, ActionId) const override {
        require_tree(s);
        if (s.level != horizon() - 1) return 0.0;
        return assigned_value(s.bits, s.level);
    }

    TransitionSupport transition(const StateRef& s, ActionId a) const override {
        require_tree(s);
        if (s.level == horizon() - 1)
            return TransitionSupport::deterministic(StateRef::terminal_zero(horizon()));
        return TransitionSupport::deterministic(s.tree_child(a));
    }

    StateRef sample_next(const StateRef& s, ActionId a, Rng&) const override {
        require_tree(s);
        if (s.level == horizon() - 1) return StateRef::terminal_zero(horizon());
        return s.tree_child(a);
    }

    std::optional<double> analytic_optimal_value(const StateRef& s) const override {
        if (s.level >= horizon()) return 0.0;
        if (s.kind != StateKind::TreeNode) return std::nullopt;
        int r0 = deepest_round_at_or_below(s.level);
        std::uint64_t anchor = s.bits & low_bits_mask(r0);
        double av = assigned_value(anchor, r0);
        if (s.level == r0) return av;
        int next = next_round_after(r0);
        std::uint64_t special = special_descendant(anchor, r0, next);
        bool keeps = (special & low_bits_mask(s.level)) == s.bits;
        return keeps ? av : av - params_.beta;
    }

    /// Pessimistic oracle value: every state strictly inside a block (and
    /// every state on a round level, seen from the previous round's anchor)
    /// reports that anchor's assigned value minus beta. Special and
    /// non-special siblings therefore receive equal oracle values, which is
    /// what keeps the special descendants hidden; the estimate still stays
    /// within beta of the true optimal value everywhere.
    double oracle_value(const StateRef& s) const {
        if (s.level >= horizon()) return 0.0;
        if (s.kind != StateKind::TreeNode) throw InvalidState("unexpected state kind");
        if (s.level == 0) return params_.v0 - params_.beta;
        int prev = deepest_round_strictly_below(s.level);
        std::uint64_t anchor = s.bits & low_bits_mask(prev);
        return assigned_value(anchor, prev) - params_.beta;
    }

private:
    void require_tree(const StateRef& s) const {
        if (s.kind != StateKind::TreeNode || s.level >= horizon())
            throw InvalidState("block tree has no actions at " + to_string(s));
    }

    int deepest_round_at_or_below(int level) const {
        int best = 0;
        for (int m : rounds_)
            if (m <= level) best = m;
        return best;
    }

    int deepest_round_strictly_below(int level) const {
        int best = 0;
        for (int m : rounds_)
            if (m < level) best = m;
        return best;
    }

    int next_round_after(int level) const {
        for (int m : rounds_)
            if (m > level) return m;
        return horizon() - 1;
    }

    BlockTreeParams params_;
    std::vector<int> rounds_; // 0, b, 2b, ..., H-b, H-1
};

struct BlockTreeInstance {
    MdpDistribution family; // point mass on the instance
    std::shared_ptr<const BlockTreeMdp> mdp;
};

/// Build the block-tree instance as a point-mass family plus direct access
/// to the instance for the adversarial oracle.
inline BlockTreeInstance build_block_tree_instance(const BlockTreeParams& params) {
    params.validate();
    auto features = std::make_shared<KeyedOneHotFeatures>(params.feature_dim,
                                                          splitmix64(params.seed ^ 0xfea7u));
    auto mdp = std::make_shared<BlockTreeMdp>(params, features);

    FamilyMetadata meta;
    // The full-value policy follows the special descendants round by round.
    auto mdp_for_policy = mdp;
    meta.shared_policy = DeterministicPolicy{[mdp_for_policy](const StateRef& s) -> ActionId {
        if (s.kind != StateKind::TreeNode || s.level >= mdp_for_policy->horizon()) return 0;
        const BlockTreeMdp& m = *mdp_for_policy;
        for (ActionId a : {0, 1}) {
            if (s.level == m.horizon() - 1) break;
            StateRef child = s.tree_child(a);
            double vs = *m.analytic_optimal_value(s);
            double vc = *m.analytic_optimal_value(child);
            if (vc == vs) return a;
        }
        return 0;
    }};

    std::vector<std::pair<std::string, std::string>> info = {
        {"block_len", std::to_string(params.block_len)},
        {"beta", shortest_double_string(params.beta)},
        {"v0", shortest_double_string(params.v0)},
        {"seed", std::to_string(params.seed)},
        {"implied_query_count", shortest_double_string(params.implied_query_count())},
    };

    std::vector<FamilyMember> members;
    members.push_back({"m0", 1.0, mdp});
    MdpDistribution family("block_tree", std::move(members), params.sample_cost,
                           /*shared_state_space=*/true,
                           /*shared_deterministic_transitions=*/true, std::move(meta),
                           std::move(info));
    return BlockTreeInstance{std::move(family), mdp};
}

} // namespace proxgen
