#pragma once

#include "proxgen/family.hpp"
#include "proxgen/features.hpp"

namespace proxgen {

/// Parameters of the stochastic jump-chain family: a binary tree of depth
/// H/2 whose leaves feed single-action chains that all end in a unit-reward
/// terminal. Members share the reward function and differ only in where
/// they perturb transitions: non-special chains leak to the zero terminal
/// with probability 10/H per step, while edges along special tree paths
/// between levels H/4 and H/2 jump straight to the unit terminal with
/// probability 1/H^(k-1).
struct JumpChainParams {
    int horizon = 16; // divisible by 4, >= 12 so that 10/H < 1
    int k = 3;        // jump probability exponent
    std::uint64_t seed = 1;
    int feature_dim = 1 << 16;
    std::int64_t sample_cost = 1;

    void validate() const {
        if (horizon < 12 || horizon % 4 != 0)
            throw InvalidParams("horizon must be divisible by 4 and >= 12");
        if (horizon > 62) throw InvalidParams("horizon above 62 does not fit path bits");
        if (k < 3) throw InvalidParams("k must be >= 3");
        if (feature_dim < 8) throw InvalidParams("feature_dim must be >= 8");
        if (sample_cost < 1) throw InvalidParams("sample cost must be >= 1");
        if (!(0.0 < jump_probability() && jump_probability() < exit_probability() &&
              exit_probability() < 1.0))
            throw InvalidParams("need 0 < p_jump < p_exit < 1");
    }

    double exit_probability() const { return 10.0 / static_cast<double>(horizon); }

    double jump_probability() const {
        long double denom = 1.0L;
        for (int i = 0; i < k - 1; ++i) denom *= static_cast<long double>(horizon);
        return static_cast<double>(1.0L / denom);
    }

    int tree_depth() const { return horizon / 2; }
    int quarter() const { return horizon / 4; }
    int chain_length() const { return horizon / 2 - 2; } // chain nodes per leaf
};

/// One member of the jump-chain family. Chain states and terminals have a
/// single effective action: every ActionId behaves identically there, so
/// the action set stays shared across the whole state space.
class JumpChainMdp final : public LayeredMdp {
public:
    JumpChainMdp(const JumpChainParams& params, std::uint64_t star_leaf_bits,
                 std::uint64_t decoy_index, std::shared_ptr<const FeatureMap> features)
        : LayeredMdp(params.horizon, 2, std::move(features)), params_(params),
          star_bits_(star_leaf_bits), decoy_index_(decoy_index) {
        depth_ = params.tree_depth();
        quarter_ = params.quarter();
        chain_len_ = params.chain_length();
        star_subtree_ = star_bits_ & low_bits_mask(quarter_);
        p_exit_ = params.exit_probability();
        p_jump_ = params.jump_probability();
    }

    const JumpChainParams& params() const { return params_; }
    std::uint64_t star_leaf_bits() const { return star_bits_; }
    std::uint64_t decoy_index() const { return decoy_index_; }

    /// Special leaf of the depth-H/4 subtree holding `subtree_bits`.
    std::uint64_t special_leaf(std::uint64_t subtree_bits) const {
        if (subtree_bits == star_subtree_) return star_bits_;
        return subtree_bits | (decoy_index_ << quarter_);
    }

    bool leaf_is_special(std::uint64_t leaf_bits) const {
        return special_leaf(leaf_bits & low_bits_mask(quarter_)) == leaf_bits;
    }

    bool on_special_path(std::uint64_t path_bits, int level) const {
        if (level <= quarter_) return true;
        std::uint64_t leaf = special_leaf(path_bits & low_bits_mask(quarter_));
        return (leaf & low_bits_mask(level)) == path_bits;
    }

    double reward(const StateRef& s, ActionId) const override {
        require_live(s);
        return s.kind == StateKind::TerminalOne ? 1.0 : 0.0;
    }

    TransitionSupport transition(const StateRef& s, ActionId a) const override {
        require_live(s);
        switch (s.kind) {
            case StateKind::TreeNode: {
                if (s.level < depth_) {
                    StateRef child = s.tree_child(a);
                    if (s.level >= quarter_ && on_special_path(child.bits, child.level))
                        return TransitionSupport::binary(child, 1.0 - p_jump_,
                                                         StateRef::terminal_one(child.level));
                    return TransitionSupport::deterministic(child);
                }
                // Leaf of the tree: first step of its chain.
                StateRef next = StateRef::chain(s.bits, depth_, 1);
                if (leaf_is_special(s.bits)) return TransitionSupport::deterministic(next);
                return TransitionSupport::binary(next, 1.0 - p_exit_,
                                                 StateRef::terminal_zero(next.level));
            }
            case StateKind::ChainNode: {
                StateRef next = s.chain_depth < chain_len_
                                    ? StateRef::chain(s.bits, depth_, s.chain_depth + 1)
                                    : StateRef::terminal_one(s.level + 1);
                if (leaf_is_special(s.bits)) return TransitionSupport::deterministic(next);
                return TransitionSupport::binary(next, 1.0 - p_exit_,
                                                 StateRef::terminal_zero(s.level + 1));
            }
            case StateKind::TerminalOne:
                return TransitionSupport::deterministic(StateRef::terminal_one(horizon()));
            case StateKind::TerminalZero:
                return TransitionSupport::deterministic(StateRef::terminal_zero(horizon()));
            default:
                throw InvalidState("unexpected state " + to_string(s));
        }
    }

    bool deterministic_transitions() const override { return false; }

    std::optional<double> analytic_optimal_value(const StateRef& s) const override {
        if (s.level >= horizon()) return 0.0;
        switch (s.kind) {
            case StateKind::TerminalOne:
                return 1.0;
            case StateKind::TerminalZero:
                return 0.0;
            case StateKind::ChainNode:
                if (leaf_is_special(s.bits)) return 1.0;
                return chain_survival(chain_len_ + 1 - s.chain_depth);
            case StateKind::TreeNode: {
                if (s.level == depth_) {
                    if (leaf_is_special(s.bits)) return 1.0;
                    return chain_survival(chain_len_ + 1);
                }
                if (s.level <= quarter_ || on_special_path(s.bits, s.level)) {
                    // Fold over the remaining jump edges exactly as backward
                    // induction does; equals 1 whenever p_jump is dyadic.
                    int jump_edges = depth_ - std::max(s.level, quarter_);
                    double v = 1.0;
                    for (int i = 0; i < jump_edges; ++i) v = (1.0 - p_jump_) * v + p_jump_ * 1.0;
                    return v;
                }
                return chain_survival(chain_len_ + 1);
            }
            default:
                return std::nullopt;
        }
    }

private:
    void require_live(const StateRef& s) const {
        if (s.level >= horizon()) throw InvalidState("no actions at " + to_string(s));
        if (s.kind == StateKind::TabularIndex) throw InvalidState("unknown state kind");
        if (s.kind == StateKind::TreeNode && s.level > depth_)
            throw InvalidState("tree deeper than structure at " + to_string(s));
    }

    /// Probability of surviving `steps` perturbed chain transitions, folded
    /// in backward-induction order.
    double chain_survival(int steps) const {
        double v = 1.0;
        for (int i = 0; i < steps; ++i) v = (1.0 - p_exit_) * v + p_exit_ * 0.0;
        return v;
    }

    JumpChainParams params_;
    std::uint64_t star_bits_;
    std::uint64_t decoy_index_;
    int depth_;
    int quarter_;
    int chain_len_;
    std::uint64_t star_subtree_;
    double p_exit_;
    double p_jump_;
};

/// Build the jump-chain family: the star leaf is drawn uniformly from the
/// 2^(H/2) tree leaves; one member per within-subtree leaf index at depth
/// H/4 (2^(H/4) members, uniform weights).
inline MdpDistribution build_jump_chain_family(const JumpChainParams& params) {
    params.validate();
    Rng rng(splitmix64(params.seed ^ 0x9c41ab5e77aa1234ULL));
    std::uint64_t star_bits = rng.next_u64() & low_bits_mask(params.tree_depth());
    auto features = std::make_shared<LazyFeatureMap>(splitmix64(params.seed ^ 0xfea7u),
                                                     params.feature_dim);
    std::size_t member_count = std::size_t{1} << params.quarter();

    FamilyMetadata meta;
    meta.has_star_leaf = true;
    meta.star_leaf_bits = star_bits;
    meta.shared_policy = tree_path_policy(star_bits, params.horizon);
    meta.shared_path = path_bits_to_sequence(star_bits, params.horizon);

    std::vector<std::pair<std::string, std::string>> info = {
        {"k", std::to_string(params.k)},
        {"seed", std::to_string(params.seed)},
        {"p_exit", shortest_double_string(params.exit_probability())},
        {"p_jump", shortest_double_string(params.jump_probability())},
        {"analytic_eps_r", "0"},
        {"analytic_eps_p", shortest_double_string(std::max(params.exit_probability(),
                                                         params.jump_probability()))},
    };

    MdpDistribution::MemberFactory factory =
        [params, star_bits, features](std::size_t i) -> std::shared_ptr<const LayeredMdp> {
        return std::make_shared<JumpChainMdp>(params, star_bits,
                                              static_cast<std::uint64_t>(i), features);
    };
    return MdpDistribution("jump_chain", member_count, std::move(factory), params.sample_cost,
                           /*shared_state_space=*/true,
                           /*shared_deterministic_transitions=*/false, std::move(meta),
                           std::move(info));
}

} // namespace proxgen
