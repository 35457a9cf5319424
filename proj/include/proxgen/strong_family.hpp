#pragma once

#include "proxgen/family.hpp"

namespace proxgen {

/// Parameters of the shared-optimum ("strong") family: binary-tree members
/// with shared deterministic transitions and a single seeded policy that is
/// strictly Bellman-optimal at every state of every member. Rewards are
/// drawn independently per member from [0, spread], bumped bottom-up until
/// the shared action wins with positive margin, then globally rescaled so
/// every trajectory's total stays below one.
struct StrongFamilyParams {
    int horizon = 10;   // explicit representation; capped at 16
    int members = 8;
    double spread = 1.0;
    std::uint64_t seed = 1;
    int feature_dim = 16;
    std::int64_t sample_cost = 1;

    void validate() const {
        if (horizon < 2 || horizon > 16) throw InvalidParams("horizon must be in [2, 16]");
        if (members < 1 || members > 4096) throw InvalidParams("members must be in [1, 4096]");
        if (spread <= 0.0) throw InvalidParams("spread must be > 0");
        if (feature_dim < 1) throw InvalidParams("feature_dim must be >= 1");
        if (sample_cost < 1) throw InvalidParams("sample cost must be >= 1");
    }

    std::size_t node_count() const { return (std::size_t{1} << horizon) - 1; }
};

inline std::size_t strong_node_index(int level, std::uint64_t bits) {
    return (std::size_t{1} << level) - 1 + static_cast<std::size_t>(bits);
}

/// One member: a depth-(H-1) tree with tabulated rewards and cached exact
/// values. States occupy levels 0..H-1; both actions at level H-1 exit.
class StrongTreeMdp final : public LayeredMdp {
public:
    StrongTreeMdp(int horizon, std::vector<double> rewards, std::vector<double> values,
                  std::shared_ptr<const FeatureMap> features)
        : LayeredMdp(horizon, 2, std::move(features)), rewards_(std::move(rewards)),
          values_(std::move(values)) {}

    double reward(const StateRef& s, ActionId a) const override {
        require_tree(s);
        return rewards_[strong_node_index(s.level, s.bits) * 2 + static_cast<std::size_t>(a)];
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
        return values_[strong_node_index(s.level, s.bits)];
    }

private:
    void require_tree(const StateRef& s) const {
        if (s.kind != StateKind::TreeNode || s.level >= horizon())
            throw InvalidState("no actions at " + to_string(s));
    }

    std::vector<double> rewards_; // node index * 2 + action
    std::vector<double> values_;  // exact V* per node
};

/// Shared policy bit per node, derived from the family seed alone.
inline ActionId strong_shared_action(std::uint64_t seed, int level, std::uint64_t bits) {
    std::uint64_t key = splitmix64(seed ^ 0x065707ad0b15c0deULL);
    return static_cast<ActionId>(
        Philox4x32::generate(key, static_cast<std::uint64_t>(level), bits)[0] & 1);
}

inline MdpDistribution build_strong_family(const StrongFamilyParams& params) {
    params.validate();
    const int h = params.horizon;
    const std::size_t nodes = params.node_count();
    auto features = std::make_shared<KeyedOneHotFeatures>(params.feature_dim,
                                                          splitmix64(params.seed ^ 0xfea7u));

    // Draw raw rewards and enforce strict Bellman-optimality of the shared
    // action at every node, member by member.
    std::vector<std::vector<double>> rewards(static_cast<std::size_t>(params.members));
    std::vector<double> root_values(static_cast<std::size_t>(params.members));
    for (int i = 0; i < params.members; ++i) {
        Rng rng(mix_seed(params.seed, static_cast<std::uint64_t>(i) + 1));
        auto& r = rewards[static_cast<std::size_t>(i)];
        r.resize(nodes * 2);
        for (auto& x : r) x = params.spread * rng.next_unit();
        std::vector<double> v(nodes, 0.0);
        for (int level = h - 1; level >= 0; --level) {
            for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << level); ++bits) {
                std::size_t idx = strong_node_index(level, bits);
                auto child_value = [&](ActionId a) {
                    if (level == h - 1) return 0.0;
                    return v[strong_node_index(level + 1,
                                               bits | (static_cast<std::uint64_t>(a) << level))];
                };
                ActionId star = strong_shared_action(params.seed, level, bits);
                ActionId other = 1 - star;
                double q_star = r[idx * 2 + static_cast<std::size_t>(star)] + child_value(star);
                double q_other = r[idx * 2 + static_cast<std::size_t>(other)] + child_value(other);
                if (q_star <= q_other) {
                    double margin = params.spread * (0.05 + 0.1 * rng.next_unit());
                    r[idx * 2 + static_cast<std::size_t>(star)] =
                        q_other + margin - child_value(star);
                    q_star = r[idx * 2 + static_cast<std::size_t>(star)] + child_value(star);
                }
                v[idx] = q_star;
            }
        }
        root_values[static_cast<std::size_t>(i)] = v[0];
    }

    // Global rescale: the best trajectory total equals the root value, so
    // dividing by (slightly more than) the largest root value bounds every
    // trajectory by one.
    double kappa = *std::max_element(root_values.begin(), root_values.end());
    kappa *= 1.0 + 1e-13;
    std::vector<FamilyMember> handles;
    double w = 1.0 / static_cast<double>(params.members);
    for (int i = 0; i < params.members; ++i) {
        auto& r = rewards[static_cast<std::size_t>(i)];
        for (auto& x : r) x /= kappa;
        // Exact values recomputed from the final rewards.
        std::vector<double> v(nodes, 0.0);
        for (int level = h - 1; level >= 0; --level) {
            for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << level); ++bits) {
                std::size_t idx = strong_node_index(level, bits);
                double best = -1.0;
                for (ActionId a = 0; a < 2; ++a) {
                    double q = r[idx * 2 + static_cast<std::size_t>(a)];
                    if (level < h - 1)
                        q += v[strong_node_index(
                            level + 1, bits | (static_cast<std::uint64_t>(a) << level))];
                    best = std::max(best, q);
                }
                v[idx] = best;
            }
        }
        handles.push_back({"m" + std::to_string(i), w,
                           std::make_shared<StrongTreeMdp>(h, std::move(r), std::move(v),
                                                           features)});
    }

    FamilyMetadata meta;
    std::uint64_t seed = params.seed;
    meta.shared_policy = DeterministicPolicy{[seed, h](const StateRef& s) -> ActionId {
        if (s.kind != StateKind::TreeNode || s.level >= h) return 0;
        return strong_shared_action(seed, s.level, s.bits);
    }};

    std::vector<std::pair<std::string, std::string>> info = {
        {"spread", shortest_double_string(params.spread)},
        {"seed", std::to_string(params.seed)},
        {"analytic_alpha_all_states", "0"},
    };

    return MdpDistribution("strong", std::move(handles), params.sample_cost,
                           /*shared_state_space=*/true,
                           /*shared_deterministic_transitions=*/true, std::move(meta),
                           std::move(info));
}

} // namespace proxgen
