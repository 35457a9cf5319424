#pragma once

#include "proxgen/jump_chain.hpp"
#include "proxgen/needle_tree.hpp"
#include "proxgen/query.hpp"

namespace proxgen {

/// Per-level direction vector that picks the wanted action at every state:
/// +normalize([0,...,0, 1, -1/2]) selects action 0 (the shared coordinate
/// outweighs the action flag), its negation selects action 1.
inline std::vector<double> level_direction_vector(int dim, ActionId action) {
    std::vector<double> v(static_cast<std::size_t>(dim), 0.0);
    double sign = action == 0 ? 1.0 : -1.0;
    v[static_cast<std::size_t>(dim - 2)] = sign;
    v[static_cast<std::size_t>(dim - 1)] = -0.5 * sign;
    return normalized(std::move(v));
}

/// Timestep action sequence as a linear policy: theta_h reproduces
/// actions[h] at every level-h state of a lazily featurized tree.
inline LinearPolicy path_to_linear_policy(const SequencePolicy& seq, int dim) {
    LinearPolicy lin;
    lin.thetas.reserve(seq.actions.size());
    for (ActionId a : seq.actions) lin.thetas.push_back(level_direction_vector(dim, a));
    lin.validate();
    return lin;
}

/// Result of an individual-MDP greedy solve. `value` is the exact value of
/// the returned policy from the start state, and `queries_used` counts the
/// generative queries the solve charged.
struct SioResult {
    LinearPolicy policy;
    SequencePolicy path; // root-anchored action sequence the policy traces
    double value = 0.0;
    std::int64_t queries_used = 0;
    bool found_reward = false;
};

/// Greedy solver for one needle-tree member under the generative model.
///
/// Starting inside (or above) a depth-H/2 subtree, it queries all states of
/// that subtree at probe depth `gap` until it sees the positive per-step
/// reward, then descends greedily, extending the rewarded path level by
/// level. Query cost is at most 2^(gap+1) + 2H. A start with no rewarded
/// pair beneath it yields a value-0 certificate.
inline SioResult sio_greedy_solve_deterministic(GenerativeModel& gm, const StateRef& start,
                                                int gap, bool build_linear_policy = true) {
    const LayeredMdp& mdp = gm.mdp();
    const int horizon = mdp.horizon();
    const int half = horizon / 2;
    const int probe_level = half + gap;
    if (start.kind != StateKind::TreeNode || start.level > horizon)
        throw InvalidState("solver start must be a tree state");
    const std::int64_t queries_before = gm.ledger().generative_queries();

    SioResult out;
    out.path.actions.assign(static_cast<std::size_t>(horizon), 0);
    for (int d = 0; d < start.level; ++d)
        out.path.actions[static_cast<std::size_t>(d)] = start.path_action(d);

    auto finish = [&](double value, bool found) {
        out.value = value;
        out.found_reward = found;
        out.queries_used = gm.ledger().generative_queries() - queries_before;
        if (build_linear_policy)
            out.policy = path_to_linear_policy(out.path, mdp.feature_map().dim());
        return out;
    };

    if (start.level >= horizon) return finish(0.0, false);

    // Locate the first rewarded pair at or below the start.
    std::optional<StateRef> on_path_state;
    ActionId on_path_action = 0;
    double first_reward = 0.0;
    if (start.level <= probe_level) {
        // Probe every descendant of the start (after an arbitrary all-zero
        // descent to the subtree) at the probe level.
        std::uint64_t base = start.bits;
        int free_bits = probe_level - std::max(start.level, half);
        for (std::uint64_t c = 0; c <= low_bits_mask(free_bits) && !on_path_state; ++c) {
            StateRef probe =
                StateRef::tree(base | (c << std::max(start.level, half)), probe_level);
            for (ActionId a = 0; a < 2 && !on_path_state; ++a) {
                auto resp = gm.query(probe, a);
                if (resp.reward > 0.0) {
                    on_path_state = probe;
                    on_path_action = a;
                    first_reward = resp.reward;
                }
            }
        }
    } else {
        for (ActionId a = 0; a < 2 && !on_path_state; ++a) {
            auto resp = gm.query(start, a);
            if (resp.reward > 0.0) {
                on_path_state = start;
                on_path_action = a;
                first_reward = resp.reward;
            }
        }
    }
    if (!on_path_state) return finish(0.0, false);

    for (int d = std::max(start.level, half); d < on_path_state->level; ++d)
        out.path.actions[static_cast<std::size_t>(d)] = on_path_state->path_action(d);
    out.path.actions[static_cast<std::size_t>(on_path_state->level)] = on_path_action;

    // Greedy descent: exactly one child pair carries reward at each level.
    double value = first_reward;
    StateRef cur = on_path_state->tree_child(on_path_action);
    while (cur.level < horizon) {
        bool extended = false;
        for (ActionId a = 0; a < 2; ++a) {
            auto resp = gm.query(cur, a);
            if (resp.reward > 0.0) {
                out.path.actions[static_cast<std::size_t>(cur.level)] = a;
                value = resp.reward + value;
                cur = cur.tree_child(a);
                extended = true;
                break;
            }
        }
        if (!extended) break; // exhausted the rewarded suffix
    }
    return finish(value, true);
}

/// Greedy solver for one jump-chain member. From depth H/4 downward it
/// samples each action repeats = ceil(c * H^(k-1)) times; the action whose
/// edge jumps to the unit terminal at least once is on the special path.
/// Succeeds with probability at least 1 - H exp(-c); on failure the
/// straight all-zero descent is returned with its true value.
inline SioResult sio_greedy_solve_stochastic(GenerativeModel& gm, const StateRef& start, int k,
                                             double c, bool build_linear_policy = true) {
    const LayeredMdp& mdp = gm.mdp();
    const int horizon = mdp.horizon();
    const int depth = horizon / 2;
    const int quarter = horizon / 4;
    if (start.kind != StateKind::TreeNode || start.level > depth)
        throw InvalidState("solver start must be a tree state of the first half");
    const std::int64_t queries_before = gm.ledger().generative_queries();

    long double reps = c;
    for (int i = 0; i < k - 1; ++i) reps *= static_cast<long double>(horizon);
    const std::int64_t repeats = static_cast<std::int64_t>(std::ceil(reps));

    SioResult out;
    out.path.actions.assign(static_cast<std::size_t>(horizon), 0);
    for (int d = 0; d < start.level; ++d)
        out.path.actions[static_cast<std::size_t>(d)] = start.path_action(d);

    StateRef cur = start;
    while (cur.level < quarter) cur = cur.tree_child(0); // arbitrary descent, no queries
    bool lost = false;
    while (cur.level < depth && !lost) {
        std::optional<ActionId> jump_action;
        for (ActionId a = 0; a < 2 && !jump_action; ++a) {
            for (std::int64_t r = 0; r < repeats; ++r) {
                auto resp = gm.query(cur, a);
                if (resp.next.kind == StateKind::TerminalOne) {
                    jump_action = a;
                    break;
                }
            }
        }
        if (jump_action) {
            out.path.actions[static_cast<std::size_t>(cur.level)] = *jump_action;
            cur = cur.tree_child(*jump_action);
        } else {
            lost = true; // no jump observed; keep the straight descent
        }
    }

    out.found_reward = !lost;
    out.queries_used = gm.ledger().generative_queries() - queries_before;
    if (build_linear_policy) out.policy = path_to_linear_policy(out.path, mdp.feature_map().dim());
    out.value = policy_value(mdp, Policy{out.path}, start);
    return out;
}

enum class SioVariant { Deterministic, Stochastic };

struct SioParams {
    int gap = 2;    // deterministic variant: probe depth
    int k = 3;      // stochastic variant: repeat exponent
    double c = 5.0; // stochastic variant: repeat constant
};

inline SioResult sio_greedy_solve(GenerativeModel& gm, const StateRef& start, SioVariant variant,
                                  const SioParams& params) {
    if (variant == SioVariant::Deterministic)
        return sio_greedy_solve_deterministic(gm, start, params.gap);
    return sio_greedy_solve_stochastic(gm, start, params.k, params.c);
}

/// Optimal linear policy of one needle-tree member, built from family
/// metadata. Below depth H/2 each level needs one direction that picks the
/// star path's action at the star ancestor and the (shared) decoy action
/// everywhere else; four cases arise from the two action pairs. When the
/// actions agree a level direction vector suffices; when they differ the
/// star ancestor's own z vector separates it from every other state, whose
/// z inner products stay within the incoherence target.
inline LinearPolicy sio_linear_witness(const NeedleTreeMdp& member) {
    const auto* lazy = dynamic_cast<const LazyFeatureMap*>(&member.feature_map());
    if (!lazy) throw InvalidParams("witness construction needs the lazy featurization");
    const int horizon = member.horizon();
    const int half = horizon / 2;
    const int dim = lazy->dim();
    const std::uint64_t star = member.star_leaf_bits();
    const std::uint64_t decoy = member.decoy_index();

    LinearPolicy lin;
    lin.thetas.reserve(static_cast<std::size_t>(horizon));
    for (int h = 0; h < horizon; ++h) {
        if (h < half) {
            lin.thetas.push_back(level_direction_vector(dim, 0));
            continue;
        }
        ActionId star_action = static_cast<ActionId>((star >> h) & 1);
        ActionId decoy_action = static_cast<ActionId>((decoy >> (h - half)) & 1);
        if (star_action == decoy_action) {
            lin.thetas.push_back(level_direction_vector(dim, star_action));
            continue;
        }
        StateRef star_ancestor = StateRef::tree(star & low_bits_mask(h), h);
        std::vector<double> z = lazy->z_vector(star_ancestor);
        std::vector<double> theta(static_cast<std::size_t>(dim), 0.0);
        double sign = star_action == 0 ? 1.0 : -1.0;
        for (int i = 0; i < dim - 2; ++i) theta[static_cast<std::size_t>(i)] = sign * z[static_cast<std::size_t>(i)];
        theta[static_cast<std::size_t>(dim - 1)] = sign * 0.5;
        lin.thetas.push_back(normalized(std::move(theta)));
    }
    lin.validate();
    return lin;
}

} // namespace proxgen
