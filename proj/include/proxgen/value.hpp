#pragma once

#include <deque>
#include <unordered_map>
#include <unordered_set>

#include "proxgen/policy.hpp"

namespace proxgen {

inline constexpr std::size_t kDefaultStateCap = std::size_t{1} << 20;

/// All states reachable from the initial state, in breadth-first order.
/// Throws CapExceeded once more than `cap` states are discovered, which is
/// how implicit exponential instances refuse enumeration.
inline std::vector<StateRef> reachable_states(const LayeredMdp& mdp,
                                              std::size_t cap = kDefaultStateCap) {
    std::vector<StateRef> order;
    std::unordered_set<StateRef, StateRefHash> seen;
    std::deque<StateRef> frontier;
    StateRef s0 = mdp.initial_state();
    frontier.push_back(s0);
    seen.insert(s0);
    while (!frontier.empty()) {
        StateRef s = frontier.front();
        frontier.pop_front();
        order.push_back(s);
        if (mdp.episode_over(s)) continue;
        for (ActionId a = 0; a < mdp.action_count(); ++a) {
            for (const auto& e : mdp.transition(s, a).entries) {
                if (seen.insert(e.state).second) {
                    if (seen.size() > cap)
                        throw CapExceeded("reachable state count exceeds cap " +
                                          std::to_string(cap));
                    frontier.push_back(e.state);
                }
            }
        }
    }
    return order;
}

using ValueTable = std::unordered_map<StateRef, double, StateRefHash>;

/// Exact V* for every reachable state by backward induction over levels.
/// This is the dynamic-programming oracle that backs value oracles and all
/// cross-checks of the builders' closed forms.
inline ValueTable optimal_values(const LayeredMdp& mdp, std::size_t cap = kDefaultStateCap) {
    std::vector<StateRef> states = reachable_states(mdp, cap);
    std::sort(states.begin(), states.end(),
              [](const StateRef& a, const StateRef& b) { return a.level > b.level; });
    ValueTable values;
    values.reserve(states.size());
    for (const StateRef& s : states) {
        if (mdp.episode_over(s)) {
            values[s] = 0.0;
            continue;
        }
        double best = -std::numeric_limits<double>::infinity();
        for (ActionId a = 0; a < mdp.action_count(); ++a) {
            double q = mdp.reward(s, a);
            for (const auto& e : mdp.transition(s, a).entries)
                q += e.probability * values.at(e.state);
            best = std::max(best, q);
        }
        values[s] = best;
    }
    return values;
}

/// Greedy action with respect to a value table; smallest index wins ties.
inline ActionId greedy_action(const LayeredMdp& mdp, const ValueTable& values,
                              const StateRef& s) {
    ActionId best = 0;
    double best_q = -std::numeric_limits<double>::infinity();
    for (ActionId a = 0; a < mdp.action_count(); ++a) {
        double q = mdp.reward(s, a);
        for (const auto& e : mdp.transition(s, a).entries)
            q += e.probability * values.at(e.state);
        if (q > best_q) {
            best_q = q;
            best = a;
        }
    }
    return best;
}

/// V*(s) for one state: the builder's closed form when present, otherwise
/// dynamic programming.
inline double optimal_value_at(const LayeredMdp& mdp, const StateRef& s,
                               std::size_t cap = kDefaultStateCap) {
    if (auto v = mdp.analytic_optimal_value(s)) return *v;
    return optimal_values(mdp, cap).at(s);
}

namespace detail {

inline double policy_value_rec(const LayeredMdp& mdp, const Policy& policy, const StateRef& s,
                               ValueTable& memo, std::size_t cap) {
    if (mdp.episode_over(s)) return 0.0;
    auto it = memo.find(s);
    if (it != memo.end()) return it->second;
    if (memo.size() > cap) throw CapExceeded("policy evaluation visited more states than cap");
    ActionId a = policy_action(mdp, policy, s);
    double v = mdp.reward(s, a);
    for (const auto& e : mdp.transition(s, a).entries)
        v += e.probability * policy_value_rec(mdp, policy, e.state, memo, cap);
    memo.emplace(s, v);
    return v;
}

} // namespace detail

/// Exact expected cumulative reward of `policy` from `start`. Levels rise
/// strictly along transitions, so the recursion depth is at most H and only
/// states actually visited by the policy are touched; no enumeration of the
/// full space happens even for implicit MDPs.
inline double policy_value(const LayeredMdp& mdp, const Policy& policy, const StateRef& start,
                           std::size_t cap = kDefaultStateCap) {
    ValueTable memo;
    return detail::policy_value_rec(mdp, policy, start, memo, cap);
}

inline double policy_value(const LayeredMdp& mdp, const Policy& policy,
                           std::size_t cap = kDefaultStateCap) {
    return policy_value(mdp, policy, mdp.initial_state(), cap);
}

// ---------------------------------------------------------------------------

struct RolloutStep {
    StateRef state;
    ActionId action;
    double reward;
};

struct RolloutResult {
    std::vector<RolloutStep> trajectory;
    double total_reward = 0.0;
};

/// Monte Carlo realization of one episode. Deterministic given the seed.
inline RolloutResult rollout(const LayeredMdp& mdp, const Policy& policy, std::uint64_t seed) {
    Rng rng(seed);
    RolloutResult out;
    StateRef s = mdp.initial_state();
    while (!mdp.episode_over(s)) {
        ActionId a = policy_action(mdp, policy, s);
        double r = mdp.reward(s, a);
        out.trajectory.push_back({s, a, r});
        out.total_reward += r;
        s = mdp.sample_next(s, a, rng);
    }
    return out;
}

} // namespace proxgen
