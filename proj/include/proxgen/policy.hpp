#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <variant>
#include <vector>

#include "proxgen/mdp.hpp"

namespace proxgen {

/// Total deterministic state-to-action map.
struct DeterministicPolicy {
    std::function<ActionId(const StateRef&)> action_of;
};

/// One unit-norm parameter vector per level; acts by feature inner product.
struct LinearPolicy {
    std::vector<std::vector<double>> thetas; // H vectors of length d

    void validate() const {
        for (const auto& th : thetas) {
            double n2 = 0.0;
            for (double x : th) n2 += x * x;
            if (std::abs(std::sqrt(n2) - 1.0) > 1e-9)
                throw InvalidParams("linear policy parameter is not unit norm");
        }
    }
};

/// One action per timestep; the output representation of genrl_train.
struct SequencePolicy {
    std::vector<ActionId> actions; // length H

    ActionId at(int t) const { return actions.at(static_cast<std::size_t>(t)); }
};

using Policy = std::variant<DeterministicPolicy, LinearPolicy, SequencePolicy>;

inline std::vector<double> normalized(std::vector<double> v) {
    double n2 = 0.0;
    for (double x : v) n2 += x * x;
    double n = std::sqrt(n2);
    if (n == 0.0) throw InvalidParams("cannot normalize zero vector");
    for (double& x : v) x /= n;
    return v;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

/// Argmax of feature(s,a).theta over actions; ties break to the smallest
/// ActionId.
inline ActionId linear_action_raw(const LayeredMdp& mdp, std::span<const double> theta,
                                  const StateRef& s) {
    ActionId best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (ActionId a = 0; a < mdp.action_count(); ++a) {
        std::vector<double> phi = mdp.feature(s, a);
        double score = dot(phi, theta);
        if (score > best_score) {
            best_score = score;
            best = a;
        }
    }
    return best;
}

inline ActionId linear_action(const LayeredMdp& mdp, const LinearPolicy& lin, const StateRef& s) {
    if (s.level >= mdp.horizon()) throw InvalidState("linear_action past horizon");
    return linear_action_raw(mdp, lin.thetas.at(static_cast<std::size_t>(s.level)), s);
}

/// Action prescribed by any policy kind at state `s`.
inline ActionId policy_action(const LayeredMdp& mdp, const Policy& policy, const StateRef& s) {
    if (const auto* det = std::get_if<DeterministicPolicy>(&policy)) return det->action_of(s);
    if (const auto* lin = std::get_if<LinearPolicy>(&policy)) return linear_action(mdp, *lin, s);
    return std::get<SequencePolicy>(policy).at(s.level);
}

/// Deterministic policy that follows a fixed root path through a binary
/// tree (bit t of `path_bits` at level t) and plays action 0 elsewhere.
inline DeterministicPolicy tree_path_policy(std::uint64_t path_bits, int horizon) {
    return DeterministicPolicy{[path_bits, horizon](const StateRef& s) -> ActionId {
        if (s.kind != StateKind::TreeNode || s.level >= horizon) return 0;
        if ((path_bits & low_bits_mask(s.level)) != s.bits) return 0;
        return static_cast<ActionId>((path_bits >> s.level) & 1);
    }};
}

inline SequencePolicy path_bits_to_sequence(std::uint64_t bits, int horizon) {
    SequencePolicy seq;
    seq.actions.reserve(static_cast<std::size_t>(horizon));
    for (int t = 0; t < horizon; ++t)
        seq.actions.push_back(static_cast<ActionId>((bits >> t) & 1));
    return seq;
}

} // namespace proxgen
