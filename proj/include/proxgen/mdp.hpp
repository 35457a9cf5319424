#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "proxgen/errors.hpp"
#include "proxgen/rng.hpp"

namespace proxgen {

/// Actions are shared across every state of an MDP and indexed from zero.
using ActionId = int;

inline std::uint64_t low_bits_mask(int n) {
    return n >= 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << n) - 1);
}

/// Layered state spaces are addressed lazily: tree states carry their
/// action path packed into bits, chain states carry the feeding leaf plus a
/// depth, terminals carry the level at which they were reached. Nothing is
/// materialized, so a depth-40 tree (2^40 states) costs the same to address
/// as a depth-8 one.
enum class StateKind : std::uint8_t {
    TreeNode = 0,
    ChainNode = 1,
    TerminalOne = 2,
    TerminalZero = 3,
    TabularIndex = 4,
};

struct StateRef {
    StateKind kind = StateKind::TreeNode;
    std::int32_t level = 0;       // terminals: arrival-level stamp
    std::int32_t chain_depth = 0; // ChainNode only, >= 1
    std::uint64_t bits = 0;       // action path (LSB = level-0 action) or tabular index

    static StateRef root() { return StateRef{}; }

    static StateRef tree(std::uint64_t path_bits, int level) {
        StateRef s;
        s.kind = StateKind::TreeNode;
        s.level = level;
        s.bits = path_bits;
        return s;
    }

    static StateRef chain(std::uint64_t leaf_bits, int leaf_level, int depth) {
        StateRef s;
        s.kind = StateKind::ChainNode;
        s.level = leaf_level + depth;
        s.chain_depth = depth;
        s.bits = leaf_bits;
        return s;
    }

    static StateRef terminal_one(int arrival_level) {
        StateRef s;
        s.kind = StateKind::TerminalOne;
        s.level = arrival_level;
        return s;
    }

    static StateRef terminal_zero(int arrival_level) {
        StateRef s;
        s.kind = StateKind::TerminalZero;
        s.level = arrival_level;
        return s;
    }

    static StateRef tabular(std::uint64_t index, int level) {
        StateRef s;
        s.kind = StateKind::TabularIndex;
        s.level = level;
        s.bits = index;
        return s;
    }

    /// Child of a tree node reached by taking `a`; level rises by one.
    StateRef tree_child(ActionId a) const {
        assert(kind == StateKind::TreeNode && level < 63);
        return tree(bits | (static_cast<std::uint64_t>(a & 1) << level), level + 1);
    }

    /// Action taken at tree depth `d` along this node's path.
    ActionId path_action(int d) const { return static_cast<ActionId>((bits >> d) & 1); }

    /// Materialized action path; length equals level for tree nodes.
    std::vector<ActionId> path() const {
        std::vector<ActionId> p;
        p.reserve(static_cast<std::size_t>(level));
        for (int d = 0; d < level; ++d) p.push_back(path_action(d));
        return p;
    }

    /// Canonical 64-bit key, stable across runs. Used for hashing and for
    /// keyed per-state randomness.
    std::uint64_t key() const {
        std::uint64_t k = splitmix64(static_cast<std::uint64_t>(kind) + 0x100);
        k = splitmix64(k ^ static_cast<std::uint64_t>(static_cast<std::uint32_t>(level)));
        k = splitmix64(k ^ static_cast<std::uint64_t>(static_cast<std::uint32_t>(chain_depth)));
        return splitmix64(k ^ bits);
    }

    friend bool operator==(const StateRef& a, const StateRef& b) {
        return a.kind == b.kind && a.level == b.level && a.chain_depth == b.chain_depth &&
               a.bits == b.bits;
    }

    friend bool operator<(const StateRef& a, const StateRef& b) {
        return std::tie(a.kind, a.level, a.chain_depth, a.bits) <
               std::tie(b.kind, b.level, b.chain_depth, b.bits);
    }
};

struct StateRefHash {
    std::size_t operator()(const StateRef& s) const { return static_cast<std::size_t>(s.key()); }
};

inline std::string to_string(const StateRef& s) {
    switch (s.kind) {
        case StateKind::TreeNode: {
            std::string p = "t:";
            for (int d = 0; d < s.level; ++d) p += static_cast<char>('0' + s.path_action(d));
            if (s.level == 0) p += "root";
            return p;
        }
        case StateKind::ChainNode:
            return "c:" + std::to_string(s.bits) + "+" + std::to_string(s.chain_depth);
        case StateKind::TerminalOne:
            return "one@" + std::to_string(s.level);
        case StateKind::TerminalZero:
            return "zero@" + std::to_string(s.level);
        case StateKind::TabularIndex:
            return "i:" + std::to_string(s.bits) + "@" + std::to_string(s.level);
    }
    return "?";
}

// ---------------------------------------------------------------------------

struct TransitionEntry {
    StateRef state;
    double probability = 1.0;
};

/// Successor distribution of one (state, action) pair. Probabilities are in
/// (0,1], sum to one within 1e-12, and every successor level exceeds the
/// source level.
struct TransitionSupport {
    std::vector<TransitionEntry> entries;

    static TransitionSupport deterministic(StateRef next) {
        TransitionSupport t;
        t.entries.push_back({next, 1.0});
        return t;
    }

    static TransitionSupport binary(StateRef main, double p_main, StateRef alt) {
        TransitionSupport t;
        t.entries.push_back({main, p_main});
        t.entries.push_back({alt, 1.0 - p_main});
        return t;
    }

    bool deterministic_single() const {
        return entries.size() == 1 && entries[0].probability == 1.0;
    }

    void validate(int source_level) const {
        double sum = 0.0;
        for (const auto& e : entries) {
            if (e.probability <= 0.0 || e.probability > 1.0)
                throw InvalidState("transition probability outside (0,1]");
            if (e.state.level <= source_level)
                throw InvalidState("transition does not raise level");
            sum += e.probability;
        }
        if (std::abs(sum - 1.0) > 1e-12)
            throw InvalidState("transition probabilities sum to " + std::to_string(sum));
    }

    StateRef sample(Rng& rng) const {
        if (entries.size() == 1) return entries[0].state;
        double u = rng.next_unit();
        double acc = 0.0;
        for (const auto& e : entries) {
            acc += e.probability;
            if (u < acc) return e.state;
        }
        return entries.back().state;
    }
};

/// Half L1 distance between two successor distributions, taken over the
/// union of their supports. Always in [0, 1].
inline double tv_distance(const TransitionSupport& p, const TransitionSupport& q) {
    std::map<StateRef, double> diff;
    for (const auto& e : p.entries) diff[e.state] += e.probability;
    for (const auto& e : q.entries) diff[e.state] -= e.probability;
    double l1 = 0.0;
    for (const auto& [s, d] : diff) l1 += std::abs(d);
    return 0.5 * l1;
}

// ---------------------------------------------------------------------------

/// State-action featurization shared by every member of a family. Feature
/// vectors are unit-norm (within 1e-9) and never depend on rewards.
class FeatureMap {
public:
    virtual ~FeatureMap() = default;
    virtual int dim() const = 0;
    virtual std::vector<double> feature(const StateRef& s, ActionId a) const = 0;
};

/// Cheap default featurization: a one-hot unit vector at a keyed index.
class KeyedOneHotFeatures final : public FeatureMap {
public:
    explicit KeyedOneHotFeatures(int dim, std::uint64_t seed = 0) : dim_(dim), seed_(seed) {
        if (dim < 1) throw InvalidParams("feature dim must be >= 1");
    }

    int dim() const override { return dim_; }

    std::vector<double> feature(const StateRef& s, ActionId a) const override {
        std::vector<double> v(static_cast<std::size_t>(dim_), 0.0);
        std::uint64_t k = splitmix64(s.key() ^ splitmix64(seed_ ^ static_cast<std::uint64_t>(a)));
        v[k % static_cast<std::uint64_t>(dim_)] = 1.0;
        return v;
    }

private:
    int dim_;
    std::uint64_t seed_;
};

// ---------------------------------------------------------------------------

/// Finite-horizon layered MDP. Levels strictly increase along transitions;
/// an episode ends once the level reaches the horizon. Rewards are
/// nonnegative and every trajectory's total reward is bounded by one.
///
/// Representations are either explicit (reachable states enumerable within
/// a cap) or implicit (states addressed by path only); implicit builders
/// supply a closed-form optimal value via analytic_optimal_value().
class LayeredMdp {
public:
    LayeredMdp(int horizon, int action_count, std::shared_ptr<const FeatureMap> features)
        : horizon_(horizon), action_count_(action_count), features_(std::move(features)) {
        if (horizon_ < 1) throw InvalidParams("horizon must be >= 1");
        if (action_count_ < 2) throw InvalidParams("action count must be >= 2");
        if (!features_) throw InvalidParams("feature map required");
    }

    virtual ~LayeredMdp() = default;

    int horizon() const { return horizon_; }
    int action_count() const { return action_count_; }

    const FeatureMap& feature_map() const { return *features_; }
    std::shared_ptr<const FeatureMap> feature_map_ptr() const { return features_; }
    std::vector<double> feature(const StateRef& s, ActionId a) const {
        return features_->feature(s, a);
    }

    virtual StateRef initial_state() const { return StateRef::root(); }

    /// True once no further action can be taken from `s`.
    bool episode_over(const StateRef& s) const { return s.level >= horizon_; }

    virtual TransitionSupport transition(const StateRef& s, ActionId a) const = 0;
    virtual double reward(const StateRef& s, ActionId a) const = 0;

    /// Single successor draw; override where materializing the support
    /// would dominate the cost of stepping.
    virtual StateRef sample_next(const StateRef& s, ActionId a, Rng& rng) const {
        return transition(s, a).sample(rng);
    }

    virtual bool deterministic_transitions() const { return true; }

    /// Closed-form V*(s) supplied by implicit builders; nullopt when only
    /// dynamic programming applies.
    virtual std::optional<double> analytic_optimal_value(const StateRef&) const {
        return std::nullopt;
    }

private:
    int horizon_;
    int action_count_;
    std::shared_ptr<const FeatureMap> features_;
};

// ---------------------------------------------------------------------------

/// Table-backed MDP over tabular-indexed states. Used for hand-built
/// fixtures and anywhere full enumeration is the point.
class ExplicitMdp final : public LayeredMdp {
public:
    struct StateSpec {
        int level = 0;
        std::vector<double> rewards;             // one per action
        std::vector<TransitionSupport> next;     // one per action; empty if level >= H
    };

    ExplicitMdp(int horizon, int action_count, std::vector<StateSpec> states,
                std::shared_ptr<const FeatureMap> features, std::uint64_t initial_index = 0)
        : LayeredMdp(horizon, action_count, std::move(features)),
          states_(std::move(states)),
          initial_index_(initial_index) {
        for (const auto& st : states_) {
            if (st.level >= horizon) continue;
            if (static_cast<int>(st.rewards.size()) != action_count ||
                static_cast<int>(st.next.size()) != action_count)
                throw InvalidParams("state table shape mismatch");
            for (const auto& t : st.next) t.validate(st.level);
            for (double r : st.rewards)
                if (r < 0.0) throw InvalidParams("negative reward");
        }
        deterministic_ = true;
        for (const auto& st : states_)
            for (const auto& t : st.next)
                if (!t.deterministic_single()) deterministic_ = false;
    }

    StateRef initial_state() const override {
        return StateRef::tabular(initial_index_, states_.at(initial_index_).level);
    }

    TransitionSupport transition(const StateRef& s, ActionId a) const override {
        return spec(s).next.at(static_cast<std::size_t>(a));
    }

    double reward(const StateRef& s, ActionId a) const override {
        return spec(s).rewards.at(static_cast<std::size_t>(a));
    }

    bool deterministic_transitions() const override { return deterministic_; }

    std::size_t state_count() const { return states_.size(); }

private:
    const StateSpec& spec(const StateRef& s) const {
        if (s.kind != StateKind::TabularIndex || s.bits >= states_.size())
            throw InvalidState("unknown tabular state " + to_string(s));
        return states_[static_cast<std::size_t>(s.bits)];
    }

    std::vector<StateSpec> states_;
    std::uint64_t initial_index_;
    bool deterministic_ = true;
};

} // namespace proxgen
