#pragma once

#include <cstdio>
#include <functional>
#include <iomanip>
#include <sstream>
#include <string>

#include "proxgen/query.hpp"
#include "proxgen/value.hpp"

namespace proxgen {

inline std::uint64_t fnv1a64(const std::string& data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t x) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << x;
    return os.str();
}

/// Shortest decimal form that parses back to the same double.
inline std::string shortest_double_string(double x) {
    char buf[64];
    for (int precision = 1; precision <= 17; ++precision) {
        std::snprintf(buf, sizeof(buf), "%.*g", precision, x);
        if (std::strtod(buf, nullptr) == x) break;
    }
    return buf;
}

/// Construction-time knowledge about a family, for audits and measurement
/// only. Algorithms under test never receive this object; they interact
/// with members purely through query models and oracles.
struct FamilyMetadata {
    std::optional<DeterministicPolicy> shared_policy; // hidden near-optimal policy
    std::optional<SequencePolicy> shared_path;        // root path form, when one exists
    bool has_star_leaf = false;
    std::uint64_t star_leaf_bits = 0; // hidden shared-optimal leaf
};

struct FamilyMember {
    std::string id;
    double weight = 1.0;
    std::shared_ptr<const LayeredMdp> mdp;
};

/// Finite weighted family of layered MDPs over one state-action space.
/// Small families hold their members directly; families with exponentially
/// many members (uniform weights by construction) materialize members on
/// demand from an index. Immutable after construction.
class MdpDistribution {
public:
    using MemberFactory = std::function<std::shared_ptr<const LayeredMdp>(std::size_t)>;

    /// Enumerating measurements refuse families larger than this.
    static constexpr std::size_t kMeasureMemberCap = 4096;

    MdpDistribution(std::string kind, std::vector<FamilyMember> members,
                    std::int64_t sample_cost, bool shared_state_space,
                    bool shared_deterministic_transitions, FamilyMetadata metadata,
                    std::vector<std::pair<std::string, std::string>> info)
        : kind_(std::move(kind)), members_(std::move(members)), sample_cost_(sample_cost),
          shared_state_space_(shared_state_space),
          shared_deterministic_transitions_(shared_deterministic_transitions),
          metadata_(std::move(metadata)), info_(std::move(info)) {
        if (members_.empty()) throw InvalidParams("family needs at least one member");
        if (sample_cost_ < 1) throw InvalidParams("sample cost q_D must be >= 1");
        double sum = 0.0;
        cumulative_.reserve(members_.size());
        for (const auto& m : members_) {
            if (m.weight <= 0.0) throw InvalidParams("member weight must be positive");
            if (!m.mdp) throw InvalidParams("member MDP missing");
            sum += m.weight;
            cumulative_.push_back(sum);
        }
        if (std::abs(sum - 1.0) > 1e-12)
            throw InvalidParams("member weights sum to " + std::to_string(sum));
        check_shared_shape();
    }

    MdpDistribution(std::string kind, std::size_t member_count, MemberFactory factory,
                    std::int64_t sample_cost, bool shared_state_space,
                    bool shared_deterministic_transitions, FamilyMetadata metadata,
                    std::vector<std::pair<std::string, std::string>> info)
        : kind_(std::move(kind)), lazy_count_(member_count), factory_(std::move(factory)),
          sample_cost_(sample_cost), shared_state_space_(shared_state_space),
          shared_deterministic_transitions_(shared_deterministic_transitions),
          metadata_(std::move(metadata)), info_(std::move(info)) {
        if (lazy_count_ == 0) throw InvalidParams("family needs at least one member");
        if (sample_cost_ < 1) throw InvalidParams("sample cost q_D must be >= 1");
        first_ = factory_(0);
        check_shared_shape();
    }

    const std::string& kind() const { return kind_; }
    bool lazy() const { return lazy_count_ != 0; }
    std::size_t size() const { return lazy() ? lazy_count_ : members_.size(); }

    std::shared_ptr<const LayeredMdp> mdp_ptr(std::size_t i) const {
        if (lazy()) {
            if (i >= lazy_count_) throw InvalidParams("member index out of range");
            return i == 0 ? first_ : factory_(i);
        }
        return members_.at(i).mdp;
    }

    const LayeredMdp& mdp(std::size_t i) const {
        if (lazy()) throw InvalidParams("lazy family members must be held via mdp_ptr");
        return *members_.at(i).mdp;
    }

    double weight(std::size_t i) const {
        if (lazy()) return 1.0 / static_cast<double>(lazy_count_);
        return members_.at(i).weight;
    }

    std::string member_id(std::size_t i) const {
        if (lazy()) return "m" + std::to_string(i);
        return members_.at(i).id;
    }

    int horizon() const { return reference().horizon(); }
    int action_count() const { return reference().action_count(); }
    std::int64_t sample_cost() const { return sample_cost_; }
    bool shared_state_space() const { return shared_state_space_; }
    bool shared_deterministic_transitions() const { return shared_deterministic_transitions_; }

    /// Member 0; safe to use for shared structure (initial state, features).
    const LayeredMdp& reference() const { return lazy() ? *first_ : *members_.front().mdp; }

    std::size_t sample_index(Rng& rng) const {
        if (lazy()) return static_cast<std::size_t>(rng.next_below(lazy_count_));
        double u = rng.next_unit();
        auto it = std::lower_bound(cumulative_.begin(), cumulative_.end(), u);
        std::size_t i = static_cast<std::size_t>(it - cumulative_.begin());
        return std::min(i, members_.size() - 1);
    }

    /// Construction-time metadata; audit and measurement code only.
    const FamilyMetadata& audit_metadata() const { return metadata_; }

    const std::vector<std::pair<std::string, std::string>>& info() const { return info_; }

    void ensure_measurable() const {
        if (size() > kMeasureMemberCap)
            throw CapExceeded("family has " + std::to_string(size()) +
                              " members; enumeration capped at " +
                              std::to_string(kMeasureMemberCap));
    }

private:
    void check_shared_shape() const {
        if (!shared_state_space_ || lazy()) return;
        for (const auto& m : members_) {
            if (m.mdp->horizon() != horizon() || m.mdp->action_count() != action_count())
                throw InvalidParams("members disagree on horizon or action count");
        }
    }

    std::string kind_;
    std::vector<FamilyMember> members_;
    std::size_t lazy_count_ = 0;
    MemberFactory factory_;
    std::shared_ptr<const LayeredMdp> first_;
    std::int64_t sample_cost_;
    bool shared_state_space_;
    bool shared_deterministic_transitions_;
    FamilyMetadata metadata_;
    std::vector<std::pair<std::string, std::string>> info_;
    std::vector<double> cumulative_;
};

/// Draw one member i.i.d. by weight. Charges q_D to the ledger.
inline std::size_t sample_mdp(const MdpDistribution& dist, QueryLedger& ledger, Rng& rng) {
    ledger.charge_mdp_sample();
    return dist.sample_index(rng);
}

/// Exact family-expected value of a policy from the shared initial state.
inline double expected_policy_value(const MdpDistribution& dist, const Policy& policy,
                                    std::size_t cap = kDefaultStateCap) {
    dist.ensure_measurable();
    double v = 0.0;
    for (std::size_t i = 0; i < dist.size(); ++i) {
        auto m = dist.mdp_ptr(i);
        v += dist.weight(i) * policy_value(*m, policy, cap);
    }
    return v;
}

// ---------------------------------------------------------------------------
// Measurement of family similarity parameters.

struct GapMeasurement {
    double eps_r = 0.0; // max over members and reachable (s,a) of reward gap
    double eps_p = 0.0; // max over members and reachable (s,a) of transition TV gap
    std::size_t pairs_checked = 0;
};

namespace detail {

/// Reachable states of the shared space: breadth-first closure over the
/// union of every member's transitions, so pairs reachable in any member
/// are measured.
inline std::vector<StateRef> union_reachable_states(const MdpDistribution& dist,
                                                    std::size_t cap) {
    dist.ensure_measurable();
    std::vector<std::shared_ptr<const LayeredMdp>> members;
    for (std::size_t i = 0; i < dist.size(); ++i) members.push_back(dist.mdp_ptr(i));
    std::vector<StateRef> order;
    std::unordered_set<StateRef, StateRefHash> seen;
    std::deque<StateRef> frontier;
    StateRef s0 = members[0]->initial_state();
    frontier.push_back(s0);
    seen.insert(s0);
    while (!frontier.empty()) {
        StateRef s = frontier.front();
        frontier.pop_front();
        order.push_back(s);
        if (members[0]->episode_over(s)) continue;
        for (const auto& m : members) {
            for (ActionId a = 0; a < dist.action_count(); ++a) {
                for (const auto& e : m->transition(s, a).entries) {
                    if (seen.insert(e.state).second) {
                        if (seen.size() > cap)
                            throw CapExceeded("shared state space exceeds cap " +
                                              std::to_string(cap));
                        frontier.push_back(e.state);
                    }
                }
            }
        }
    }
    return order;
}

inline std::string support_signature(const TransitionSupport& t) {
    std::ostringstream os;
    for (const auto& e : t.entries)
        os << to_string(e.state) << ':' << std::hexfloat << e.probability << ';';
    return os.str();
}

} // namespace detail

/// Worst-case per-pair reward and transition gaps across the family,
/// enumerated over reachable (s, a) of the shared space.
inline GapMeasurement measure_gaps(const MdpDistribution& dist,
                                   std::size_t cap = kDefaultStateCap) {
    if (!dist.shared_state_space())
        throw NotSharedSpace("gap measurement needs a shared state-action space");
    GapMeasurement out;
    std::vector<StateRef> states = detail::union_reachable_states(dist, cap);
    std::vector<std::shared_ptr<const LayeredMdp>> members;
    for (std::size_t i = 0; i < dist.size(); ++i) members.push_back(dist.mdp_ptr(i));
    for (const StateRef& s : states) {
        if (members[0]->episode_over(s)) continue;
        for (ActionId a = 0; a < dist.action_count(); ++a) {
            ++out.pairs_checked;
            double r_min = std::numeric_limits<double>::infinity();
            double r_max = -r_min;
            std::map<std::string, TransitionSupport> groups;
            for (const auto& m : members) {
                double r = m->reward(s, a);
                r_min = std::min(r_min, r);
                r_max = std::max(r_max, r);
                TransitionSupport t = m->transition(s, a);
                groups.emplace(detail::support_signature(t), std::move(t));
            }
            out.eps_r = std::max(out.eps_r, r_max - r_min);
            if (groups.size() > 1) {
                std::vector<const TransitionSupport*> distinct;
                for (const auto& [sig, t] : groups) distinct.push_back(&t);
                for (std::size_t i = 0; i < distinct.size(); ++i)
                    for (std::size_t j = i + 1; j < distinct.size(); ++j)
                        out.eps_p = std::max(out.eps_p, tv_distance(*distinct[i], *distinct[j]));
            }
        }
    }
    return out;
}

enum class AlphaScope {
    Start,     // gap measured at the initial state only
    AllStates, // gap measured at every reachable state
};

namespace detail {

/// Policy-restricted value table over the given states (one backward pass).
inline ValueTable policy_values_over(const LayeredMdp& mdp, const DeterministicPolicy& policy,
                                     std::vector<StateRef> states) {
    std::sort(states.begin(), states.end(),
              [](const StateRef& a, const StateRef& b) { return a.level > b.level; });
    ValueTable values;
    values.reserve(states.size());
    for (const StateRef& s : states) {
        if (mdp.episode_over(s)) {
            values[s] = 0.0;
            continue;
        }
        ActionId a = policy.action_of(s);
        double v = mdp.reward(s, a);
        for (const auto& e : mdp.transition(s, a).entries) {
            auto it = values.find(e.state);
            v += e.probability * (it == values.end() ? 0.0 : it->second);
        }
        values[s] = v;
    }
    return values;
}

} // namespace detail

/// Worst-case suboptimality of one candidate policy across the family:
/// scope Start maximizes the value gap over members at the initial state,
/// scope AllStates additionally maximizes over every reachable state.
inline double measure_alpha(const MdpDistribution& dist, const DeterministicPolicy& candidate,
                            AlphaScope scope, std::size_t cap = kDefaultStateCap) {
    dist.ensure_measurable();
    double alpha = 0.0;
    if (scope == AlphaScope::Start) {
        for (std::size_t i = 0; i < dist.size(); ++i) {
            auto m = dist.mdp_ptr(i);
            double vstar = optimal_value_at(*m, m->initial_state(), cap);
            double vpol = policy_value(*m, Policy{candidate}, cap);
            alpha = std::max(alpha, vstar - vpol);
        }
        return alpha;
    }
    for (std::size_t i = 0; i < dist.size(); ++i) {
        auto m = dist.mdp_ptr(i);
        std::vector<StateRef> states = reachable_states(*m, cap);
        ValueTable vstar = optimal_values(*m, cap);
        ValueTable vpol = detail::policy_values_over(*m, candidate, states);
        for (const StateRef& s : states)
            alpha = std::max(alpha, vstar.at(s) - vpol.at(s));
    }
    return alpha;
}

// ---------------------------------------------------------------------------

/// Every action sequence of the given length, horizon-padded with action 0.
/// The enumeration backbone of exhaustive path checks.
inline std::vector<SequencePolicy> enumerate_path_policies(int levels, int horizon,
                                                           int action_count = 2) {
    std::uint64_t total = 1;
    for (int i = 0; i < levels; ++i) {
        total *= static_cast<std::uint64_t>(action_count);
        if (total > (std::uint64_t{1} << 20))
            throw CapExceeded("path policy enumeration exceeds cap");
    }
    std::vector<SequencePolicy> out;
    out.reserve(total);
    for (std::uint64_t code = 0; code < total; ++code) {
        SequencePolicy seq;
        seq.actions.assign(static_cast<std::size_t>(horizon), 0);
        std::uint64_t c = code;
        for (int d = 0; d < levels; ++d) {
            seq.actions[static_cast<std::size_t>(d)] =
                static_cast<ActionId>(c % static_cast<std::uint64_t>(action_count));
            c /= static_cast<std::uint64_t>(action_count);
        }
        out.push_back(std::move(seq));
    }
    return out;
}

struct BruteForceResult {
    Policy policy;
    double alpha = 0.0;
};

/// Independent oracle: exhaustively minimizes the Start-scope alpha over
/// deterministic policies. For families over a shared tree only the action
/// sequence from the root can affect start-state values, so the search
/// space is A^H; otherwise every assignment of actions to reachable states
/// is tried. Either way the candidate count is capped at 2^20.
inline BruteForceResult brute_force_shared_policy(const MdpDistribution& dist,
                                                  std::size_t cap = kDefaultStateCap) {
    dist.ensure_measurable();
    std::vector<std::shared_ptr<const LayeredMdp>> members;
    for (std::size_t i = 0; i < dist.size(); ++i) members.push_back(dist.mdp_ptr(i));
    std::vector<double> vstar0(dist.size());
    for (std::size_t i = 0; i < dist.size(); ++i)
        vstar0[i] = optimal_value_at(*members[i], members[i]->initial_state(), cap);

    auto weak_alpha = [&](const Policy& p) {
        double alpha = 0.0;
        for (std::size_t i = 0; i < dist.size(); ++i)
            alpha = std::max(alpha, vstar0[i] - policy_value(*members[i], p, cap));
        return alpha;
    };

    const bool path_searchable = dist.shared_state_space() &&
                                 dist.reference().initial_state().kind == StateKind::TreeNode;
    if (path_searchable) {
        std::vector<SequencePolicy> seqs =
            enumerate_path_policies(dist.horizon(), dist.horizon(), dist.action_count());
        BruteForceResult best{Policy{seqs.front()}, weak_alpha(Policy{seqs.front()})};
        for (std::size_t i = 1; i < seqs.size(); ++i) {
            double a = weak_alpha(Policy{seqs[i]});
            if (a < best.alpha) best = {Policy{seqs[i]}, a};
        }
        return best;
    }

    std::vector<StateRef> states = detail::union_reachable_states(dist, cap);
    std::vector<StateRef> decision_states;
    for (const StateRef& s : states)
        if (!dist.reference().episode_over(s)) decision_states.push_back(s);
    std::sort(decision_states.begin(), decision_states.end());
    double combos = std::pow(static_cast<double>(dist.action_count()),
                             static_cast<double>(decision_states.size()));
    if (combos > static_cast<double>(std::uint64_t{1} << 20))
        throw CapExceeded("full policy enumeration exceeds cap");

    std::uint64_t total = static_cast<std::uint64_t>(combos);
    std::optional<BruteForceResult> best;
    for (std::uint64_t code = 0; code < total; ++code) {
        auto table = std::make_shared<std::unordered_map<StateRef, ActionId, StateRefHash>>();
        std::uint64_t c = code;
        for (const StateRef& s : decision_states) {
            (*table)[s] =
                static_cast<ActionId>(c % static_cast<std::uint64_t>(dist.action_count()));
            c /= static_cast<std::uint64_t>(dist.action_count());
        }
        DeterministicPolicy pol{[table](const StateRef& s) {
            auto it = table->find(s);
            return it == table->end() ? ActionId{0} : it->second;
        }};
        double a = weak_alpha(Policy{pol});
        if (!best || a < best->alpha) best = BruteForceResult{Policy{pol}, a};
    }
    return *best;
}

// ---------------------------------------------------------------------------

struct SimulationCheckEntry {
    double max_gap = 0.0; // max over member pairs of |V_i - V_j|
    bool pass = true;
};

struct SimulationCheckReport {
    double eps_r = 0.0;
    double eps_p = 0.0;
    double bound = 0.0; // (eps_r + eps_p) * H
    std::vector<SimulationCheckEntry> per_policy;
    double max_gap = 0.0;
    std::size_t violations = 0;
    bool all_pass = true;
};

/// Simulation-lemma audit: for each policy, the worst member-pair value gap
/// against the bound (eps_r + eps_p) * H with measured gaps.
inline SimulationCheckReport simulation_lemma_check(const MdpDistribution& dist,
                                                    const std::vector<SequencePolicy>& policies,
                                                    std::size_t cap = kDefaultStateCap) {
    SimulationCheckReport report;
    GapMeasurement gaps = measure_gaps(dist, cap);
    report.eps_r = gaps.eps_r;
    report.eps_p = gaps.eps_p;
    report.bound = (gaps.eps_r + gaps.eps_p) * dist.horizon();
    report.per_policy.reserve(policies.size());
    std::vector<std::shared_ptr<const LayeredMdp>> members;
    for (std::size_t i = 0; i < dist.size(); ++i) members.push_back(dist.mdp_ptr(i));
    std::vector<double> values(dist.size());
    for (const auto& seq : policies) {
        for (std::size_t i = 0; i < dist.size(); ++i)
            values[i] = policy_value(*members[i], Policy{seq}, cap);
        auto [lo, hi] = std::minmax_element(values.begin(), values.end());
        SimulationCheckEntry entry;
        entry.max_gap = *hi - *lo;
        entry.pass = entry.max_gap <= report.bound + 1e-9;
        report.max_gap = std::max(report.max_gap, entry.max_gap);
        if (!entry.pass) {
            ++report.violations;
            report.all_pass = false;
        }
        report.per_policy.push_back(entry);
    }
    return report;
}

// ---------------------------------------------------------------------------

/// Structured text manifest for experiment provenance. Measured parameters
/// are appended when the family is small enough to enumerate.
inline std::string family_manifest(const MdpDistribution& dist, bool include_measured = true,
                                   std::size_t cap = kDefaultStateCap) {
    std::ostringstream os;
    os << "kind = " << dist.kind() << "\n";
    os << "members = " << dist.size() << "\n";
    os << "horizon = " << dist.horizon() << "\n";
    os << "actions = " << dist.action_count() << "\n";
    os << "feature_dim = " << dist.reference().feature_map().dim() << "\n";
    os << "q_D = " << dist.sample_cost() << "\n";
    os << "shared_state_space = " << (dist.shared_state_space() ? 1 : 0) << "\n";
    os << "shared_deterministic_transitions = "
       << (dist.shared_deterministic_transitions() ? 1 : 0) << "\n";
    for (const auto& [k, v] : dist.info()) os << k << " = " << v << "\n";
    if (include_measured) {
        try {
            GapMeasurement gaps = measure_gaps(dist, cap);
            os << "measured_eps_r = " << std::setprecision(17) << gaps.eps_r << "\n";
            os << "measured_eps_p = " << std::setprecision(17) << gaps.eps_p << "\n";
            if (dist.audit_metadata().shared_policy) {
                double alpha = measure_alpha(dist, *dist.audit_metadata().shared_policy,
                                             AlphaScope::Start, cap);
                os << "measured_alpha_start = " << std::setprecision(17) << alpha << "\n";
            }
        } catch (const CapExceeded&) {
            os << "measured = skipped_cap_exceeded\n";
        }
    }
    return os.str();
}

inline std::string family_manifest_hash(const std::string& manifest) {
    return hex64(fnv1a64(manifest));
}

} // namespace proxgen
