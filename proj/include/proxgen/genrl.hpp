#pragma once

#include "proxgen/oracles.hpp"

namespace proxgen {

/// Sample size n = ceil((H^2 / eps^2) * ln(2 H A / delta)). The log is the
/// natural one (Hoeffding convention).
inline std::int64_t genrl_sample_size(double epsilon, double delta, int horizon,
                                      int action_count) {
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw InvalidParams("epsilon must be in (0,1)");
    if (!(delta > 0.0 && delta < 1.0)) throw InvalidParams("delta must be in (0,1)");
    double h = static_cast<double>(horizon);
    double n = (h * h / (epsilon * epsilon)) *
               std::log(2.0 * h * static_cast<double>(action_count) / delta);
    return static_cast<std::int64_t>(std::ceil(n));
}

enum class TieBreak {
    SmallestIndex, // deterministic default
    SeededRandom,  // uniform over exactly tied actions
};

inline const char* to_string(TieBreak t) {
    return t == TieBreak::SmallestIndex ? "smallest" : "random";
}

struct GenRlStep {
    StateRef state;                   // prefix state s_t (shared across members)
    std::vector<std::uint32_t> members; // sampled member index per draw
    std::vector<double> q;              // draw-major: q[i * A + a]
    std::vector<double> means;          // per action
    ActionId chosen = 0;
};

struct GenRlTrace {
    std::vector<GenRlStep> steps;

    /// Canonical byte form; equal traces serialize identically.
    std::string to_string() const {
        std::ostringstream os;
        os << std::hexfloat;
        for (std::size_t t = 0; t < steps.size(); ++t) {
            const GenRlStep& st = steps[t];
            os << 't' << t << ' ' << proxgen::to_string(st.state) << " a" << st.chosen << '\n';
            for (std::uint32_t m : st.members) os << m << ',';
            os << '\n';
            for (double x : st.q) os << x << ',';
            os << '\n';
            for (double x : st.means) os << x << ',';
            os << '\n';
        }
        return os.str();
    }
};

struct GenRlResult {
    SequencePolicy policy;
    GenRlTrace trace;
};

/// Greedy timestep-by-timestep policy construction over a family with a
/// shared deterministic transition function.
///
/// For each timestep t: draw n members; for each draw and each action,
/// open a fresh episode, replay the prefix pi(0..t-1), take the action,
/// and score it as observed reward plus the oracle's value of the
/// successor; then fix pi(t) to the action with the best mean score.
/// Every replay step, member draw and oracle call is charged to the
/// ledger. Deterministic given (family, n, oracle, seed, tie mode).
inline GenRlResult genrl_train(const MdpDistribution& dist, std::int64_t n, ValueOracle& oracle,
                               QueryLedger& ledger, std::uint64_t seed,
                               TieBreak tie_break = TieBreak::SmallestIndex) {
    if (!dist.shared_state_space() || !dist.shared_deterministic_transitions())
        throw NotDeterministicFamily(
            "genrl_train needs a shared state space with shared deterministic transitions");
    if (n < 1) throw InvalidParams("sample size must be >= 1");

    const int horizon = dist.horizon();
    const int actions = dist.action_count();
    Rng rng(splitmix64(seed ^ 0x6e51a11ce5ULL));

    GenRlResult out;
    out.policy.actions.assign(static_cast<std::size_t>(horizon), 0);
    out.trace.steps.resize(static_cast<std::size_t>(horizon));

    for (int t = 0; t < horizon; ++t) {
        GenRlStep& step = out.trace.steps[static_cast<std::size_t>(t)];
        step.members.reserve(static_cast<std::size_t>(n));
        step.q.assign(static_cast<std::size_t>(n) * static_cast<std::size_t>(actions), 0.0);
        bool state_recorded = false;

        for (std::int64_t i = 0; i < n; ++i) {
            std::size_t idx = sample_mdp(dist, ledger, rng);
            step.members.push_back(static_cast<std::uint32_t>(idx));
            auto member = dist.mdp_ptr(idx);
            for (ActionId a = 0; a < actions; ++a) {
                EpisodicSession session(*member, ledger,
                                        mix_seed(seed, (static_cast<std::uint64_t>(t) << 40) ^
                                                           (static_cast<std::uint64_t>(i) << 8) ^
                                                           static_cast<std::uint64_t>(a)));
                for (int tp = 0; tp < t; ++tp) session.step(out.policy.at(tp));
                if (!state_recorded) {
                    step.state = session.current();
                    state_recorded = true;
                }
                auto res = session.step(a);
                double value = oracle.query(res.next, idx);
                step.q[static_cast<std::size_t>(i) * static_cast<std::size_t>(actions) +
                       static_cast<std::size_t>(a)] = res.reward + value;
            }
        }

        step.means.assign(static_cast<std::size_t>(actions), 0.0);
        for (std::int64_t i = 0; i < n; ++i)
            for (ActionId a = 0; a < actions; ++a)
                step.means[static_cast<std::size_t>(a)] +=
                    step.q[static_cast<std::size_t>(i) * static_cast<std::size_t>(actions) +
                           static_cast<std::size_t>(a)];
        for (double& m : step.means) m /= static_cast<double>(n);

        ActionId best = 0;
        for (ActionId a = 1; a < actions; ++a)
            if (step.means[static_cast<std::size_t>(a)] >
                step.means[static_cast<std::size_t>(best)])
                best = a;
        if (tie_break == TieBreak::SeededRandom) {
            std::vector<ActionId> tied;
            for (ActionId a = 0; a < actions; ++a)
                if (step.means[static_cast<std::size_t>(a)] ==
                    step.means[static_cast<std::size_t>(best)])
                    tied.push_back(a);
            best = tied[rng.next_below(tied.size())];
        }
        step.chosen = best;
        out.policy.actions[static_cast<std::size_t>(t)] = best;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Audits.

struct QGapViolation {
    int timestep = 0;
    ActionId action = 0;
    double amount = 0.0; // by how much the shared action's mean fell short
};

struct QGapReport {
    std::vector<QGapViolation> violations;
    int timesteps = 0;
    bool pass() const { return violations.empty(); }
};

/// Per-timestep check that the shared policy's action never loses by more
/// than alpha + beta in mean score: mean Q(a*) >= mean Q(a') - alpha - beta
/// for every other action, with 1e-9 slack.
inline QGapReport q_gap_audit(const GenRlTrace& trace, const DeterministicPolicy& shared_policy,
                              double alpha, double beta) {
    QGapReport report;
    report.timesteps = static_cast<int>(trace.steps.size());
    for (std::size_t t = 0; t < trace.steps.size(); ++t) {
        const GenRlStep& step = trace.steps[t];
        ActionId star = shared_policy.action_of(step.state);
        double mean_star = step.means.at(static_cast<std::size_t>(star));
        for (ActionId a = 0; a < static_cast<ActionId>(step.means.size()); ++a) {
            if (a == star) continue;
            double required = step.means[static_cast<std::size_t>(a)] - alpha - beta;
            if (mean_star < required - 1e-9)
                report.violations.push_back(
                    {static_cast<int>(t), a, required - mean_star});
        }
    }
    return report;
}

struct ConcentrationReport {
    std::vector<double> per_timestep_frequency; // fraction of runs where the event held
    double threshold = 0.0;                     // 1 - delta / H
    std::int64_t n = 0;
    int repetitions = 0;
    bool pass = true;
};

/// Repeated-run audit of the per-action mean concentration event: at every
/// timestep, each action's mean score must lie within beta + eps/(2H) of
/// the exact family expectation of reward plus successor optimal value.
/// Reports the empirical per-timestep frequency against 1 - delta/H.
inline ConcentrationReport concentration_audit(const MdpDistribution& dist, std::int64_t n,
                                               ValueOracle& oracle, QueryLedger& ledger,
                                               int repetitions, double delta, double epsilon,
                                               std::uint64_t seed,
                                               TieBreak tie_break = TieBreak::SmallestIndex) {
    dist.ensure_measurable();
    const int horizon = dist.horizon();
    const int actions = dist.action_count();
    const double slack = oracle.beta() + epsilon / (2.0 * horizon);

    std::vector<std::shared_ptr<const LayeredMdp>> members;
    for (std::size_t i = 0; i < dist.size(); ++i) members.push_back(dist.mdp_ptr(i));

    // Exact E_M[R_M(s,a) + V*_M(next)] per (state, action), memoized.
    std::unordered_map<StateRef, std::vector<double>, StateRefHash> exact;
    auto exact_for = [&](const StateRef& s) -> const std::vector<double>& {
        auto it = exact.find(s);
        if (it != exact.end()) return it->second;
        std::vector<double> e(static_cast<std::size_t>(actions), 0.0);
        for (std::size_t i = 0; i < members.size(); ++i) {
            for (ActionId a = 0; a < actions; ++a) {
                double q = members[i]->reward(s, a);
                for (const auto& tr : members[i]->transition(s, a).entries)
                    q += tr.probability * optimal_value_at(*members[i], tr.state);
                e[static_cast<std::size_t>(a)] += dist.weight(i) * q;
            }
        }
        return exact.emplace(s, std::move(e)).first->second;
    };

    ConcentrationReport report;
    report.threshold = 1.0 - delta / static_cast<double>(horizon);
    report.n = n;
    report.repetitions = repetitions;
    std::vector<int> held(static_cast<std::size_t>(horizon), 0);
    for (int rep = 0; rep < repetitions; ++rep) {
        GenRlResult run = genrl_train(dist, n, oracle, ledger,
                                      mix_seed(seed, static_cast<std::uint64_t>(rep)), tie_break);
        for (int t = 0; t < horizon; ++t) {
            const GenRlStep& step = run.trace.steps[static_cast<std::size_t>(t)];
            const std::vector<double>& e = exact_for(step.state);
            bool ok = true;
            for (ActionId a = 0; a < actions; ++a)
                if (std::abs(step.means[static_cast<std::size_t>(a)] -
                             e[static_cast<std::size_t>(a)]) > slack)
                    ok = false;
            if (ok) ++held[static_cast<std::size_t>(t)];
        }
    }
    report.per_timestep_frequency.resize(static_cast<std::size_t>(horizon));
    for (int t = 0; t < horizon; ++t) {
        report.per_timestep_frequency[static_cast<std::size_t>(t)] =
            static_cast<double>(held[static_cast<std::size_t>(t)]) /
            static_cast<double>(repetitions);
        if (report.per_timestep_frequency[static_cast<std::size_t>(t)] < report.threshold)
            report.pass = false;
    }
    return report;
}

} // namespace proxgen
