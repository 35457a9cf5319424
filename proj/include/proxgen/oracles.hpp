#pragma once

#include "proxgen/block_tree.hpp"
#include "proxgen/family.hpp"

namespace proxgen {

/// Near-optimal value oracle V^(s, member): always within [V* - beta, V*].
/// Every query charges the ledger's nominal oracle cost; peek() is the
/// uncharged variant reserved for audits.
class ValueOracle {
public:
    using QueryFn = std::function<double(const StateRef&, std::size_t)>;

    ValueOracle(std::string kind, double beta, QueryFn fn, QueryLedger& ledger)
        : kind_(std::move(kind)), beta_(beta), fn_(std::move(fn)), ledger_(&ledger) {}

    double query(const StateRef& s, std::size_t member_index) {
        ledger_->charge_oracle_call();
        return fn_(s, member_index);
    }

    /// Audit access: same value, no ledger charge.
    double peek(const StateRef& s, std::size_t member_index) const {
        return fn_(s, member_index);
    }

    const std::string& kind() const { return kind_; }
    double beta() const { return beta_; }

private:
    std::string kind_;
    double beta_;
    QueryFn fn_;
    QueryLedger* ledger_;
};

namespace detail {

/// Per-member exact values: the builder's closed form when present, with a
/// dynamic-programming table as fallback for purely tabular members.
class ExactValueSource {
public:
    explicit ExactValueSource(const MdpDistribution& dist) : dist_(&dist) {}

    double value(const StateRef& s, std::size_t member_index) {
        const LayeredMdp& m = member(member_index);
        if (auto v = m.analytic_optimal_value(s)) return *v;
        auto it = tables_.find(member_index);
        if (it == tables_.end()) it = tables_.emplace(member_index, optimal_values(m)).first;
        return it->second.at(s);
    }

private:
    const LayeredMdp& member(std::size_t i) {
        auto it = mdps_.find(i);
        if (it == mdps_.end()) it = mdps_.emplace(i, dist_->mdp_ptr(i)).first;
        return *it->second;
    }

    const MdpDistribution* dist_;
    std::map<std::size_t, std::shared_ptr<const LayeredMdp>> mdps_;
    std::map<std::size_t, ValueTable> tables_;
};

} // namespace detail

/// beta = 0: reports the exact optimal value of every queried state.
inline ValueOracle exact_oracle(const MdpDistribution& dist, QueryLedger& ledger) {
    auto source = std::make_shared<detail::ExactValueSource>(dist);
    return ValueOracle("exact", 0.0,
                       [source](const StateRef& s, std::size_t i) { return source->value(s, i); },
                       ledger);
}

/// V*(s, M) - u(s, M) * beta with u in [0, 1] keyed by (seed, state,
/// member); deterministic, and inside the sandwich by construction.
inline ValueOracle perturbed_oracle(const MdpDistribution& dist, QueryLedger& ledger, double beta,
                                    std::uint64_t seed) {
    if (beta < 0.0 || beta >= 0.25) throw InvalidParams("beta must be in [0, 1/4)");
    auto source = std::make_shared<detail::ExactValueSource>(dist);
    std::uint64_t key = splitmix64(seed ^ 0x0bf5caffe1234567ULL);
    return ValueOracle(
        "perturbed", beta,
        [source, key, beta](const StateRef& s, std::size_t i) {
            double u = keyed_uniform(key, s.key(), static_cast<std::uint64_t>(i));
            return source->value(s, i) - u * beta;
        },
        ledger);
}

/// Adversarial oracle of the block-tree instance: pessimistic inside every
/// block, hiding which sibling keeps the parent's value.
inline ValueOracle block_adversarial_oracle(const BlockTreeInstance& instance,
                                            QueryLedger& ledger) {
    auto mdp = instance.mdp;
    return ValueOracle("block_adversarial", instance.mdp->params().beta,
                       [mdp](const StateRef& s, std::size_t) { return mdp->oracle_value(s); },
                       ledger);
}

struct SandwichViolation {
    StateRef state;
    std::size_t member = 0;
    double oracle_value = 0.0;
    double optimal_value = 0.0;
};

struct SandwichReport {
    std::size_t checked = 0;
    std::vector<SandwichViolation> violations;
    bool pass() const { return violations.empty(); }
};

/// Audit: V* >= V^ >= V* - beta at each given (state, member), within 1e-9.
inline SandwichReport audit_sandwich(const ValueOracle& oracle, const MdpDistribution& dist,
                                     const std::vector<StateRef>& states,
                                     std::size_t member_index) {
    SandwichReport report;
    detail::ExactValueSource source(dist);
    for (const StateRef& s : states) {
        double vhat = oracle.peek(s, member_index);
        double vstar = source.value(s, member_index);
        ++report.checked;
        if (vhat > vstar + 1e-9 || vhat < vstar - oracle.beta() - 1e-9)
            report.violations.push_back({s, member_index, vhat, vstar});
    }
    return report;
}

} // namespace proxgen
