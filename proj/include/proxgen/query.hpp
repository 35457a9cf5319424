#pragma once

#include <cstdint>
#include <optional>
#include <sstream>

#include "proxgen/mdp.hpp"

namespace proxgen {

/// Exact query-cost accounting for one run. Counters only grow; a charge
/// that would push total_cost past the budget throws BudgetExhausted and
/// leaves the ledger untouched, so budget hits are recordable outcomes.
///
/// total_cost = q_D * mdp_samples + generative_queries + episode_steps
///            + nominal_oracle_charge * oracle_calls
class QueryLedger {
public:
    explicit QueryLedger(std::int64_t sample_cost_per_mdp = 1,
                         std::int64_t nominal_oracle_charge = 0,
                         std::optional<std::int64_t> budget = std::nullopt)
        : q_d_(sample_cost_per_mdp), nominal_oracle_charge_(nominal_oracle_charge),
          budget_(budget) {
        if (q_d_ < 1) throw InvalidParams("sample cost q_D must be >= 1");
        if (nominal_oracle_charge_ < 0) throw InvalidParams("nominal oracle charge must be >= 0");
        if (budget_ && *budget_ < 0) throw InvalidParams("budget must be >= 0");
    }

    std::int64_t sample_cost_per_mdp() const { return q_d_; }
    std::int64_t nominal_oracle_charge() const { return nominal_oracle_charge_; }
    std::optional<std::int64_t> budget() const { return budget_; }

    std::int64_t mdp_samples() const { return mdp_samples_; }
    std::int64_t generative_queries() const { return generative_queries_; }
    std::int64_t episode_steps() const { return episode_steps_; }
    std::int64_t oracle_calls() const { return oracle_calls_; }

    std::int64_t total_cost() const {
        return q_d_ * mdp_samples_ + generative_queries_ + episode_steps_ +
               nominal_oracle_charge_ * oracle_calls_;
    }

    void charge_mdp_sample() {
        ensure_affordable(q_d_);
        ++mdp_samples_;
    }

    void charge_generative_query() {
        ensure_affordable(1);
        ++generative_queries_;
    }

    void charge_episode_step() {
        ensure_affordable(1);
        ++episode_steps_;
    }

    void charge_oracle_call() {
        ensure_affordable(nominal_oracle_charge_);
        ++oracle_calls_;
    }

    bool budget_hit(std::int64_t next_charge = 1) const {
        return budget_ && total_cost() + next_charge > *budget_;
    }

    /// Canonical textual form; equal ledgers serialize to equal bytes.
    std::string to_string() const {
        std::ostringstream os;
        os << "q_D=" << q_d_ << " mdp_samples=" << mdp_samples_
           << " generative_queries=" << generative_queries_
           << " episode_steps=" << episode_steps_ << " oracle_calls=" << oracle_calls_
           << " nominal_oracle_charge=" << nominal_oracle_charge_
           << " total_cost=" << total_cost();
        if (budget_) os << " budget=" << *budget_;
        return os.str();
    }

    friend bool operator==(const QueryLedger& a, const QueryLedger& b) {
        return a.to_string() == b.to_string();
    }

private:
    void ensure_affordable(std::int64_t charge) const {
        if (budget_ && total_cost() + charge > *budget_)
            throw BudgetExhausted("query budget " + std::to_string(*budget_) +
                                  " exhausted (cost " + std::to_string(total_cost()) +
                                  ", next charge " + std::to_string(charge) + ")");
    }

    std::int64_t q_d_;
    std::int64_t nominal_oracle_charge_;
    std::optional<std::int64_t> budget_;
    std::int64_t mdp_samples_ = 0;
    std::int64_t generative_queries_ = 0;
    std::int64_t episode_steps_ = 0;
    std::int64_t oracle_calls_ = 0;
};

// ---------------------------------------------------------------------------

/// Strong query model: point queries at any addressable (state, action)
/// pair. Every call charges exactly one generative query.
class GenerativeModel {
public:
    GenerativeModel(const LayeredMdp& mdp, QueryLedger& ledger, std::uint64_t seed)
        : mdp_(mdp), ledger_(ledger), rng_(seed) {}

    struct Response {
        double reward;
        StateRef next;
    };

    Response query(const StateRef& s, ActionId a) {
        if (a < 0 || a >= mdp_.action_count()) throw InvalidState("action out of range");
        if (mdp_.episode_over(s))
            throw InvalidState("generative query past horizon at " + to_string(s));
        ledger_.charge_generative_query();
        double r = mdp_.reward(s, a);
        StateRef next = mdp_.sample_next(s, a, rng_);
        return {r, next};
    }

    const LayeredMdp& mdp() const { return mdp_; }
    QueryLedger& ledger() { return ledger_; }

private:
    const LayeredMdp& mdp_;
    QueryLedger& ledger_;
    Rng rng_;
};

/// Weak query model: episodic interaction only. The session starts at the
/// initial state, moves strictly forward, and charges one unit per action;
/// resets are free. No point-query surface exists here, so an algorithm
/// restricted to this interface can only observe states it reached.
class EpisodicSession {
public:
    EpisodicSession(const LayeredMdp& mdp, QueryLedger& ledger, std::uint64_t seed)
        : mdp_(mdp), ledger_(ledger), rng_(seed), current_(mdp.initial_state()) {}

    struct StepResult {
        double reward;
        StateRef next;
        bool done;
    };

    const StateRef& current() const { return current_; }
    bool done() const { return mdp_.episode_over(current_); }

    StepResult step(ActionId a) {
        if (a < 0 || a >= mdp_.action_count()) throw InvalidState("action out of range");
        if (done()) throw EpisodeFinished("step after episode end");
        ledger_.charge_episode_step();
        double r = mdp_.reward(current_, a);
        current_ = mdp_.sample_next(current_, a, rng_);
        return {r, current_, done()};
    }

private:
    const LayeredMdp& mdp_;
    QueryLedger& ledger_;
    Rng rng_;
    StateRef current_;
};

inline EpisodicSession open_episode(const LayeredMdp& mdp, QueryLedger& ledger,
                                    std::uint64_t seed) {
    return EpisodicSession(mdp, ledger, seed);
}

} // namespace proxgen
