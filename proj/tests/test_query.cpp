#include <catch2/catch_amalgamated.hpp>

#include "proxgen/jump_chain.hpp"
#include "proxgen/needle_tree.hpp"
#include "proxgen/query.hpp"

using namespace proxgen;

namespace {

MdpDistribution small_needle(std::uint64_t seed = 11) {
    NeedleTreeParams p;
    p.horizon = 12;
    p.gap = 2;
    p.seed = seed;
    p.feature_dim = 64;
    return build_needle_tree_family(p);
}

} // namespace

TEST_CASE("ledger total cost follows the counter formula") {
    QueryLedger ledger(/*q_D=*/3, /*nominal=*/5);
    ledger.charge_mdp_sample();
    ledger.charge_mdp_sample();
    ledger.charge_generative_query();
    for (int i = 0; i < 4; ++i) ledger.charge_episode_step();
    ledger.charge_oracle_call();
    CHECK(ledger.mdp_samples() == 2);
    CHECK(ledger.generative_queries() == 1);
    CHECK(ledger.episode_steps() == 4);
    CHECK(ledger.oracle_calls() == 1);
    CHECK(ledger.total_cost() == 3 * 2 + 1 + 4 + 5 * 1);
}

TEST_CASE("ledger rejects invalid parameters") {
    CHECK_THROWS_AS(QueryLedger(0), InvalidParams);
    CHECK_THROWS_AS(QueryLedger(1, -1), InvalidParams);
    CHECK_THROWS_AS(QueryLedger(1, 0, -5), InvalidParams);
}

TEST_CASE("zero budget refuses the first generative query and keeps the ledger intact") {
    auto fam = small_needle();
    auto m = fam.mdp_ptr(0);
    QueryLedger ledger(1, 0, /*budget=*/0);
    GenerativeModel gm(*m, ledger, 1);
    CHECK_THROWS_AS(gm.query(m->initial_state(), 0), BudgetExhausted);
    CHECK(ledger.generative_queries() == 0);
    CHECK(ledger.total_cost() == 0);
}

TEST_CASE("generative queries on a deterministic member repeat exactly") {
    auto fam = small_needle();
    auto m = fam.mdp_ptr(2);
    QueryLedger ledger(1);
    GenerativeModel gm(*m, ledger, 99);
    StateRef s = StateRef::tree(0b1011011, 7);
    auto first = gm.query(s, 1);
    for (int i = 0; i < 5; ++i) {
        auto again = gm.query(s, 1);
        CHECK(again.reward == first.reward);
        CHECK(again.next == first.next);
    }
    CHECK(ledger.generative_queries() == 6);
    CHECK_THROWS_AS(gm.query(StateRef::tree(0, 12), 0), InvalidState);
}

TEST_CASE("perturbed chain pair leaks at the modified rate") {
    JumpChainParams p;
    p.horizon = 16;
    p.seed = 21;
    p.feature_dim = 64;
    auto fam = build_jump_chain_family(p);
    auto member = std::dynamic_pointer_cast<const JumpChainMdp>(fam.mdp_ptr(3));
    // A chain state under a non-special leaf carries the exit perturbation.
    std::uint64_t special = member->special_leaf(0);
    std::uint64_t off_leaf = special ^ (std::uint64_t{1} << 7);
    REQUIRE_FALSE(member->leaf_is_special(off_leaf));
    StateRef chain_state = StateRef::chain(off_leaf, 8, 2);

    QueryLedger ledger(1);
    GenerativeModel gm(*member, ledger, 1234);
    const int samples = 10000;
    int exits = 0;
    for (int i = 0; i < samples; ++i)
        if (gm.query(chain_state, 0).next.kind == StateKind::TerminalZero) ++exits;
    double p_exit = 10.0 / 16.0;
    double freq = static_cast<double>(exits) / samples;
    double se = std::sqrt(p_exit * (1.0 - p_exit) / samples);
    CHECK(std::abs(freq - p_exit) <= 3.0 * se);
    CHECK(ledger.generative_queries() == samples);
}

TEST_CASE("episodic sessions start at the initial state and resets are free") {
    auto fam = small_needle();
    auto m = fam.mdp_ptr(1);
    QueryLedger ledger(1);
    for (int i = 0; i < 5; ++i) {
        EpisodicSession session = open_episode(*m, ledger, static_cast<std::uint64_t>(i));
        CHECK(session.current() == m->initial_state());
    }
    CHECK(ledger.total_cost() == 0);
}

TEST_CASE("two sessions on one deterministic member evolve identically") {
    auto fam = small_needle();
    auto m = fam.mdp_ptr(4);
    QueryLedger ledger(1);
    EpisodicSession a = open_episode(*m, ledger, 1);
    EpisodicSession b = open_episode(*m, ledger, 2);
    for (int t = 0; t < 12; ++t) {
        ActionId act = static_cast<ActionId>(t % 2);
        auto ra = a.step(act);
        auto rb = b.step(act);
        CHECK(ra.reward == rb.reward);
        CHECK(ra.next == rb.next);
        CHECK(ra.done == rb.done);
    }
}

TEST_CASE("episodes finish at the horizon and refuse further steps") {
    auto fam = small_needle();
    auto m = fam.mdp_ptr(0);
    QueryLedger ledger(1);
    EpisodicSession session = open_episode(*m, ledger, 7);
    for (int t = 0; t < 12; ++t) {
        auto res = session.step(0);
        CHECK(res.done == (t == 11));
    }
    CHECK(session.done());
    CHECK_THROWS_AS(session.step(0), EpisodeFinished);
    CHECK(ledger.episode_steps() == 12);
}

TEST_CASE("a prefix replay of length t plus one action charges exactly t + 1 steps") {
    auto fam = small_needle();
    auto m = fam.mdp_ptr(6);
    for (int t : {0, 1, 5, 11}) {
        QueryLedger ledger(1);
        EpisodicSession session = open_episode(*m, ledger, 3);
        for (int i = 0; i < t; ++i) session.step(0);
        session.step(1);
        CHECK(ledger.episode_steps() == t + 1);
    }
}

TEST_CASE("replaying seeds and actions yields byte-identical ledgers") {
    JumpChainParams p;
    p.horizon = 16;
    p.seed = 5;
    p.feature_dim = 64;
    auto fam = build_jump_chain_family(p);
    auto m = fam.mdp_ptr(1);
    auto run = [&]() {
        QueryLedger ledger(2, 16);
        EpisodicSession session = open_episode(*m, ledger, 42);
        while (!session.done()) session.step(0);
        GenerativeModel gm(*m, ledger, 43);
        for (int i = 0; i < 10; ++i) gm.query(m->initial_state(), 1);
        return ledger.to_string();
    };
    CHECK(run() == run());
}

TEST_CASE("budget hit mid-episode leaves the ledger at the budget") {
    auto fam = small_needle();
    auto m = fam.mdp_ptr(0);
    QueryLedger ledger(1, 0, /*budget=*/5);
    EpisodicSession session = open_episode(*m, ledger, 9);
    int steps = 0;
    try {
        for (int t = 0; t < 12; ++t) {
            session.step(0);
            ++steps;
        }
        FAIL("expected BudgetExhausted");
    } catch (const BudgetExhausted&) {
        CHECK(steps == 5);
        CHECK(ledger.total_cost() == 5);
    }
}
