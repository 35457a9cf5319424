#include <catch2/catch_amalgamated.hpp>

#include "proxgen/oracles.hpp"
#include "proxgen/needle_tree.hpp"
#include "proxgen/strong_family.hpp"

using namespace proxgen;

namespace {

MdpDistribution needle12(std::uint64_t seed = 101) {
    NeedleTreeParams p;
    p.horizon = 12;
    p.gap = 2;
    p.seed = seed;
    p.feature_dim = 64;
    return build_needle_tree_family(p);
}

} // namespace

TEST_CASE("exact oracle reports optimal values and charges the nominal cost") {
    MdpDistribution fam = needle12();
    QueryLedger ledger(1, /*nominal=*/12);
    ValueOracle oracle = exact_oracle(fam, ledger);
    CHECK(oracle.query(fam.reference().initial_state(), 0) == 1.0);
    auto m = std::dynamic_pointer_cast<const NeedleTreeMdp>(fam.mdp_ptr(0));
    std::uint64_t off_leaf = m->designated_leaf(0) ^ (std::uint64_t{1} << 11);
    CHECK(oracle.query(StateRef::tree(off_leaf, 12), 0) == 0.0);
    CHECK(ledger.oracle_calls() == 2);
    CHECK(ledger.total_cost() == 24);
}

TEST_CASE("exact oracle agrees with dynamic programming on explicit members") {
    StrongFamilyParams sp;
    sp.horizon = 8;
    sp.members = 3;
    sp.seed = 19;
    MdpDistribution fam = build_strong_family(sp);
    QueryLedger ledger(1);
    ValueOracle oracle = exact_oracle(fam, ledger);
    for (std::size_t i = 0; i < fam.size(); ++i) {
        ValueTable dp = optimal_values(fam.mdp(i));
        Rng rng(i + 1);
        int checked = 0;
        for (const auto& [s, v] : dp) {
            if (checked >= 1000) break;
            CHECK(oracle.peek(s, i) == v);
            ++checked;
        }
    }
}

TEST_CASE("perturbed oracle sits inside the sandwich and is deterministic") {
    MdpDistribution fam = needle12();
    QueryLedger ledger(1);
    const double beta = 0.1;
    ValueOracle oracle = perturbed_oracle(fam, ledger, beta, 2024);
    Rng rng(1);
    std::vector<StateRef> states;
    for (int i = 0; i < 100; ++i) {
        int level = static_cast<int>(rng.next_below(13));
        states.push_back(StateRef::tree(rng.next_u64() & low_bits_mask(level), level));
    }
    for (std::size_t member : {std::size_t{0}, std::size_t{7}, std::size_t{31}, std::size_t{63}}) {
        SandwichReport report = audit_sandwich(oracle, fam, states, member);
        CHECK(report.pass());
    }
    StateRef probe = states.front();
    CHECK(oracle.peek(probe, 3) == oracle.peek(probe, 3));
    CHECK_THROWS_AS(perturbed_oracle(fam, ledger, 0.25, 1), InvalidParams);
}

TEST_CASE("perturbed oracle with beta zero reduces to the exact oracle") {
    MdpDistribution fam = needle12();
    QueryLedger ledger(1);
    ValueOracle exact = exact_oracle(fam, ledger);
    ValueOracle perturbed = perturbed_oracle(fam, ledger, 0.0, 5);
    Rng rng(6);
    for (int i = 0; i < 200; ++i) {
        int level = static_cast<int>(rng.next_below(13));
        StateRef s = StateRef::tree(rng.next_u64() & low_bits_mask(level), level);
        std::size_t member = rng.next_below(fam.size());
        CHECK(perturbed.peek(s, member) == exact.peek(s, member));
    }
}

TEST_CASE("block oracle hides the special sibling and satisfies the sandwich") {
    BlockTreeParams p;
    p.horizon = 12;
    p.block_len = 3;
    p.beta = 0.05;
    p.seed = 3;
    BlockTreeInstance inst = build_block_tree_instance(p);
    QueryLedger ledger(1);
    ValueOracle oracle = block_adversarial_oracle(inst, ledger);

    std::vector<StateRef> all = reachable_states(*inst.mdp);
    SandwichReport report = audit_sandwich(oracle, inst.family, all, 0);
    CHECK(report.checked == all.size());
    CHECK(report.pass());

    // Siblings always share the oracle value, including across the special
    // boundary states, so nothing identifies the kept descendant.
    for (const StateRef& s : all) {
        if (s.kind != StateKind::TreeNode || s.level >= 12 || s.level == 0) continue;
        StateRef parent = StateRef::tree(s.bits & low_bits_mask(s.level - 1), s.level - 1);
        StateRef sibling = parent.tree_child(1 - static_cast<ActionId>((s.bits >> (s.level - 1)) & 1));
        CHECK(oracle.peek(s, 0) == oracle.peek(sibling, 0));
    }
}

TEST_CASE("block oracle with beta zero is exact everywhere") {
    BlockTreeParams p;
    p.horizon = 12;
    p.block_len = 3;
    p.beta = 0.0;
    p.seed = 4;
    BlockTreeInstance inst = build_block_tree_instance(p);
    QueryLedger ledger(1);
    ValueOracle oracle = block_adversarial_oracle(inst, ledger);
    for (const StateRef& s : reachable_states(*inst.mdp)) {
        if (s.kind != StateKind::TreeNode) continue;
        if (s.level >= 12) continue;
        CHECK(oracle.peek(s, 0) == *inst.mdp->analytic_optimal_value(s));
    }
}
