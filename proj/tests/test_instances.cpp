#include <catch2/catch_amalgamated.hpp>

#include "proxgen/block_tree.hpp"
#include "proxgen/family.hpp"
#include "proxgen/jump_chain.hpp"
#include "proxgen/needle_tree.hpp"
#include "proxgen/strong_family.hpp"
#include "proxgen/value.hpp"

using namespace proxgen;

namespace {

NeedleTreeParams needle_params(int horizon, int gap, std::uint64_t seed, int dim = 64) {
    NeedleTreeParams p;
    p.horizon = horizon;
    p.gap = gap;
    p.seed = seed;
    p.feature_dim = dim;
    return p;
}

} // namespace

TEST_CASE("needle family: every member has unit optimal value at the root") {
    auto fam = build_needle_tree_family(needle_params(12, 2, 31));
    for (std::size_t i = 0; i < fam.size(); ++i) {
        auto m = fam.mdp_ptr(i);
        CHECK(*m->analytic_optimal_value(m->initial_state()) == 1.0);
    }
}

TEST_CASE("needle family: optimal value is one from any first-half state") {
    auto fam = build_needle_tree_family(needle_params(12, 2, 31));
    auto m = fam.mdp_ptr(17);
    Rng rng(5);
    for (int i = 0; i < 200; ++i) {
        int level = static_cast<int>(rng.next_below(7)); // 0..6 = H/2
        StateRef s = StateRef::tree(rng.next_u64() & low_bits_mask(level), level);
        CHECK(*m->analytic_optimal_value(s) == 1.0);
    }
}

TEST_CASE("needle family: zero-reward subtrees have zero value") {
    auto fam = build_needle_tree_family(needle_params(12, 2, 31));
    auto m = std::dynamic_pointer_cast<const NeedleTreeMdp>(fam.mdp_ptr(3));
    // A leaf that is neither the star leaf nor the member's decoy in its
    // subtree has nothing rewarded beneath it.
    std::uint64_t leaf = m->designated_leaf(1) ^ (std::uint64_t{1} << 11);
    REQUIRE_FALSE(m->on_designated_path(leaf, 12));
    CHECK(*m->analytic_optimal_value(StateRef::tree(leaf, 12)) == 0.0);
    // Deep off-path states score zero; deep on-path states score the tail.
    std::uint64_t on = m->designated_leaf(1);
    CHECK(*m->analytic_optimal_value(StateRef::tree(on & low_bits_mask(10), 10)) ==
          Catch::Approx(2.0 * 0.25).margin(0));
}

TEST_CASE("needle family: closed form equals dynamic programming exactly") {
    for (auto [horizon, gap] : {std::pair{12, 2}, std::pair{10, 2}, std::pair{8, 2}}) {
        auto fam = build_needle_tree_family(needle_params(horizon, gap, 77));
        auto m = fam.mdp_ptr(fam.size() / 3);
        ValueTable dp = optimal_values(*m);
        Rng rng(9);
        int checked = 0;
        for (const auto& [s, v] : dp) {
            if (rng.bernoulli(0.2) && checked < 1000) {
                CHECK(*m->analytic_optimal_value(s) == v);
                ++checked;
            }
        }
        REQUIRE(checked > 100);
    }
}

TEST_CASE("needle family: decoy subtrees are reward-isomorphic under relabeling") {
    auto fam = build_needle_tree_family(needle_params(12, 2, 55));
    auto m = std::dynamic_pointer_cast<const NeedleTreeMdp>(fam.mdp_ptr(9));
    std::uint64_t star_subtree = m->star_leaf_bits() & low_bits_mask(6);
    std::uint64_t r1 = star_subtree == 2 ? 3 : 2;
    std::uint64_t r2 = star_subtree == 4 ? 5 : 4;
    // Rewards at matching within-subtree positions agree between any two
    // non-star subtrees.
    Rng rng(3);
    for (int i = 0; i < 500; ++i) {
        int level = 6 + static_cast<int>(rng.next_below(6));
        std::uint64_t suffix = rng.next_u64() & (low_bits_mask(level) >> 6 << 6);
        ActionId a = static_cast<ActionId>(rng.next_below(2));
        StateRef s1 = StateRef::tree(r1 | suffix, level);
        StateRef s2 = StateRef::tree(r2 | suffix, level);
        CHECK(m->reward(s1, a) == m->reward(s2, a));
    }
}

TEST_CASE("needle family: expected path values decompose by star overlap") {
    auto fam = build_needle_tree_family(needle_params(12, 2, 101));
    auto policies = enumerate_path_policies(12, 12);
    const std::uint64_t star = fam.audit_metadata().star_leaf_bits;
    const std::uint64_t star_subtree = star & low_bits_mask(6);
    const double eps = 0.25;
    int unit_count = 0;
    for (const auto& seq : policies) {
        std::uint64_t bits = 0;
        for (std::size_t t = 0; t < seq.actions.size(); ++t)
            bits |= static_cast<std::uint64_t>(seq.actions[t]) << t;
        double v = expected_policy_value(fam, Policy{seq});
        if (bits == star) {
            CHECK(v == 1.0);
            ++unit_count;
        } else if ((bits & low_bits_mask(6)) == star_subtree) {
            // Inside the star subtree the only rewards are the shared star
            // pairs, so the expected value is exactly the overlap; full
            // value needs the exact star leaf.
            double overlap_value = 0.0;
            for (int lvl = 8; lvl < 12; ++lvl)
                if ((bits & low_bits_mask(lvl + 1)) == (star & low_bits_mask(lvl + 1)))
                    overlap_value = eps + overlap_value;
            CHECK(v == overlap_value);
            CHECK(v < 1.0);
        } else {
            // Paths that commit to any other subtree only catch their decoy
            // overlap on average, far below the 2/H line.
            CHECK(v <= 2.0 / 12.0 + 1e-12);
        }
    }
    CHECK(unit_count == 1);
}

TEST_CASE("needle family: measured parameters match the construction") {
    auto fam = build_needle_tree_family(needle_params(12, 2, 101));
    GapMeasurement gaps = measure_gaps(fam);
    CHECK(gaps.eps_r == 0.25);
    CHECK(gaps.eps_p == 0.0);
    CHECK(measure_alpha(fam, *fam.audit_metadata().shared_policy, AlphaScope::Start) == 0.0);
    // Per-state suboptimality of the star policy is maximal: some decoy
    // state has value one while the star policy earns nothing there.
    CHECK(measure_alpha(fam, *fam.audit_metadata().shared_policy, AlphaScope::AllStates) == 1.0);
}

TEST_CASE("needle family rejects invalid parameters") {
    CHECK_THROWS_AS(build_needle_tree_family(needle_params(11, 2, 1)), InvalidParams);
    CHECK_THROWS_AS(build_needle_tree_family(needle_params(12, 6, 1)), InvalidParams);
    CHECK_THROWS_AS(build_needle_tree_family(needle_params(12, 0, 1)), InvalidParams);
    CHECK(needle_default_gap(64, 3) == 19); // 2^18 = 64^3, plus one
}

TEST_CASE("jump-chain family: the star path is worth one in every member") {
    JumpChainParams p;
    p.horizon = 16;
    p.seed = 21;
    p.feature_dim = 64;
    auto fam = build_jump_chain_family(p);
    const SequencePolicy& star = *fam.audit_metadata().shared_path;
    for (std::size_t i = 0; i < fam.size(); ++i) {
        auto m = fam.mdp_ptr(i);
        CHECK(policy_value(*m, Policy{star}) == 1.0);
        CHECK(*m->analytic_optimal_value(m->initial_state()) == 1.0);
    }
}

TEST_CASE("jump-chain family: star-path rollouts return one on every seed") {
    JumpChainParams p;
    p.horizon = 16;
    p.seed = 21;
    p.feature_dim = 64;
    auto fam = build_jump_chain_family(p);
    const SequencePolicy& star = *fam.audit_metadata().shared_path;
    auto m = fam.mdp_ptr(7);
    for (std::uint64_t seed = 0; seed < 100; ++seed)
        CHECK(rollout(*m, Policy{star}, seed).total_reward == 1.0);
}

TEST_CASE("jump-chain family: shared rewards, perturbations of exact size") {
    JumpChainParams p;
    p.horizon = 16;
    p.seed = 21;
    p.feature_dim = 64;
    auto fam = build_jump_chain_family(p);
    GapMeasurement gaps = measure_gaps(fam);
    CHECK(gaps.eps_r == 0.0);
    CHECK(gaps.eps_p == 0.625);

    // Against the unperturbed structure, every modified pair moves by
    // exactly the exit or jump probability.
    auto m = std::dynamic_pointer_cast<const JumpChainMdp>(fam.mdp_ptr(4));
    const double p_exit = p.exit_probability();
    const double p_jump = p.jump_probability();
    for (const StateRef& s : reachable_states(*m)) {
        if (m->episode_over(s)) continue;
        for (ActionId a = 0; a < 2; ++a) {
            TransitionSupport t = m->transition(s, a);
            if (t.deterministic_single()) continue;
            TransitionSupport natural = TransitionSupport::deterministic(t.entries[0].state);
            double tv = tv_distance(t, natural);
            CHECK((tv == p_exit || tv == p_jump));
        }
    }
}

TEST_CASE("jump-chain family at H=20 measures eps_p = 1/2") {
    JumpChainParams p;
    p.horizon = 20;
    p.seed = 3;
    p.feature_dim = 64;
    auto fam = build_jump_chain_family(p);
    GapMeasurement gaps = measure_gaps(fam);
    CHECK(gaps.eps_r == 0.0);
    CHECK(gaps.eps_p == 0.5);
}

TEST_CASE("jump-chain analytic values agree with dynamic programming exactly") {
    JumpChainParams p;
    p.horizon = 12;
    p.seed = 13;
    p.feature_dim = 64;
    auto fam = build_jump_chain_family(p);
    auto m = fam.mdp_ptr(1);
    ValueTable dp = optimal_values(*m);
    for (const auto& [s, v] : dp) CHECK(*m->analytic_optimal_value(s) == v);
}

TEST_CASE("jump-chain parameters validate") {
    JumpChainParams p;
    p.horizon = 8; // 10/H would exceed 1
    CHECK_THROWS_AS(p.validate(), InvalidParams);
    p.horizon = 18; // not divisible by 4
    CHECK_THROWS_AS(p.validate(), InvalidParams);
}

TEST_CASE("block tree: no drops when beta is zero") {
    BlockTreeParams p;
    p.horizon = 12;
    p.block_len = 3;
    p.beta = 0.0;
    p.seed = 5;
    auto inst = build_block_tree_instance(p);
    Rng rng(2);
    for (int i = 0; i < 200; ++i) {
        int level = static_cast<int>(rng.next_below(12));
        StateRef s = StateRef::tree(rng.next_u64() & low_bits_mask(level), level);
        CHECK(*inst.mdp->analytic_optimal_value(s) == 1.0);
    }
}

TEST_CASE("block tree: avoiding every special descendant drops beta per block") {
    BlockTreeParams p;
    p.horizon = 12;
    p.block_len = 3;
    p.beta = 0.05;
    p.seed = 7;
    auto inst = build_block_tree_instance(p);
    ValueTable dp = optimal_values(*inst.mdp);
    CHECK(dp.at(inst.mdp->initial_state()) == 1.0);

    // Walk greedily away from the special descendant at every round.
    double expected = 1.0;
    for (int i = 0; i < 4; ++i) expected -= 0.05;
    double worst = 1.0;
    for (const auto& [s, v] : dp)
        if (s.kind == StateKind::TreeNode && s.level == 11) worst = std::min(worst, v);
    CHECK(worst == expected);
    CHECK(expected == Catch::Approx(0.8).margin(1e-12));
}

TEST_CASE("block tree: closed form equals dynamic programming at every state") {
    BlockTreeParams p;
    p.horizon = 12;
    p.block_len = 3;
    p.beta = 0.05;
    p.seed = 11;
    auto inst = build_block_tree_instance(p);
    ValueTable dp = optimal_values(*inst.mdp);
    for (const auto& [s, v] : dp) CHECK(*inst.mdp->analytic_optimal_value(s) == v);
}

TEST_CASE("block tree: special children are chosen uniformly") {
    BlockTreeParams p;
    p.horizon = 12;
    p.block_len = 3;
    p.beta = 0.05;
    const int seeds = 2000;
    std::map<std::uint64_t, int> counts;
    for (int seed = 0; seed < seeds; ++seed) {
        p.seed = static_cast<std::uint64_t>(seed);
        auto inst = build_block_tree_instance(p);
        ++counts[inst.mdp->special_descendant(0, 0, 3)];
    }
    const double rate = 1.0 / 8.0;
    const double se = std::sqrt(rate * (1.0 - rate) / seeds);
    CHECK(counts.size() == 8);
    for (const auto& [child, count] : counts) {
        double freq = static_cast<double>(count) / seeds;
        CHECK(std::abs(freq - rate) <= 3.0 * se);
    }
}

TEST_CASE("block tree parameters validate") {
    BlockTreeParams p;
    p.horizon = 12;
    p.block_len = 5; // does not divide 12
    CHECK_THROWS_AS(p.validate(), InvalidParams);
    p.block_len = 3;
    p.beta = 0.3; // 4 blocks * 0.3 > v0
    CHECK_THROWS_AS(p.validate(), InvalidParams);
}

TEST_CASE("strong family: the shared action is optimal at every state of every member") {
    StrongFamilyParams p;
    p.horizon = 10;
    p.members = 8;
    p.seed = 42;
    MdpDistribution fam = build_strong_family(p);
    const DeterministicPolicy& shared = *fam.audit_metadata().shared_policy;
    CHECK(measure_alpha(fam, shared, AlphaScope::AllStates) == 0.0);
    for (std::size_t i = 0; i < fam.size(); ++i) {
        const LayeredMdp& m = fam.mdp(i);
        ValueTable dp = optimal_values(m);
        for (const StateRef& s : reachable_states(m)) {
            if (m.episode_over(s)) continue;
            CHECK(greedy_action(m, dp, s) == shared.action_of(s));
            CHECK(*m.analytic_optimal_value(s) == dp.at(s));
        }
    }
}

TEST_CASE("strong family: rewards are nonnegative and trajectories stay below one") {
    StrongFamilyParams p;
    p.horizon = 9;
    p.members = 5;
    p.seed = 77;
    p.spread = 2.5;
    MdpDistribution fam = build_strong_family(p);
    for (std::size_t i = 0; i < fam.size(); ++i) {
        const LayeredMdp& m = fam.mdp(i);
        // Rewards nonnegative; the best trajectory total is the root value.
        for (const StateRef& s : reachable_states(m)) {
            if (m.episode_over(s)) continue;
            for (ActionId a = 0; a < 2; ++a) CHECK(m.reward(s, a) >= 0.0);
        }
        CHECK(*m.analytic_optimal_value(m.initial_state()) <= 1.0);
    }
}

TEST_CASE("strong family degenerates to a point mass at one member") {
    StrongFamilyParams p;
    p.horizon = 6;
    p.members = 1;
    p.seed = 5;
    MdpDistribution fam = build_strong_family(p);
    CHECK(fam.size() == 1);
    CHECK(measure_alpha(fam, *fam.audit_metadata().shared_policy, AlphaScope::AllStates) == 0.0);
}
