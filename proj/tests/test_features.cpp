#include <catch2/catch_amalgamated.hpp>

#include "proxgen/features.hpp"

using namespace proxgen;

TEST_CASE("lazy features are unit norm across states, actions and kinds") {
    LazyFeatureMap fm(909, 128);
    Rng rng(6);
    for (int i = 0; i < 1000; ++i) {
        int level = static_cast<int>(rng.next_below(40));
        StateRef s = StateRef::tree(rng.next_u64() & low_bits_mask(level), level);
        ActionId a = static_cast<ActionId>(rng.next_below(2));
        auto v = fm.feature(s, a);
        double n2 = 0.0;
        for (double x : v) n2 += x * x;
        CHECK(std::abs(std::sqrt(n2) - 1.0) <= 1e-9);
    }
    // Chain and terminal states featurize too.
    for (ActionId a = 0; a < 2; ++a) {
        for (StateRef s : {StateRef::chain(5, 8, 3), StateRef::terminal_one(9)}) {
            auto v = fm.feature(s, a);
            double n2 = 0.0;
            for (double x : v) n2 += x * x;
            CHECK(std::abs(std::sqrt(n2) - 1.0) <= 1e-9);
        }
    }
}

TEST_CASE("the same seed and state always give the same vector") {
    LazyFeatureMap fm(4242, 64);
    StateRef s = StateRef::tree(0b110101, 6);
    CHECK(fm.z_vector(s) == fm.z_vector(s));
    CHECK(fm.feature(s, 0) == fm.feature(s, 0));
    CHECK(fm.feature(s, 1) == fm.feature(s, 1));
    LazyFeatureMap other(4243, 64);
    CHECK(fm.z_vector(s) != other.z_vector(s));
}

TEST_CASE("action-1 features differ across states through the dummy component") {
    LazyFeatureMap fm(5, 256);
    StateRef a = StateRef::tree(3, 4);
    StateRef b = StateRef::tree(9, 4);
    CHECK(fm.feature(a, 1) != fm.feature(b, 1));
}

TEST_CASE("high-dimensional z vectors stay incoherent over ten thousand pairs") {
    LazyFeatureMap fm(20240601, 1 << 17);
    IncoherenceReport report = check_incoherence(fm, 10000);
    CHECK(report.pairs == 10000);
    CHECK(report.violations == 0);
    CHECK(report.max_abs_dot <= LazyFeatureMap::kIncoherenceTarget);
}

TEST_CASE("low dimension collides, which sanity-checks the detector") {
    LazyFeatureMap fm(77, 8);
    IncoherenceReport report = check_incoherence(fm, 2000);
    CHECK(report.violations > 0);
}

TEST_CASE("incoherence pairs never repeat a state against itself") {
    LazyFeatureMap fm(3, 64);
    // With one requested pair the pool is exactly two distinct states; the
    // self dot product (1.0) must not be what gets measured.
    IncoherenceReport report = check_incoherence(fm, 1);
    CHECK(report.pairs == 1);
    CHECK(report.max_abs_dot < 1.0 - 1e-6);
}

TEST_CASE("dimension below eight is rejected") {
    CHECK_THROWS_AS(LazyFeatureMap(1, 7), InvalidParams);
    LazyFeatureMap fm(1, 8);
    CHECK_THROWS_AS(check_incoherence(fm, 0), InvalidParams);
}
