#include <catch2/catch_amalgamated.hpp>

#include "proxgen/config.hpp"

using namespace proxgen;

TEST_CASE("a minimal config picks up the experiment's documented defaults") {
    ExperimentConfig cfg = parse_config("experiment = genrl-strong\n");
    CHECK(cfg.experiment == "genrl-strong");
    CHECK(cfg.family_kind == "strong");
    CHECK(cfg.horizon == 10);
    CHECK(cfg.members == 8);
    CHECK(cfg.trials == 50);
    CHECK(cfg.repetitions == 200);
    REQUIRE_NOTHROW(validate_config(cfg));
}

TEST_CASE("overrides win over defaults and sections scope the keys") {
    std::string text = R"(experiment = genrl-strong
[family]
horizon = 8
members = 4
[run]
trials = 5
master_seed = 99
)";
    ExperimentConfig cfg = parse_config(text);
    CHECK(cfg.horizon == 8);
    CHECK(cfg.members == 4);
    CHECK(cfg.trials == 5);
    CHECK(cfg.master_seed == 99);
    CHECK(cfg.spread == 1.0); // untouched default
}

TEST_CASE("unknown keys and sections are parse errors naming the offender") {
    CHECK_THROWS_WITH(parse_config("experiment = simlemma\nwhatever = 3\n"),
                      Catch::Matchers::ContainsSubstring("whatever"));
    CHECK_THROWS_WITH(parse_config("experiment = simlemma\n[family]\nbogus_key = 3\n"),
                      Catch::Matchers::ContainsSubstring("family.bogus_key"));
    CHECK_THROWS_AS(parse_config("[weird]\nx = 1\n"), ParseError);
    CHECK_THROWS_AS(parse_config("experiment = simlemma\n[family]\nhorizon = twelve\n"),
                    ParseError);
    CHECK_THROWS_AS(parse_config("experiment = simlemma\nno equals sign here\n"), ParseError);
}

TEST_CASE("an odd horizon for the needle family is a validation error naming it") {
    ExperimentConfig cfg = default_config("genrl-weak");
    cfg.horizon = 11;
    try {
        validate_config(cfg);
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("family.horizon") != std::string::npos);
    }
}

TEST_CASE("validation collects every violated precondition at once") {
    ExperimentConfig cfg = default_config("genrl-strong");
    cfg.horizon = 3;    // strong family wants [2,16]: fine, but needle below kicks in
    cfg.trials = 0;
    cfg.epsilon = 2.0;
    cfg.oracle = "psychic";
    try {
        validate_config(cfg);
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        std::string what = e.what();
        CHECK(what.find("run.trials") != std::string::npos);
        CHECK(what.find("algorithm.epsilon") != std::string::npos);
        CHECK(what.find("algorithm.oracle") != std::string::npos);
    }
}

TEST_CASE("configs round-trip through their textual form losslessly") {
    for (const std::string& name : experiment_names()) {
        ExperimentConfig cfg = default_config(name);
        std::string text = cfg.to_text();
        ExperimentConfig reparsed = parse_config(text);
        CHECK(reparsed.to_text() == text);
    }
    // A mutated config round-trips too.
    ExperimentConfig cfg = default_config("lb-scan");
    cfg.scan_horizons = {16, 20};
    cfg.master_seed = 31337;
    cfg.out_dir = "custom/dir";
    ExperimentConfig reparsed = parse_config(cfg.to_text());
    CHECK(reparsed.to_text() == cfg.to_text());
    CHECK(reparsed.scan_horizons == cfg.scan_horizons);
}

TEST_CASE("resolved sample size falls back to the formula") {
    ExperimentConfig cfg = default_config("genrl-strong");
    CHECK(cfg.n == 0);
    CHECK(cfg.resolved_n() == genrl_sample_size(0.2, 0.2, 10, 2));
    cfg.n = 17;
    CHECK(cfg.resolved_n() == 17);
}

TEST_CASE("the output directory falls back to the environment variable") {
    ExperimentConfig cfg = default_config("simlemma");
    cfg.out_dir.clear();
    unsetenv("PROXGEN_OUT");
    CHECK(cfg.resolved_out_dir() == "results");
    setenv("PROXGEN_OUT", "/tmp/proxgen_env_out", 1);
    CHECK(cfg.resolved_out_dir() == "/tmp/proxgen_env_out");
    cfg.out_dir = "explicit";
    CHECK(cfg.resolved_out_dir() == "explicit");
    unsetenv("PROXGEN_OUT");
}

TEST_CASE("every default config validates") {
    for (const std::string& name : experiment_names())
        REQUIRE_NOTHROW(validate_config(default_config(name)));
}
