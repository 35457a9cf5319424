#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "proxgen/experiments.hpp"
#include "proxgen/report.hpp"

using namespace proxgen;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string temp_dir(const std::string& tag) {
    auto dir = std::filesystem::temp_directory_path() / ("proxgen_test_" + tag);
    std::filesystem::remove_all(dir);
    return dir.string();
}

} // namespace

TEST_CASE("an empty row list writes a header-only csv and marks the summary") {
    ExperimentOutcome outcome;
    outcome.config = default_config("simlemma");
    outcome.table.columns = {"a", "b"};
    outcome.summary = summary_skeleton(outcome.config);
    std::string dir = temp_dir("empty");
    WrittenFiles files = write_results(outcome, dir);
    CHECK(slurp(files.csv_path) == "a,b\n");
    Json summary = Json::parse(slurp(files.json_path));
    CHECK(summary["empty"] == true);
}

TEST_CASE("row width is enforced") {
    ResultTable table;
    table.columns = {"x", "y"};
    CHECK_THROWS_AS(table.add_row({"1"}), InvalidParams);
    table.add_row({"1", "2"});
    CHECK(table.to_csv() == "x,y\n1,2\n");
}

TEST_CASE("reruns of one experiment produce byte-identical outputs") {
    ExperimentConfig cfg = default_config("prop1-gap");
    cfg.trials = 4;
    auto run_once = [&](const std::string& tag) {
        ExperimentOutcome outcome = run_experiment(cfg);
        std::string dir = temp_dir(tag);
        WrittenFiles files = write_results(outcome, dir);
        return std::pair{slurp(files.csv_path), slurp(files.json_path)};
    };
    auto [csv1, json1] = run_once("rerun_a");
    auto [csv2, json2] = run_once("rerun_b");
    CHECK(csv1 == csv2);
    CHECK(json1 == json2);
    CHECK(csv1.find("trial,seed,manifest_hash,optimum") == 0);
}

TEST_CASE("summaries carry config echo, versions and manifest hashes") {
    ExperimentConfig cfg = default_config("simlemma");
    ExperimentOutcome outcome = run_experiment(cfg);
    CHECK(outcome.summary["schema_version"] == kSummarySchemaVersion);
    CHECK(outcome.summary["tool_version"] == kToolVersion);
    CHECK(outcome.summary["config"]["experiment"] == "simlemma");
    REQUIRE(outcome.summary["family_manifest_hashes"].is_array());
    CHECK(outcome.summary["family_manifest_hashes"].size() == 2);
    for (const auto& h : outcome.summary["family_manifest_hashes"])
        CHECK(h.get<std::string>().size() == 16);
}

TEST_CASE("unwritable directories raise io errors") {
    ExperimentOutcome outcome;
    outcome.config = default_config("simlemma");
    outcome.table.columns = {"a"};
    outcome.summary = summary_skeleton(outcome.config);
    CHECK_THROWS_AS(write_results(outcome, "/proc/definitely/not/writable"), IoError);
}
