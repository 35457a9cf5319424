#pragma once

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "proxgen/config.hpp"
#include "proxgen/version.hpp"

namespace proxgen {

using Json = nlohmann::ordered_json;

/// One row per trial; the fixed column order is part of the output format.
struct ResultTable {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    void add_row(std::vector<std::string> row) {
        if (row.size() != columns.size())
            throw InvalidParams("result row width does not match columns");
        rows.push_back(std::move(row));
    }

    std::string to_csv() const {
        std::ostringstream os;
        for (std::size_t i = 0; i < columns.size(); ++i) {
            if (i) os << ',';
            os << columns[i];
        }
        os << '\n';
        for (const auto& row : rows) {
            for (std::size_t i = 0; i < row.size(); ++i) {
                if (i) os << ',';
                os << row[i];
            }
            os << '\n';
        }
        return os.str();
    }
};

inline std::string csv_double(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

/// Everything one experiment run produces. `pass` mirrors the exit status:
/// 0 when all thresholds were met, 1 otherwise.
struct ExperimentOutcome {
    ExperimentConfig config;
    ResultTable table;
    Json summary;
    std::vector<std::string> manifests; // family manifests, written alongside
    bool pass = false;
    double elapsed_seconds = 0.0;

    int exit_code() const { return pass ? 0 : 1; }
};

inline Json config_json(const ExperimentConfig& cfg) {
    Json j;
    j["experiment"] = cfg.experiment;
    j["family"] = {{"kind", cfg.family_kind},
                   {"horizon", cfg.horizon},
                   {"chain_horizon", cfg.chain_horizon},
                   {"gap", cfg.gap},
                   {"k", cfg.k},
                   {"members", cfg.members},
                   {"spread", cfg.spread},
                   {"block_len", cfg.block_len},
                   {"block_beta", cfg.block_beta},
                   {"v0", cfg.v0},
                   {"seed", cfg.family_seed},
                   {"feature_dim", cfg.feature_dim},
                   {"q_d", cfg.q_d}};
    j["algorithm"] = {{"epsilon", cfg.epsilon},
                      {"delta", cfg.delta},
                      {"beta", cfg.beta},
                      {"oracle", cfg.oracle},
                      {"n", cfg.n},
                      {"tie_break", cfg.tie_break},
                      {"c", cfg.c},
                      {"repetitions", cfg.repetitions},
                      {"training_budget", cfg.training_budget},
                      {"scan_horizons", cfg.scan_horizons}};
    j["run"] = {{"trials", cfg.trials},
                {"master_seed", cfg.master_seed},
                {"budget", cfg.budget},
                {"out_dir", cfg.out_dir}};
    return j;
}

inline Json summary_skeleton(const ExperimentConfig& cfg) {
    Json j;
    j["schema_version"] = kSummarySchemaVersion;
    j["tool_version"] = kToolVersion;
    j["experiment"] = cfg.experiment;
    j["config"] = config_json(cfg);
    j["family_manifest_hashes"] = Json::array();
    j["thresholds"] = Json::object();
    j["aggregates"] = Json::object();
    j["pass"] = false;
    return j;
}

struct WrittenFiles {
    std::string csv_path;
    std::string json_path;
    std::vector<std::string> manifest_paths;
};

/// Write the CSV, the JSON summary and any family manifests into `dir`.
/// Reruns of the same outcome produce byte-identical files.
inline WrittenFiles write_results(const ExperimentOutcome& outcome, const std::string& dir,
                                  const std::vector<std::string>& manifests = {}) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + dir + "': " + ec.message());

    auto write_file = [&](const std::string& path, const std::string& data) {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw IoError("cannot write '" + path + "'");
        out << data;
        if (!out) throw IoError("write failed for '" + path + "'");
    };

    WrittenFiles files;
    files.csv_path = (fs::path(dir) / (outcome.config.experiment + "_results.csv")).string();
    files.json_path = (fs::path(dir) / (outcome.config.experiment + "_summary.json")).string();
    write_file(files.csv_path, outcome.table.to_csv());
    Json summary = outcome.summary;
    if (outcome.table.rows.empty()) summary["empty"] = true;
    write_file(files.json_path, summary.dump(2) + "\n");
    for (std::size_t i = 0; i < manifests.size(); ++i) {
        std::string path =
            (fs::path(dir) / (outcome.config.experiment + "_family" + std::to_string(i) +
                              ".manifest"))
                .string();
        write_file(path, manifests[i]);
        files.manifest_paths.push_back(path);
    }
    return files;
}

} // namespace proxgen
