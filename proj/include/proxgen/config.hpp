#pragma once

#include <cstdlib>
#include <fstream>

#include "proxgen/block_tree.hpp"
#include "proxgen/genrl.hpp"
#include "proxgen/jump_chain.hpp"
#include "proxgen/needle_tree.hpp"
#include "proxgen/strong_family.hpp"

namespace proxgen {

inline const std::vector<std::string>& experiment_names() {
    static const std::vector<std::string> names = {
        "simlemma", "genrl-strong", "genrl-weak", "lb-scan",
        "sio-bench", "prop1-gap",   "metarl",
    };
    return names;
}

/// Flat experiment configuration. The textual form is `key = value` lines
/// grouped into [family], [algorithm] and [run] sections; parsing unknown
/// keys is an error and a config round-trips through to_text() losslessly.
struct ExperimentConfig {
    std::string experiment = "simlemma";

    // [family]
    std::string family_kind = "needle_tree"; // needle_tree | jump_chain | block_tree | strong
    int horizon = 12;
    int chain_horizon = 16; // jump-chain horizon for dual-family experiments
    int gap = 2;            // needle probe depth
    int k = 3;              // solver-cost exponent (needle and jump-chain)
    int members = 8;        // strong family size
    double spread = 1.0;    // strong family reward spread
    int block_len = 3;      // block-tree block length
    double block_beta = 0.05;
    double v0 = 1.0;
    std::uint64_t family_seed = 101;
    int feature_dim = 1 << 16;
    std::int64_t q_d = 1;

    // [algorithm]
    double epsilon = 0.2;
    double delta = 0.2;
    double beta = 0.02;             // perturbed-oracle strength
    std::string oracle = "exact";   // exact | perturbed | block_adversarial
    std::int64_t n = 0;             // 0 derives n from (epsilon, delta)
    std::string tie_break = "smallest"; // smallest | random | both
    double c = 5.0;                 // stochastic solver repeat constant
    int repetitions = 200;          // concentration audit repetitions
    std::int64_t training_budget = 10000;
    std::vector<int> scan_horizons = {16, 24, 32, 40};

    // [run]
    int trials = 50;
    std::uint64_t master_seed = 1;
    std::int64_t budget = -1; // -1 means unlimited
    std::string out_dir;      // empty: $PROXGEN_OUT or "results"

    std::optional<std::int64_t> budget_opt() const {
        if (budget < 0) return std::nullopt;
        return budget;
    }

    std::int64_t resolved_n() const {
        return n > 0 ? n : genrl_sample_size(epsilon, delta, horizon, 2);
    }

    std::string resolved_out_dir() const {
        if (!out_dir.empty()) return out_dir;
        if (const char* env = std::getenv("PROXGEN_OUT")) return env;
        return "results";
    }

    NeedleTreeParams needle_params() const {
        NeedleTreeParams p;
        p.horizon = horizon;
        p.gap = gap;
        p.k = k;
        p.seed = family_seed;
        p.feature_dim = feature_dim;
        p.sample_cost = q_d;
        return p;
    }

    JumpChainParams jump_chain_params() const {
        JumpChainParams p;
        p.horizon = family_kind == "jump_chain" ? horizon : chain_horizon;
        p.k = k;
        p.seed = family_seed;
        p.feature_dim = feature_dim;
        p.sample_cost = q_d;
        return p;
    }

    StrongFamilyParams strong_params() const {
        StrongFamilyParams p;
        p.horizon = horizon;
        p.members = members;
        p.spread = spread;
        p.seed = family_seed;
        p.feature_dim = std::min(feature_dim, 64);
        p.sample_cost = q_d;
        return p;
    }

    BlockTreeParams block_params() const {
        BlockTreeParams p;
        p.horizon = horizon;
        p.block_len = block_len;
        p.beta = block_beta;
        p.v0 = v0;
        p.seed = family_seed;
        p.feature_dim = std::min(feature_dim, 64);
        p.sample_cost = q_d;
        return p;
    }

    std::vector<TieBreak> tie_break_modes() const {
        if (tie_break == "smallest") return {TieBreak::SmallestIndex};
        if (tie_break == "random") return {TieBreak::SeededRandom};
        return {TieBreak::SmallestIndex, TieBreak::SeededRandom};
    }

    std::string to_text() const {
        std::ostringstream os;
        os << "experiment = " << experiment << "\n\n";
        os << "[family]\n";
        os << "kind = " << family_kind << "\n";
        os << "horizon = " << horizon << "\n";
        os << "chain_horizon = " << chain_horizon << "\n";
        os << "gap = " << gap << "\n";
        os << "k = " << k << "\n";
        os << "members = " << members << "\n";
        os << "spread = " << format_double(spread) << "\n";
        os << "block_len = " << block_len << "\n";
        os << "block_beta = " << format_double(block_beta) << "\n";
        os << "v0 = " << format_double(v0) << "\n";
        os << "seed = " << family_seed << "\n";
        os << "feature_dim = " << feature_dim << "\n";
        os << "q_d = " << q_d << "\n\n";
        os << "[algorithm]\n";
        os << "epsilon = " << format_double(epsilon) << "\n";
        os << "delta = " << format_double(delta) << "\n";
        os << "beta = " << format_double(beta) << "\n";
        os << "oracle = " << oracle << "\n";
        os << "n = " << n << "\n";
        os << "tie_break = " << tie_break << "\n";
        os << "c = " << format_double(c) << "\n";
        os << "repetitions = " << repetitions << "\n";
        os << "training_budget = " << training_budget << "\n";
        os << "scan_horizons = " << join_ints(scan_horizons) << "\n\n";
        os << "[run]\n";
        os << "trials = " << trials << "\n";
        os << "master_seed = " << master_seed << "\n";
        os << "budget = " << budget << "\n";
        os << "out_dir = " << out_dir << "\n";
        return os.str();
    }

    static std::string format_double(double x) { return shortest_double_string(x); }

    static std::string join_ints(const std::vector<int>& v) {
        std::string s;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(v[i]);
        }
        return s;
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::int64_t parse_int(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        std::int64_t v = std::stoll(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ParseError("key '" + key + "': expected integer, got '" + value + "'");
    }
}

inline std::uint64_t parse_uint(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        std::uint64_t v = std::stoull(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ParseError("key '" + key + "': expected unsigned integer, got '" + value + "'");
    }
}

inline double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ParseError("key '" + key + "': expected number, got '" + value + "'");
    }
}

inline std::vector<int> parse_int_list(const std::string& key, const std::string& value) {
    std::vector<int> out;
    std::string item;
    std::istringstream is(value);
    while (std::getline(is, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        out.push_back(static_cast<int>(parse_int(key, item)));
    }
    if (out.empty()) throw ParseError("key '" + key + "': expected a comma-separated list");
    return out;
}

} // namespace detail

inline ExperimentConfig default_config(const std::string& experiment);

/// Parse the flat `key = value` text form over the named experiment's
/// defaults, so a minimal config comes back with documented defaults
/// filled. Unknown keys and malformed values raise ParseError naming the
/// key.
inline ExperimentConfig parse_config(const std::string& text) {
    ExperimentConfig cfg;
    {
        // First pass: the experiment name selects the default set.
        std::istringstream scan(text);
        std::string line;
        while (std::getline(scan, line)) {
            std::string t = detail::trim(line);
            if (t.rfind("experiment", 0) == 0) {
                std::size_t eq = t.find('=');
                if (eq != std::string::npos) {
                    std::string name = detail::trim(t.substr(eq + 1));
                    const auto& names = experiment_names();
                    if (std::find(names.begin(), names.end(), name) != names.end())
                        cfg = default_config(name);
                }
                break;
            }
        }
    }
    std::istringstream is(text);
    std::string line;
    std::string section;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        std::string t = detail::trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[' && t.back() == ']') {
            section = detail::trim(t.substr(1, t.size() - 2));
            if (section != "family" && section != "algorithm" && section != "run")
                throw ParseError("unknown section '" + section + "' at line " +
                                 std::to_string(line_no));
            continue;
        }
        std::size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw ParseError("expected key = value at line " + std::to_string(line_no));
        std::string key = detail::trim(t.substr(0, eq));
        std::string value = detail::trim(t.substr(eq + 1));
        std::string qual = section.empty() ? key : section + "." + key;

        using detail::parse_double;
        using detail::parse_int;
        using detail::parse_int_list;
        using detail::parse_uint;
        if (qual == "experiment") cfg.experiment = value;
        else if (qual == "family.kind") cfg.family_kind = value;
        else if (qual == "family.horizon") cfg.horizon = static_cast<int>(parse_int(qual, value));
        else if (qual == "family.chain_horizon")
            cfg.chain_horizon = static_cast<int>(parse_int(qual, value));
        else if (qual == "family.gap") cfg.gap = static_cast<int>(parse_int(qual, value));
        else if (qual == "family.k") cfg.k = static_cast<int>(parse_int(qual, value));
        else if (qual == "family.members") cfg.members = static_cast<int>(parse_int(qual, value));
        else if (qual == "family.spread") cfg.spread = parse_double(qual, value);
        else if (qual == "family.block_len")
            cfg.block_len = static_cast<int>(parse_int(qual, value));
        else if (qual == "family.block_beta") cfg.block_beta = parse_double(qual, value);
        else if (qual == "family.v0") cfg.v0 = parse_double(qual, value);
        else if (qual == "family.seed") cfg.family_seed = parse_uint(qual, value);
        else if (qual == "family.feature_dim")
            cfg.feature_dim = static_cast<int>(parse_int(qual, value));
        else if (qual == "family.q_d") cfg.q_d = parse_int(qual, value);
        else if (qual == "algorithm.epsilon") cfg.epsilon = parse_double(qual, value);
        else if (qual == "algorithm.delta") cfg.delta = parse_double(qual, value);
        else if (qual == "algorithm.beta") cfg.beta = parse_double(qual, value);
        else if (qual == "algorithm.oracle") cfg.oracle = value;
        else if (qual == "algorithm.n") cfg.n = parse_int(qual, value);
        else if (qual == "algorithm.tie_break") cfg.tie_break = value;
        else if (qual == "algorithm.c") cfg.c = parse_double(qual, value);
        else if (qual == "algorithm.repetitions")
            cfg.repetitions = static_cast<int>(parse_int(qual, value));
        else if (qual == "algorithm.training_budget")
            cfg.training_budget = parse_int(qual, value);
        else if (qual == "algorithm.scan_horizons")
            cfg.scan_horizons = parse_int_list(qual, value);
        else if (qual == "run.trials") cfg.trials = static_cast<int>(parse_int(qual, value));
        else if (qual == "run.master_seed") cfg.master_seed = parse_uint(qual, value);
        else if (qual == "run.budget") cfg.budget = parse_int(qual, value);
        else if (qual == "run.out_dir") cfg.out_dir = value;
        else throw ParseError("unknown key '" + qual + "' at line " + std::to_string(line_no));
    }
    return cfg;
}

/// Validate every precondition the experiment's builders impose. All
/// violations are collected and reported together, each naming its key.
inline void validate_config(const ExperimentConfig& cfg) {
    std::vector<std::string> problems;
    auto require = [&](bool ok, const std::string& msg) {
        if (!ok) problems.push_back(msg);
    };

    const auto& names = experiment_names();
    require(std::find(names.begin(), names.end(), cfg.experiment) != names.end(),
            "experiment: unknown experiment '" + cfg.experiment + "'");
    require(cfg.family_kind == "needle_tree" || cfg.family_kind == "jump_chain" ||
                cfg.family_kind == "block_tree" || cfg.family_kind == "strong",
            "family.kind: unknown kind '" + cfg.family_kind + "'");
    require(cfg.oracle == "exact" || cfg.oracle == "perturbed" ||
                cfg.oracle == "block_adversarial",
            "algorithm.oracle: unknown oracle '" + cfg.oracle + "'");
    require(cfg.tie_break == "smallest" || cfg.tie_break == "random" || cfg.tie_break == "both",
            "algorithm.tie_break: unknown mode '" + cfg.tie_break + "'");
    require(cfg.trials >= 1, "run.trials: must be >= 1");
    require(cfg.n >= 0, "algorithm.n: must be >= 0 (0 derives n from epsilon and delta)");
    require(cfg.repetitions >= 1, "algorithm.repetitions: must be >= 1");
    require(cfg.training_budget >= 0, "algorithm.training_budget: must be >= 0");
    require(cfg.c > 0.0, "algorithm.c: must be > 0");
    if (cfg.n == 0) {
        require(cfg.epsilon > 0.0 && cfg.epsilon < 1.0, "algorithm.epsilon: must be in (0,1)");
        require(cfg.delta > 0.0 && cfg.delta < 1.0, "algorithm.delta: must be in (0,1)");
    }
    require(cfg.beta >= 0.0 && cfg.beta < 0.25, "algorithm.beta: must be in [0, 1/4)");

    auto try_params = [&](const std::string& key_hint, auto&& build) {
        try {
            build();
        } catch (const InvalidParams& e) {
            problems.push_back(key_hint + ": " + e.what());
        }
    };
    const bool needs_needle = cfg.family_kind == "needle_tree" || cfg.experiment == "simlemma" ||
                              cfg.experiment == "sio-bench";
    const bool needs_chain = cfg.family_kind == "jump_chain" || cfg.experiment == "simlemma" ||
                             cfg.experiment == "sio-bench";
    if (needs_needle)
        try_params("family.horizon", [&] { cfg.needle_params().validate(); });
    if (needs_chain)
        try_params("family.chain_horizon", [&] { cfg.jump_chain_params().validate(); });
    if (cfg.family_kind == "strong")
        try_params("family.horizon", [&] { cfg.strong_params().validate(); });
    if (cfg.family_kind == "block_tree")
        try_params("family.horizon", [&] { cfg.block_params().validate(); });
    if (cfg.experiment == "lb-scan") {
        require(!cfg.scan_horizons.empty(), "algorithm.scan_horizons: must be nonempty");
        for (int h : cfg.scan_horizons) {
            NeedleTreeParams p = cfg.needle_params();
            p.horizon = h;
            try_params("algorithm.scan_horizons", [&] { p.validate(); });
        }
    }

    if (!problems.empty()) {
        std::string msg = "configuration invalid:";
        for (const auto& p : problems) msg += "\n  - " + p;
        throw ValidationError(msg);
    }
}

/// Built-in defaults for each experiment; every threshold the experiment
/// enforces is fixed in code, the config only sizes the run.
inline ExperimentConfig default_config(const std::string& experiment) {
    ExperimentConfig cfg;
    cfg.experiment = experiment;
    if (experiment == "simlemma") {
        cfg.family_kind = "needle_tree";
        cfg.horizon = 12;
        cfg.gap = 2;
        cfg.chain_horizon = 16;
        cfg.k = 3;
        cfg.family_seed = 101;
        cfg.feature_dim = 256;
        cfg.trials = 1;
    } else if (experiment == "genrl-strong") {
        cfg.family_kind = "strong";
        cfg.horizon = 10;
        cfg.members = 8;
        cfg.spread = 1.0;
        cfg.family_seed = 42;
        cfg.feature_dim = 16;
        cfg.epsilon = 0.2;
        cfg.delta = 0.2;
        cfg.beta = 0.02;
        cfg.trials = 50;
        cfg.repetitions = 200;
        cfg.master_seed = 7;
    } else if (experiment == "genrl-weak") {
        cfg.family_kind = "needle_tree";
        cfg.horizon = 12;
        cfg.gap = 2;
        cfg.family_seed = 101;
        cfg.feature_dim = 1 << 16;
        cfg.n = 2048;
        cfg.tie_break = "both";
        cfg.trials = 100;
        cfg.master_seed = 11;
    } else if (experiment == "lb-scan") {
        cfg.family_kind = "needle_tree";
        cfg.horizon = 16;
        cfg.gap = 4;
        cfg.scan_horizons = {16, 24, 32, 40};
        cfg.feature_dim = 256;
        cfg.trials = 25;
        cfg.master_seed = 13;
    } else if (experiment == "sio-bench") {
        cfg.family_kind = "needle_tree";
        cfg.horizon = 12;
        cfg.gap = 2;
        cfg.chain_horizon = 16;
        cfg.k = 3;
        cfg.c = 5.0;
        cfg.family_seed = 101;
        cfg.feature_dim = 1 << 16;
        cfg.trials = 50;
        cfg.master_seed = 17;
    } else if (experiment == "prop1-gap") {
        cfg.family_kind = "block_tree";
        cfg.horizon = 12;
        cfg.block_len = 3;
        cfg.block_beta = 0.05;
        cfg.v0 = 1.0;
        cfg.oracle = "block_adversarial";
        cfg.n = 1;
        cfg.feature_dim = 16;
        cfg.family_seed = 34;
        cfg.trials = 20;
        cfg.master_seed = 2;
    } else if (experiment == "metarl") {
        cfg.family_kind = "needle_tree";
        cfg.horizon = 40;
        cfg.gap = 4;
        cfg.training_budget = 10000;
        cfg.feature_dim = 256;
        cfg.trials = 100;
        cfg.master_seed = 20;
    } else {
        throw ValidationError("experiment: unknown experiment '" + experiment + "'");
    }
    return cfg;
}

/// Load a config file, apply it over the experiment's defaults, validate.
inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open config file '" + path + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    ExperimentConfig parsed = parse_config(buffer.str());
    validate_config(parsed);
    return parsed;
}

} // namespace proxgen
