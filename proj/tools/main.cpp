// proxgen: experiment harness for query-budgeted generalization across
// families of layered MDPs. One subcommand per experiment; each run writes
// a per-trial CSV and a JSON summary and exits 0 only if every threshold
// was met.

#include <CLI11.hpp>

#include <iostream>

#include "proxgen/experiments.hpp"
#include "proxgen/proxgen.hpp"

namespace {

struct CliOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> trials;
    std::string out_dir;
    bool print_config = false;
};

int run(const std::string& experiment, const CliOptions& opts) {
    using namespace proxgen;
    ExperimentConfig cfg;
    try {
        cfg = opts.config_path.empty() ? default_config(experiment)
                                       : load_config(opts.config_path);
        if (cfg.experiment != experiment)
            throw ValidationError("experiment: config file is for '" + cfg.experiment +
                                  "' but the subcommand is '" + experiment + "'");
        if (opts.seed) cfg.master_seed = *opts.seed;
        if (opts.trials) cfg.trials = *opts.trials;
        if (!opts.out_dir.empty()) cfg.out_dir = opts.out_dir;
        validate_config(cfg);
    } catch (const Error& e) {
        std::cerr << "proxgen: " << e.what() << "\n";
        return 2;
    }

    if (opts.print_config) {
        std::cout << cfg.to_text();
        return 0;
    }

    try {
        ExperimentOutcome outcome = run_experiment(cfg);
        WrittenFiles files = write_results(outcome, cfg.resolved_out_dir(), outcome.manifests);
        std::cout << outcome.summary.dump(2) << "\n";
        std::cout << "wrote " << files.csv_path << "\n";
        std::cout << "wrote " << files.json_path << "\n";
        std::cout << experiment << ": " << (outcome.pass ? "PASS" : "FAIL") << " ("
                  << outcome.elapsed_seconds << "s)\n";
        return outcome.exit_code();
    } catch (const ValidationError& e) {
        std::cerr << "proxgen: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "proxgen: " << e.what() << "\n";
        return 1;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"proxgen: generalization testbed for families of layered MDPs"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string("proxgen ") + proxgen::kToolVersion);

    CliOptions opts;
    for (const std::string& name : proxgen::experiment_names()) {
        CLI::App* sub = app.add_subcommand(name, "run the " + name + " experiment");
        sub->add_option("--config", opts.config_path, "experiment config file (key = value)");
        sub->add_option("--seed", opts.seed, "override run.master_seed");
        sub->add_option("--trials", opts.trials, "override run.trials");
        sub->add_option("--out", opts.out_dir,
                        "output directory (default: $PROXGEN_OUT or ./results)");
        sub->add_flag("--print-config", opts.print_config,
                      "print the resolved config and exit");
    }

    CLI11_PARSE(app, argc, argv);
    return run(app.get_subcommands().front()->get_name(), opts);
}
