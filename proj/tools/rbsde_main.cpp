#include "rbsde/error.hpp"
#include "rbsde/experiment.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"Reflected BSDE solver driven by a Levy process"};
    app.require_subcommand(1);
    app.fallthrough();

    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    unsigned threads = 0;
    app.add_option("--seed", seed, "Override grid.seed");
    app.add_option("--out", out, "Output directory (overrides RBSDE_OUT_DIR and output.dir)");
    app.add_option("--threads", threads, "Worker threads, 0 = all cores");

    std::string config_path;
    auto* run = app.add_subcommand("run", "Simulate, solve and check an experiment");
    run->add_option("config", config_path, "Experiment JSON file")->required();

    std::string dump_path;
    std::optional<std::string> replay_config;
    auto* replay = app.add_subcommand("replay", "Rerun the solver on a dumped path bundle");
    replay->add_option("dump", dump_path, "bundle.bin")->required();
    replay->add_option("--config", replay_config, "Config to use instead of the embedded one");

    std::vector<std::string> tables;
    auto* merge = app.add_subcommand("tables", "Merge convergence tables to stdout");
    merge->add_option("csv", tables, "convergence.csv files")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : rbsde::kExitError;
    }

    rbsde::RunOptions options;
    options.seed = seed;
    if (out) options.out_dir = *out;
    options.threads = threads;

    try {
        if (*run) return rbsde::run_experiment(config_path, options);
        if (*replay) {
            std::optional<std::filesystem::path> cfg;
            if (replay_config) cfg = *replay_config;
            return rbsde::replay_experiment(dump_path, cfg, options);
        }
        std::vector<std::filesystem::path> files(tables.begin(), tables.end());
        std::cout << rbsde::merge_tables(files);
        return rbsde::kExitPass;
    } catch (const rbsde::Error& e) {
        std::cerr << e.what() << '\n';
        return rbsde::kExitError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return rbsde::kExitError;
    }
}
