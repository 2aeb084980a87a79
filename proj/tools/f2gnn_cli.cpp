#include <CLI11.hpp>
#include <cstdint>
#include <iostream>
#include <string>

#include "f2gnn/config.hpp"
#include "f2gnn/errors.hpp"
#include "f2gnn/runner.hpp"

int main(int argc, char** argv) {
    CLI::App app{"f2gnn: fair federated graph learning simulator"};

    std::string config_path;
    std::string out_override;
    std::string mode_override;
    std::uint64_t seed_override = 0;
    bool print_config = false;

    app.add_option("--config", config_path, "experiment config file")->required();
    app.add_flag("--print-config", print_config, "print the resolved config and exit");
    app.add_option("--out", out_override, "output directory (overrides run.out)");
    app.add_option("--mode", mode_override,
                   "mode override: federate | fedavg_baseline | theory_sweep | audit");
    auto* seed_opt =
        app.add_option("--seed-override", seed_override,
                       "base seed replacing sbm/partition/server seeds and the split list");

    CLI11_PARSE(app, argc, argv);
    const bool has_seed_override = seed_opt->count() > 0;

    try {
        f2gnn::ExperimentConfig cfg = f2gnn::parse_config(config_path);
        if (!mode_override.empty()) {
            if (mode_override == "federate") cfg.mode = f2gnn::RunMode::federate;
            else if (mode_override == "fedavg_baseline") cfg.mode = f2gnn::RunMode::fedavg_baseline;
            else if (mode_override == "theory_sweep") cfg.mode = f2gnn::RunMode::theory_sweep;
            else if (mode_override == "audit") cfg.mode = f2gnn::RunMode::audit;
            else throw f2gnn::ValidationError("unknown --mode: " + mode_override);
            cfg.validate();
        }
        if (has_seed_override) {
            cfg.sbm.seed = seed_override;
            cfg.partition_seed = seed_override + 1;
            cfg.server_seed = seed_override + 2;
            cfg.split_seeds = {seed_override + 3};
        }
        if (!out_override.empty()) cfg.out_dir = out_override;

        if (print_config) {
            std::cout << cfg.dump();
            return 0;
        }

        const auto summary = f2gnn::run_experiment(cfg, cfg.out_dir);
        if (cfg.mode == f2gnn::RunMode::federate || cfg.mode == f2gnn::RunMode::fedavg_baseline) {
            std::cout << "mode=" << f2gnn::to_string(cfg.mode) << " splits=" << summary.seeds.size()
                      << " mean_accuracy=" << 100.0 * summary.mean_global_accuracy()
                      << "% mean(delta_sp+delta_eo)=" << 100.0 * summary.mean_global_unfairness()
                      << "%\n";
        }
        std::cout << "artifacts written to " << cfg.out_dir << "\n";
        return 0;
    } catch (const f2gnn::Error& e) {
        std::cerr << "error [" << e.name() << "]: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
