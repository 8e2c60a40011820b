// Experiment harness: config-driven runs, run comparison, plot-data export.
// Exit codes: 0 success, 2 configuration error, 3 solver cap exhausted.

#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "mfg/mfg.hpp"

int main(int argc, char** argv) {
    CLI::App app{"mean-field game engine"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_override;
    std::int64_t seed_override = -1;
    int threads_override = 0;

    CLI::App* run = app.add_subcommand("run", "execute a configured solver run");
    run->add_option("--config", config_path, "JSON run configuration")->required();
    run->add_option("--out", out_override, "output directory (overrides config)");
    run->add_option("--seed", seed_override, "RNG seed (overrides config)");
    run->add_option("--threads", threads_override, "worker threads (overrides config)");

    std::string dir_a, dir_b, cmp_out;
    CLI::App* cmp = app.add_subcommand("compare", "compare two finished run directories");
    cmp->add_option("run_a", dir_a, "first run directory")->required();
    cmp->add_option("run_b", dir_b, "second run directory")->required();
    cmp->add_option("--out", cmp_out, "directory for compare.json and residuals.csv");

    std::string plot_dir, plot_kind, plot_out = "plot.csv";
    CLI::App* plot = app.add_subcommand("plotdata", "emit tidy (x,series,value) CSV");
    plot->add_option("run", plot_dir, "run directory")->required();
    plot->add_option("kind", plot_kind, "policy | residual | mean_state")->required();
    plot->add_option("--out", plot_out, "output CSV path");

    CLI::App* envs = app.add_subcommand("envs", "environment registry");
    CLI::App* envs_list = envs->add_subcommand("list", "list registered environments");
    envs->require_subcommand(1);

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            mfg::RunConfig cfg = mfg::parse_run_config_file(config_path);
            if (!out_override.empty()) cfg.out_dir = out_override;
            if (seed_override >= 0) {
                cfg.seed = static_cast<std::uint64_t>(seed_override);
                cfg.learner.seed = cfg.seed;
            }
            if (threads_override > 0) {
                cfg.threads = threads_override;
                cfg.learner.threads = threads_override;
            }
            int code = mfg::run_config(cfg);
            std::cout << "run finished: " << cfg.out_dir
                      << (code == 0 ? " (converged)" : " (cap exhausted)") << "\n";
            return code;
        }
        if (cmp->parsed()) return mfg::compare_runs(dir_a, dir_b, std::cout, cmp_out);
        if (plot->parsed()) {
            int code = mfg::plotdata(plot_dir, plot_kind, plot_out);
            std::cout << "wrote " << plot_out << "\n";
            return code;
        }
        if (envs_list->parsed()) {
            for (const mfg::EnvEntry& e : mfg::env_registry())
                std::cout << e.name << " - " << e.description << "\n";
            return 0;
        }
    } catch (const mfg::ConfigError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
