#include <omp.h>

#include <cstdio>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "dualstop/config.hpp"
#include "dualstop/errors.hpp"
#include "dualstop/oracles.hpp"
#include "dualstop/path_io.hpp"
#include "dualstop/pipeline.hpp"

using namespace dualstop;

namespace {

enum ExitCode { ok = 0, failure = 1, bad_config = 2, diverged = 3, out_of_resources = 4, bad_file = 5 };

struct Common {
    std::string config;
    std::uint64_t seed = 0;
    int threads = 0;
    bool dry_run = false;
    std::string out;
};

RunConfig resolve(const Common& c, const CLI::App& cmd) {
    RunConfig cfg = load_config(c.config);
    if (cmd.count("--seed")) cfg.master_seed = c.seed;
    if (const auto* out = cmd.get_option_no_throw("--out"); out && out->count()) cfg.output_dir = c.out;
    cfg.validate();
    return cfg;
}

void print_oracles(const RunConfig& cfg, int tree_steps) {
    const double T = cfg.grid.maturity;
    const int n = cfg.grid.exercise_dates;
    if (const auto* gbm = std::get_if<GbmSpec>(&cfg.model)) {
        if (gbm->dimension() != 1 || cfg.payoff.kind != PayoffKind::put) {
            std::printf("no closed-form or lattice reference for this model and payoff\n");
            return;
        }
        const double q = gbm->dividend.empty() ? 0.0 : gbm->dividend[0];
        const double s = gbm->spot[0], k = cfg.payoff.strike, r = gbm->rate, vol = gbm->volatility[0];
        std::printf("black_scholes_european_put %.10f\n", black_scholes_put(s, k, r, vol, T, q));
        if (q != 0.0) {
            std::printf("binomial reference needs a zero dividend yield\n");
            return;
        }
        const int steps = (tree_steps + n - 1) / n * n;
        std::printf("binomial_bermudan_put %.10f (%d dates, %d tree steps)\n",
                    binomial_bermudan_put(s, k, r, vol, T, n, steps), n, steps);
        return;
    }
    const auto& heston = std::get<HestonSpec>(cfg.model);
    if (cfg.payoff.kind != PayoffKind::put) {
        std::printf("no reference for this payoff under the Heston model\n");
        return;
    }
    std::printf("heston_european_put %.10f\n", heston_european_put(heston, cfg.payoff.strike, T));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Primal-dual Bermudan option bounds with neural regression"};
    app.require_subcommand(1);

    Common common;
    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", common.config, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
        cmd->add_option("--seed", common.seed, "Override the master seed");
        cmd->add_option("--threads", common.threads, "Worker threads (0 keeps the OpenMP default)")
            ->check(CLI::NonNegativeNumber);
        cmd->add_flag("--dry-run", common.dry_run, "Validate and print the resolved plan only");
    };

    auto* run = app.add_subcommand("run", "Simulate, train, evaluate and hedge");
    add_common(run);
    run->add_option("--out", common.out, "Artifact directory (overrides output.directory)");

    std::string report_dir;
    auto* report = app.add_subcommand("report", "Render the summary table of a finished run");
    report->add_option("dir", report_dir, "Artifact directory")->required()->check(CLI::ExistingDirectory);

    int tree_steps = 10000;
    auto* oracle = app.add_subcommand("oracle", "Print reference prices for the configured contract");
    add_common(oracle);
    oracle->add_option("--tree-steps", tree_steps, "Binomial tree depth")->check(CLI::PositiveNumber);

    std::size_t sim_paths = 0;
    auto* sim = app.add_subcommand("simulate", "Write the training paths to a binary cache");
    add_common(sim);
    sim->add_option("--out", common.out, "Output file")->required();
    sim->add_option("--paths", sim_paths, "Number of paths (default: simulation.paths)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // Usage errors share the configuration exit code; --help stays at zero.
        return app.exit(e) == 0 ? ok : bad_config;
    }
    if (common.threads > 0) omp_set_num_threads(common.threads);

    std::filesystem::path run_dir;
    try {
        if (*report) {
            std::cout << render_report(report_dir);
            return ok;
        }
        const CLI::App& cmd = *app.get_subcommands().front();
        RunConfig cfg = resolve(common, cmd);
        run_dir = cfg.output_dir;
        if (common.dry_run) {
            std::cout << describe_plan(cfg);
            return ok;
        }
        if (*run) {
            RunOptions options;
            options.log = &std::cerr;
            const auto outcome = run_pipeline(cfg, options);
            std::cout << render_report(outcome->directory);
            std::cout << "\nartifacts: " << outcome->directory.string() << "\n";
        } else if (*oracle) {
            print_oracles(cfg, tree_steps);
        } else if (*sim) {
            const PathModel model(cfg.model);
            const std::size_t n = sim_paths ? sim_paths : cfg.training_paths;
            write_path_batch(common.out, simulate(model, cfg.grid, n,
                                                  run_seed(cfg.master_seed, SeedPurpose::training_paths, 0),
                                                  cfg.memory_cap));
            std::cout << "wrote " << n << " paths to " << common.out << "\n";
        }
        return ok;
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return bad_config;
    } catch (const DivergenceError& e) {
        std::cerr << "training diverged: " << e.what() << " (epoch " << e.epoch();
        if (e.date_index() >= 0) std::cerr << ", exercise date " << e.date_index();
        std::cerr << "), details in " << (run_dir / "failure.json").string() << "\n";
        return diverged;
    } catch (const ResourceError& e) {
        std::cerr << "resource limit: " << e.what() << "\n";
        return out_of_resources;
    } catch (const FormatError& e) {
        std::cerr << "file error: " << e.what() << "\n";
        return bad_file;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return failure;
    }
}
