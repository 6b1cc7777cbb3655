#include "dualstop/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include "dualstop/errors.hpp"
#include "dualstop/method_one.hpp"
#include "dualstop/method_two.hpp"
#include "dualstop/net_io.hpp"

namespace dualstop {

using nlohmann::json;

namespace {

void log_line(const RunOptions& options, const std::string& line) {
    if (options.log) *options.log << line << std::endl;
}

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

// Full-precision text for CSV cells.
std::string exact(double v) {
    if (std::isnan(v)) return "NA";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

json number_or_null(double v) { return std::isnan(v) ? json(nullptr) : json(v); }

void write_text(const std::filesystem::path& file, const std::string& text) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw FormatError("cannot write " + file.string());
    out << text;
}

json read_json(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw FormatError("missing artifact " + file.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw FormatError("corrupt artifact " + file.string() + ": " + e.what());
    }
}

json summary_json(const SampleSummary& s) {
    return {{"mean", s.mean}, {"sd", s.sd}, {"se", s.se},   {"min", s.min}, {"max", s.max},
            {"q01", s.q01},   {"q05", s.q05}, {"q50", s.q50}, {"q95", s.q95}, {"q99", s.q99}};
}

std::string diagnostics_csv(const std::vector<RepeatOutcome>& repeats) {
    std::ostringstream out;
    out << "repeat,unit,index,epochs,best_epoch,train_loss,validation_loss,validation_lower,seconds\n";
    for (std::size_t r = 0; r < repeats.size(); ++r) {
        const auto& d = repeats[r].diagnostics;
        for (const auto& rec : d.records) {
            out << r << ',' << d.unit << ',' << rec.index << ',' << rec.epochs << ',' << rec.best_epoch << ','
                << exact(rec.train_loss) << ',' << exact(rec.validation_loss) << ',' << exact(rec.validation_lower)
                << ',' << exact(rec.seconds) << '\n';
        }
    }
    return out.str();
}

json bounds_json(const RunConfig& cfg, const RunOutcome& outcome) {
    const auto& b = outcome.bounds;
    json repeats = json::array();
    for (const auto& r : outcome.repeats) {
        repeats.push_back({{"lower_mean", r.bounds.lower_mean},
                           {"lower_se", r.bounds.lower_se},
                           {"upper_mean", r.bounds.upper_mean},
                           {"upper_se", r.bounds.upper_se},
                           {"gap_mean", r.bounds.gap_mean},
                           {"gap_se", r.bounds.gap_se},
                           {"variance_plain", r.variance.var_plain},
                           {"variance_cv", r.variance.var_cv},
                           {"in_sample_lower", r.diagnostics.in_sample_lower},
                           {"in_sample_upper", r.diagnostics.in_sample_upper},
                           {"total_epochs", r.diagnostics.total_epochs},
                           {"train_seconds", r.diagnostics.seconds}});
    }
    double seconds = 0.0;
    for (const auto& r : outcome.repeats) seconds += r.diagnostics.seconds;
    return {{"schema_version", kSchemaVersion},
            {"method", cfg.method == Method::one ? "I" : "II"},
            {"variations", cfg.variations.labels()},
            {"parameter_count", outcome.parameter_count},
            {"n_eval", b.n_eval},
            {"n_repeats", b.n_repeats},
            {"lower_mean", b.lower_mean},
            {"lower_se", b.lower_se},
            {"lower_sd", number_or_null(b.lower_sd())},
            {"upper_mean", b.upper_mean},
            {"upper_se", b.upper_se},
            {"upper_sd", number_or_null(b.upper_sd())},
            {"gap_mean", b.gap_mean},
            {"gap_se", b.gap_se},
            {"gap_sd", number_or_null(b.gap_sd())},
            {"mean_train_seconds", seconds / static_cast<double>(outcome.repeats.size())},
            {"repeats", repeats}};
}

json hedge_json(const RunConfig& cfg, const HedgeReport& h) {
    return {{"schema_version", kSchemaVersion},
            {"v0", h.v0},
            {"paths", static_cast<std::size_t>(h.eps1.size())},
            {"rebalancing", cfg.rebalancing == Rebalancing::exercise_dates ? "exercise_dates" : "substeps"},
            {"eps1", summary_json(h.eps1_summary)},
            {"eps2", summary_json(h.eps2_summary)}};
}

std::string histogram_csv(const HedgeReport& h) {
    std::ostringstream out;
    out << "bin_left,bin_right,count_eps1,count_eps2\n";
    for (std::size_t k = 0; k < h.eps1_counts.size(); ++k)
        out << exact(h.bin_edges[k]) << ',' << exact(h.bin_edges[k + 1]) << ',' << h.eps1_counts[k] << ','
            << h.eps2_counts[k] << '\n';
    return out.str();
}

// Columns shared by summary.csv and the markdown report.
std::string summary_csv(const json& b) {
    auto cell = [&](const char* key) {
        const json& v = b.at(key);
        return v.is_null() ? std::string("NA") : exact(v.get<double>());
    };
    std::ostringstream out;
    out << "method,variables,lb_mean,lb_se,lb_sd,ub_mean,ub_se,ub_sd,diff_mean,diff_se,diff_sd\n";
    out << b.at("method").get<std::string>() << ',' << b.at("parameter_count").get<std::size_t>() << ','
        << cell("lower_mean") << ',' << cell("lower_se") << ',' << cell("lower_sd") << ',' << cell("upper_mean")
        << ',' << cell("upper_se") << ',' << cell("upper_sd") << ',' << cell("gap_mean") << ',' << cell("gap_se")
        << ',' << cell("gap_sd") << '\n';
    return out.str();
}

}  // namespace

std::string describe_plan(const RunConfig& cfg) {
    const PathModel model(cfg.model);
    const NetArchitecture arch = make_architecture(cfg.policy_kind(), model.state_dim(), model.brownian_dim(),
                                                   cfg.variations, cfg.network.phi_hidden, cfg.network.psi_hidden);
    const std::size_t nets = cfg.method == Method::one ? static_cast<std::size_t>(cfg.grid.exercise_dates) : 1;
    std::ostringstream out;
    out << "method " << (cfg.method == Method::one ? "I" : "II") << ", variations [";
    const auto labels = cfg.variations.labels();
    for (std::size_t i = 0; i < labels.size(); ++i) out << (i ? " " : "") << labels[i];
    out << "]\n";
    out << "grid: T=" << cfg.grid.maturity << ", " << cfg.grid.exercise_dates << " exercise dates, "
        << cfg.grid.substeps << " substeps per interval\n";
    out << "free variables: " << nets * arch.parameter_count() << " (" << nets << " x " << arch.parameter_count()
        << ")\n";
    out << "training paths: " << cfg.training_paths << " ("
        << (path_batch_bytes(model, cfg.grid, cfg.training_paths) >> 20) << " MiB)\n";
    out << "evaluation: " << cfg.repeats << " repeat(s) x " << cfg.eval_paths << " paths, "
        << (cfg.eval_mode == EvalMode::forward ? "forward" : "backward") << " mode\n";
    out << "hedging: " << (cfg.hedging ? std::to_string(cfg.hedge_paths) + " paths" : std::string("off")) << "\n";
    out << "seeds (repeat 0): training paths " << run_seed(cfg.master_seed, SeedPurpose::training_paths, 0)
        << ", training " << run_seed(cfg.master_seed, SeedPurpose::training, 0) << ", evaluation "
        << run_seed(cfg.master_seed, SeedPurpose::evaluation, 0) << ", hedging "
        << run_seed(cfg.master_seed, SeedPurpose::hedging, 0) << "\n";
    out << "output: " << cfg.output_dir.string() << "\n";
    out << "resolved config:\n" << to_json(cfg).dump(2) << "\n";
    return out.str();
}

TrainResult train_policy(const RunConfig& cfg, int repeat) {
    const PathModel model(cfg.model);
    const PathBatch paths = simulate(model, cfg.grid, cfg.training_paths,
                                     run_seed(cfg.master_seed, SeedPurpose::training_paths, repeat), cfg.memory_cap);
    const std::uint64_t seed = run_seed(cfg.master_seed, SeedPurpose::training, repeat);
    if (cfg.method == Method::one)
        return train_method_one(paths, model, cfg.payoff, cfg.grid, cfg.network, cfg.train, cfg.variations, seed);
    return train_method_two(paths, model, cfg.payoff, cfg.grid, cfg.network, cfg.train, cfg.alternation,
                            cfg.variations, seed);
}

std::optional<RunOutcome> run_pipeline(RunConfig cfg, const RunOptions& options) {
    if (options.seed) cfg.master_seed = *options.seed;
    if (options.out) cfg.output_dir = *options.out;
    cfg.validate();
    if (options.dry_run) return std::nullopt;

    const PathModel model(cfg.model);
    RunOutcome outcome;
    outcome.directory = cfg.output_dir;
    std::filesystem::create_directories(cfg.output_dir);
    write_text(cfg.output_dir / "run.json", json{{"schema_version", kSchemaVersion}, {"config", to_json(cfg)}}.dump(2) + "\n");

    EvalOptions eval;
    eval.mode = cfg.eval_mode;
    eval.rebalancing = cfg.rebalancing;
    eval.memory_cap = cfg.memory_cap;

    std::vector<BoundsEstimate> runs;
    for (int r = 0; r < cfg.repeats; ++r) {
        log_line(options, "repeat " + std::to_string(r + 1) + "/" + std::to_string(cfg.repeats) + ": training");
        TrainResult trained = [&] {
            try {
                return train_policy(cfg, r);
            } catch (const DivergenceError& e) {
                const json failure{{"schema_version", kSchemaVersion}, {"repeat", r},           {"epoch", e.epoch()},
                                   {"date_index", e.date_index()},      {"message", e.what()}};
                write_text(cfg.output_dir / "failure.json", failure.dump(2) + "\n");
                throw;
            }
        }();
        outcome.parameter_count = trained.policy.parameter_count();
        log_line(options, "  trained in " + fixed(trained.diagnostics.seconds, 1) + " s, in-sample bounds " +
                              fixed(trained.diagnostics.in_sample_lower, 4) + " / " +
                              fixed(trained.diagnostics.in_sample_upper, 4));
        if (r == 0 && cfg.save_policy)
            save_policy(cfg.output_dir / "policy", trained.policy, {model_hash(cfg.model), cfg.variations.labels()});

        const PathEstimates est = evaluate_policy(trained.policy, model, cfg.eval_paths,
                                                  run_seed(cfg.master_seed, SeedPurpose::evaluation, r), eval);
        RepeatOutcome rep{bounds_from(est), variance_check(est), trained.diagnostics};
        log_line(options, "  out-of-sample lower " + fixed(rep.bounds.lower_mean, 4) + " (se " +
                              fixed(rep.bounds.lower_se, 4) + "), upper " + fixed(rep.bounds.upper_mean, 4) + " (se " +
                              fixed(rep.bounds.upper_se, 4) + ")");
        runs.push_back(rep.bounds);
        if (r == 0 && cfg.hedging) {
            outcome.hedge = hedge_report(evaluate_policy(trained.policy, model, cfg.hedge_paths,
                                                         run_seed(cfg.master_seed, SeedPurpose::hedging, r), eval),
                                         rep.bounds.lower_mean, cfg.histogram_bins);
        }
        outcome.repeats.push_back(std::move(rep));
    }
    outcome.bounds = combine_bounds(runs);

    const json bounds = bounds_json(cfg, outcome);
    write_text(cfg.output_dir / "bounds.json", bounds.dump(2) + "\n");
    write_text(cfg.output_dir / "diagnostics.csv", diagnostics_csv(outcome.repeats));
    if (outcome.hedge) {
        write_text(cfg.output_dir / "hedge.json", hedge_json(cfg, *outcome.hedge).dump(2) + "\n");
        write_text(cfg.output_dir / "hedge_hist.csv", histogram_csv(*outcome.hedge));
    }
    write_text(cfg.output_dir / "summary.csv", summary_csv(bounds));
    write_text(cfg.output_dir / "summary.md", render_report(cfg.output_dir));
    return outcome;
}

std::string render_report(const std::filesystem::path& dir) {
    const json b = read_json(dir / "bounds.json");
    auto cell = [&](const char* key) {
        try {
            const json& v = b.at(key);
            return v.is_null() ? std::string("n/a") : v.dump();
        } catch (const json::exception&) {
            throw FormatError("bounds.json lacks field " + std::string(key));
        }
    };
    std::ostringstream out;
    out << "| Method | Variables | Time (s) | LB mean | LB SE | LB SD | UB mean | UB SE | UB SD | Diff mean | Diff SE | Diff SD |\n";
    out << "|---|---|---|---|---|---|---|---|---|---|---|---|\n";
    out << "| " << b.at("method").get<std::string>() << " | " << cell("parameter_count") << " | "
        << fixed(b.at("mean_train_seconds").get<double>(), 1) << " | " << cell("lower_mean") << " | "
        << cell("lower_se") << " | " << cell("lower_sd") << " | " << cell("upper_mean") << " | " << cell("upper_se")
        << " | " << cell("upper_sd") << " | " << cell("gap_mean") << " | " << cell("gap_se") << " | "
        << cell("gap_sd") << " |\n";
    out << "\nSE: Monte Carlo standard error over " << cell("n_eval") << " evaluation paths per repeat. SD: spread across "
        << cell("n_repeats") << " independent repeat(s) of the whole pipeline.\n";
    if (std::filesystem::exists(dir / "hedge.json")) {
        const json h = read_json(dir / "hedge.json");
        out << "\n| Hedging error | mean | SD | 1% | 50% | 99% |\n|---|---|---|---|---|---|\n";
        for (const char* key : {"eps1", "eps2"}) {
            const json& s = h.at(key);
            out << "| " << key << " | " << s.at("mean").dump() << " | " << s.at("sd").dump() << " | "
                << s.at("q01").dump() << " | " << s.at("q50").dump() << " | " << s.at("q99").dump() << " |\n";
        }
        out << "\nV0 = " << h.at("v0").dump() << ", " << h.at("paths").dump() << " paths.\n";
    }
    return out.str();
}

}  // namespace dualstop
