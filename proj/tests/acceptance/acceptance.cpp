// Acceptance checks at desk scale. Each criterion prints one PASS/FAIL line;
// the exit status is nonzero when any selected criterion fails.
#include <omp.h>

#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "CLI11.hpp"

#include "dualstop/config.hpp"
#include "dualstop/evaluation.hpp"
#include "dualstop/method_one.hpp"
#include "dualstop/oracles.hpp"
#include "dualstop/pipeline.hpp"

using namespace dualstop;

namespace {

const std::filesystem::path kConfigs = DUALSTOP_CONFIG_DIR;
const std::filesystem::path kOut = DUALSTOP_ACCEPTANCE_OUT;

// Bermudan-50 put at S0=36, K=40, r=0.06, sigma=0.2, T=1 from a 10^4-step tree.
constexpr double kBermudan50 = 4.4778699708;

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

RunConfig bundled(const std::string& name, bool hedging) {
    RunConfig cfg = load_config(kConfigs / (name + ".json"));
    cfg.output_dir = kOut / name;
    cfg.hedging = hedging;
    return cfg;
}

RunOutcome run(const RunConfig& cfg) {
    RunOptions options;
    options.log = &std::cerr;
    return *run_pipeline(cfg, options);
}

double combined(double a, double b) { return std::sqrt(a * a + b * b); }

// Shared by criteria 1, 4 and 5.
const RunOutcome& bs1d_method_one() {
    static const RunOutcome outcome = run(bundled("bs1d_put_method1", true));
    return outcome;
}

Verdict criterion_1() {
    const auto& b = bs1d_method_one().bounds;
    const double se = combined(b.lower_se, b.upper_se);
    const bool pass = b.lower_mean >= 4.45 && b.lower_mean <= 4.49 && b.upper_mean >= 4.47 &&
                      b.upper_mean <= 4.51 && b.gap_mean <= 0.04 && b.lower_mean <= kBermudan50 + 3 * se &&
                      b.upper_mean >= kBermudan50 - 3 * se;
    return {pass, fmt("1D put, method I: lower %.4f (se %.4f), upper %.4f (se %.4f), gap %.4f, reference %.4f",
                      b.lower_mean, b.lower_se, b.upper_mean, b.upper_se, b.gap_mean, kBermudan50)};
}

Verdict criterion_2() {
    const RunOutcome o = run(bundled("bs1d_put_method2", false));
    const auto& b = o.bounds;
    return {b.gap_mean <= 0.05, fmt("1D put, method II: lower %.4f, upper %.4f, gap %.4f (limit 0.05), %d updates",
                                    b.lower_mean, b.upper_mean, b.gap_mean,
                                    static_cast<int>(o.repeats[0].diagnostics.records.size()))};
}

Verdict criterion_3() {
    const double bs = black_scholes_put(36, 40, 0.06, 0.2, 1.0);
    bool pass = true;
    std::ostringstream detail;
    detail << fmt("european limit vs Black-Scholes %.4f:", bs);
    for (const auto& [label, name] : {std::pair{"I", "bs1d_put_european_method1"},
                                      std::pair{"II", "bs1d_put_european_method2"}}) {
        const auto b = run(bundled(name, false)).bounds;
        pass = pass && std::abs(b.lower_mean - bs) <= 3 * b.lower_se && std::abs(b.upper_mean - bs) <= 3 * b.upper_se;
        detail << fmt(" %s lower %.4f (se %.4f) upper %.4f (se %.4f);", label, b.lower_mean,
                      b.lower_se, b.upper_mean, b.upper_se);
    }
    return {pass, detail.str()};
}

Verdict criterion_4() {
    const auto& v = bs1d_method_one().repeats[0].variance;
    return {v.var_cv < v.var_plain && v.var_plain >= 2.0 * v.var_cv,
            fmt("variance plain %.4f vs control variate %.6f (factor %.0f, need >= 2)", v.var_plain, v.var_cv,
                v.var_plain / v.var_cv)};
}

Verdict criterion_5() {
    const auto& h = *bs1d_method_one().hedge;
    const auto& s = h.eps1_summary;
    return {std::abs(s.mean) <= 3 * s.se && s.sd <= 0.15 * h.v0,
            fmt("hedging error at stop: mean %.5f (se %.5f), sd %.4f vs limit %.4f", s.mean, s.se, s.sd,
                0.15 * h.v0)};
}

Verdict criterion_6() {
    const auto fine = run(bundled("heston_put_method1_m15", false)).bounds;
    const auto coarse = run(bundled("heston_put_method1_m1", false)).bounds;
    const double se = combined(fine.upper_se, coarse.upper_se);
    return {coarse.upper_mean - fine.upper_mean > 2 * se && fine.gap_mean <= 0.02,
            fmt("heston: upper m=1 %.4f, m=15 %.4f (drop %.4f vs 2se %.4f); m=15 lower %.4f gap %.4f", coarse.upper_mean,
                fine.upper_mean, coarse.upper_mean - fine.upper_mean, 2 * se, fine.lower_mean, fine.gap_mean)};
}

// 5D max-call at reduced scale.
RunConfig basket(const std::string& tag, int substeps, bool split, int repeats) {
    RunConfig cfg = bundled("maxcall5d_method1", false);
    cfg.output_dir = kOut / ("maxcall5d_" + tag);
    cfg.grid.substeps = substeps;
    cfg.variations.substeps = substeps > 1;
    cfg.variations.split_networks = split;
    cfg.training_paths = 20000;
    cfg.eval_paths = 20000;
    cfg.repeats = repeats;
    cfg.save_policy = false;
    return cfg;
}

Verdict criterion_7() {
    constexpr int kSubsteps = 8;
    const RunOutcome split = run(basket("split", kSubsteps, true, 5));
    const RunOutcome shared = run(basket("shared", kSubsteps, false, 5));
    const RunOutcome coarse = run(basket("coarse", 1, true, 1));
    const auto& s0 = split.repeats[0].bounds;
    const auto& c0 = coarse.repeats[0].bounds;

    bool bracket = true;
    for (const auto& r : split.repeats) bracket = bracket && r.bounds.lower_mean <= r.bounds.upper_mean + 2 * r.bounds.gap_se;
    const double se = combined(s0.upper_se, c0.upper_se);
    const bool monotone = c0.upper_mean - s0.upper_mean > 2 * se;
    const bool v5 = split.bounds.gap_mean <= shared.bounds.gap_mean;
    return {bracket && monotone && v5,
            fmt("5D max-call K=40: bracketing %s; upper m=1 %.4f vs m=%d %.4f (2se %.4f) %s; mean gap split %.4f vs "
                "shared %.4f %s",
                bracket ? "ok" : "violated", c0.upper_mean, kSubsteps, s0.upper_mean, 2 * se, monotone ? "ok" : "no",
                split.bounds.gap_mean, shared.bounds.gap_mean, v5 ? "ok" : "no")};
}

// Unit-level checks repeated end to end.
double fd_worst(RegressionNets& nets, const RegressionData& batch) {
    NetGradients g;
    loss_and_grads(nets, batch, &g);
    double worst = 0.0;
    auto sweep = [&](Eigen::VectorXd& p, const Eigen::VectorXd& grad) {
        for (Eigen::Index k = 0; k < p.size(); ++k) {
            const double saved = p[k];
            p[k] = saved + 1e-5;
            const double up = loss_and_grads(nets, batch, nullptr);
            p[k] = saved - 1e-5;
            const double down = loss_and_grads(nets, batch, nullptr);
            p[k] = saved;
            const double fd = (up - down) / 2e-5;
            worst = std::max(worst, std::abs(fd - grad[k]) / std::max({std::abs(fd), std::abs(grad[k]), 1e-4}));
        }
    };
    sweep(nets.phi_net().parameters(), g.phi);
    if (!nets.architecture().shared) sweep(nets.psi_net().parameters(), g.psi);
    return worst;
}

Verdict criterion_8() {
    // Finite differences.
    double fd = 0.0;
    for (int variant = 0; variant < 3; ++variant) {
        NetArchitecture a;
        a.input_dim = 2;
        a.brownian_dim = 2;
        a.shared = variant == 2;
        a.second_order = variant > 0;
        a.phi_hidden = {10, 8};
        if (!a.shared) a.psi_hidden = {9, 7};
        RegressionNets nets(a, 100 + variant);
        RegressionData d;
        d.substeps = 2;
        d.step = 0.05;
        PathRng rng(7, variant);
        d.inputs.resize(2, 64);
        d.dw.resize(2, 64);
        d.target.resize(32);
        for (Eigen::Index i = 0; i < d.inputs.size(); ++i) d.inputs.data()[i] = rng.normal();
        for (Eigen::Index i = 0; i < d.dw.size(); ++i) d.dw.data()[i] = std::sqrt(d.step) * rng.normal();
        for (Eigen::Index i = 0; i < d.target.size(); ++i) d.target[i] = rng.normal();
        fd = std::max(fd, fd_worst(nets, d));
    }

    // ADAM on a scalar convex problem.
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(1);
    AdamState st;
    for (int i = 0; i < 200; ++i) adam_step(theta, 2.0 * (theta.array() - 3.0).matrix(), st, 0.1);
    const double adam_err = std::abs(theta[0] - 3.0);

    // A small trained policy: forward vs backward and thread-count reproducibility.
    GbmSpec g;
    g.spot = {36.0};
    g.rate = 0.06;
    g.volatility = {0.2};
    const PathModel model(g);
    const TimeGrid grid{1.0, 10, 2};
    const Payoff put{PayoffKind::put, 40.0};
    Variations v;
    v.warm_start = v.second_order = v.split_networks = v.substeps = true;
    NetworkConfig net;
    net.phi_hidden = {20, 20};
    net.psi_hidden = {20, 10};
    TrainConfig tc;
    tc.max_epochs = 5;
    const int saved = omp_get_max_threads();
    omp_set_num_threads(1);
    const PathBatch p1 = simulate(model, grid, 5000, 3);
    const TrainResult t1 = train_method_one(p1, model, put, grid, net, tc, v, 4);
    const PathEstimates e1 = evaluate_policy(t1.policy, model, 20000, 5);
    omp_set_num_threads(std::max(4, saved));
    const PathBatch p4 = simulate(model, grid, 5000, 3);
    const TrainResult t4 = train_method_one(p4, model, put, grid, net, tc, v, 4);
    const PathEstimates e4 = evaluate_policy(t4.policy, model, 20000, 5);
    EvalOptions backward;
    backward.mode = EvalMode::backward;
    const PathEstimates eb = evaluate_policy(t1.policy, model, 20000, 5, backward);
    omp_set_num_threads(saved);

    bool identical = p1.states == p4.states && e1.lower == e4.lower && e1.upper == e4.upper;
    for (std::size_t i = 0; i < t1.policy.nets().size(); ++i)
        identical = identical && t1.policy.nets()[i].phi_net().parameters() == t4.policy.nets()[i].phi_net().parameters();
    const double fb = std::max((e1.lower - eb.lower).cwiseAbs().maxCoeff(), (e1.upper - eb.upper).cwiseAbs().maxCoeff());
    return {fd <= 1e-5 && adam_err <= 1e-2 && fb <= 1e-10 && identical,
            fmt("gradient rel err %.2e, adam |theta-3| %.2e, forward/backward max diff %.2e, threads 1 vs %d %s", fd,
                adam_err, fb, std::max(4, saved), identical ? "bit-identical" : "differ")};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria"};
    std::vector<int> selected{1, 2, 3, 4, 5, 6, 7, 8};
    app.add_option("--criteria", selected, "Criteria to run")->delimiter(',');
    CLI11_PARSE(app, argc, argv);

    const std::map<int, std::function<Verdict()>> criteria{
        {1, criterion_1}, {2, criterion_2}, {3, criterion_3}, {4, criterion_4},
        {5, criterion_5}, {6, criterion_6}, {7, criterion_7}, {8, criterion_8}};
    int failures = 0;
    for (int c : std::set<int>(selected.begin(), selected.end())) {
        Verdict v;
        try {
            v = criteria.at(c)();
        } catch (const std::exception& e) {
            v = {false, std::string("error: ") + e.what()};
        }
        std::printf("%s criterion %d: %s\n", v.pass ? "PASS" : "FAIL", c, v.detail.c_str());
        std::fflush(stdout);
        failures += !v.pass;
    }
    return failures == 0 ? 0 : 1;
}
