#include <cmath>
#include <limits>
#include <numeric>

#include <omp.h>

#include "doctest.h"

#include "dualstop/evaluation.hpp"
#include "dualstop/method_two.hpp"
#include "dualstop/policy.hpp"

using namespace dualstop;

namespace {

constexpr double kHuge = 1e300;

GbmSpec put_model(double sigma) {
    GbmSpec g;
    g.spot = {36.0};
    g.rate = 0.06;
    g.volatility = {sigma};
    return g;
}

HestonSpec heston_model() {
    HestonSpec h;
    h.spot = 100.0;
    h.initial_variance = 0.01;
    h.rate = 0.1;
    h.mean_reversion = 2.0;
    h.long_term_vol = 0.1;
    h.vol_of_vol = 0.2;
    h.correlation = -0.3;
    return h;
}

// Constant continuation value and zero martingale.
Policy constant_policy(const PathModel& model, TimeGrid grid, Payoff payoff, double continuation) {
    const NetArchitecture arch =
        make_architecture(PolicyKind::per_date, model.state_dim(), model.brownian_dim(), {}, {4}, {4});
    std::vector<RegressionNets> nets;
    for (int i = 0; i < grid.exercise_dates; ++i) {
        RegressionNets net(arch, static_cast<std::uint64_t>(i));
        net.phi_net().parameters().setZero();
        net.scaling().phi_shift = continuation;
        nets.push_back(net);
    }
    return Policy(PolicyKind::per_date, grid, payoff, model.rate(), model.state_dim(), model.asset_dim(),
                  model.brownian_dim(), nets);
}

// Random networks with nonzero biases and increment heads of realistic size.
Policy random_policy(const PathModel& model, TimeGrid grid, Payoff payoff, PolicyKind kind, Variations v,
                     double level) {
    const NetArchitecture arch =
        make_architecture(kind, model.state_dim(), model.brownian_dim(), v, {12, 12}, {10, 8});
    const int count = kind == PolicyKind::global ? 1 : grid.exercise_dates;
    std::vector<RegressionNets> nets;
    for (int i = 0; i < count; ++i) {
        RegressionNets net(arch, 100 + static_cast<std::uint64_t>(i));
        PathRng rng(200 + i, 0);
        for (auto* mlp : {&net.phi_net(), &net.psi_net()})
            for (Eigen::Index k = 0; k < mlp->parameters().size(); ++k) mlp->parameters()[k] = 0.3 * rng.normal();
        auto& s = net.scaling();
        s.input_mean = Eigen::VectorXd::Zero(arch.input_dim);
        s.input_mean.tail(model.state_dim())[0] = level;
        s.input_scale = Eigen::VectorXd::Constant(arch.input_dim, 0.1 * level);
        s.input_scale[0] = 0.1 * level;
        s.phi_shift = 0.1 * level;
        s.phi_scale = 0.05 * level;
        s.psi_scale = 0.5;
        s.psi2_scale = 0.5;
        nets.push_back(net);
    }
    return Policy(kind, grid, payoff, model.rate(), model.state_dim(), model.asset_dim(), model.brownian_dim(),
                  nets);
}

}  // namespace

TEST_CASE("lower-bound update rule") {
    Eigen::VectorXd f(3), phi(3), cont(3);
    f << 5, 0, 2;
    phi << 4, 1, 3;
    cont << 4.2, 1.0, 2.5;
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(3);
    const Eigen::VectorXd y = y_update(cont, phi, zero, f, 1.0);
    CHECK(y == (Eigen::VectorXd(3) << 5, 1.0, 2.5).finished());

    Eigen::VectorXd y_next(3), inc(3);
    y_next << 1, 2, 3;
    inc << 0.1, -0.2, 0.3;
    const Eigen::VectorXd never = Eigen::VectorXd::Constant(3, kHuge);
    CHECK(y_update(y_next, never, inc, f, 0.9) == (0.9 * y_next - inc));
    const Eigen::VectorXd always = Eigen::VectorXd::Constant(3, -kHuge);
    Eigen::VectorXd positive(3);
    positive << 1, 2, 3;
    CHECK(y_update(y_next, always, inc, positive, 0.9) == positive);
}

TEST_CASE("upper-bound update rule") {
    Eigen::VectorXd f(3), cont(3);
    f << 5, 0, 2;
    cont << 4.2, 1.0, 2.5;
    CHECK(x_update(cont, Eigen::VectorXd::Zero(3), f, 1.0) == (Eigen::VectorXd(3) << 5, 1.0, 2.5).finished());
    Eigen::VectorXd x_next(3), inc(3);
    x_next << 1, 2, 3;
    inc << 0.1, -0.2, 0.3;
    CHECK(x_update(x_next, inc, Eigen::VectorXd::Zero(3), 0.95) == (0.95 * x_next - inc));
}

TEST_CASE("without a martingale and discounting the upper process is the running maximum") {
    GbmSpec g = put_model(0.3);
    g.rate = 0.0;
    const PathModel model(g);
    const TimeGrid grid{1.0, 8, 1};
    const Payoff put{PayoffKind::put, 40.0};
    const PathBatch batch = simulate(model, grid, 200, 3);
    const Policy policy = constant_policy(model, grid, put, 0.0);
    const ValueProcesses v = roll_back(policy, batch, {}, true);
    for (std::size_t p = 0; p < batch.paths; ++p) {
        double running = 0.0;
        for (int i = grid.exercise_dates; i >= 1; --i) {
            running = std::max(running, put(batch.state(p, i)));
            CHECK(v.x(static_cast<Eigen::Index>(p), i) == running);
        }
    }
}

TEST_CASE("deterministic deep in-the-money put is exercised at the first date") {
    const PathModel model(put_model(0.0));
    const TimeGrid grid{1.0, 10, 1};
    const Payoff put{PayoffKind::put, 60.0};
    const Policy policy = constant_policy(model, grid, put, -kHuge);
    const BoundsEstimate b = bounds_from(evaluate_policy(policy, model, 64, 1));
    const double dt = 0.1;
    const double exact = std::exp(-0.06 * dt) * (60.0 - 36.0 * std::exp(0.06 * dt));
    CHECK(b.lower_mean == doctest::Approx(exact).epsilon(1e-13));
    CHECK(b.upper_mean == doctest::Approx(exact).epsilon(1e-13));
    CHECK(b.lower_se < 1e-12);
    CHECK(b.upper_se < 1e-12);
}

TEST_CASE("never exercising stops every path at maturity") {
    const PathModel model(put_model(0.2));
    const TimeGrid grid{1.0, 5, 2};
    const Payoff put{PayoffKind::put, 40.0};
    const Policy policy = random_policy(model, grid, put, PolicyKind::per_date, {}, 36.0);
    Policy never = policy;
    for (auto& n : never.nets()) {
        n.scaling().phi_shift = kHuge;
        n.scaling().phi_scale = 1.0;
    }
    const PathEstimates e = evaluate_policy(never, model, 300, 4);
    const PathBatch batch = simulate(model, grid, 300, 4);
    for (std::size_t p = 0; p < 300; ++p) {
        CHECK(e.stop_date[p] == grid.exercise_dates);
        double cv = 0.0;
        for (int i = 0; i < grid.exercise_dates; ++i) {
            const std::size_t one[] = {p};
            cv += discount(0.06, grid.exercise_time(i)) *
                  evaluate_interval(never, i, interval_slice(batch, grid, i, one)).increment[0];
        }
        const double terminal = std::exp(-0.06) * put(batch.state(p, grid.total_steps()));
        CHECK(e.lower[static_cast<Eigen::Index>(p)] == doctest::Approx(terminal - cv).epsilon(1e-12));
    }
}

TEST_CASE("forward and backward evaluation agree path by path") {
    struct Case {
        const char* name;
        ModelSpec spec;
        TimeGrid grid;
        Payoff payoff;
        PolicyKind kind;
        Variations v;
        double level;
    };
    Variations v45;
    v45.second_order = true;
    v45.split_networks = true;
    Variations v46;
    v46.second_order = true;
    v46.substeps = true;
    GbmSpec basket;
    basket.spot = {36, 36, 36};
    basket.rate = 0.05;
    basket.dividend = {0.1, 0.1, 0.1};
    basket.volatility = {0.2, 0.2, 0.2};
    const Case cases[] = {
        {"gbm per-date", put_model(0.2), {1.0, 10, 1}, {PayoffKind::put, 40.0}, PolicyKind::per_date, v45, 36.0},
        {"gbm global substeps", put_model(0.2), {1.0, 6, 3}, {PayoffKind::put, 40.0}, PolicyKind::global, v46, 36.0},
        {"heston substeps", heston_model(), {1.0, 5, 4}, {PayoffKind::put, 100.0}, PolicyKind::per_date, v46, 100.0},
        {"basket", basket, {3.0, 9, 1}, {PayoffKind::max_call, 40.0}, PolicyKind::global, v45, 36.0},
    };
    for (const auto& c : cases) {
        CAPTURE(c.name);
        const PathModel model(c.spec);
        const Policy policy = random_policy(model, c.grid, c.payoff, c.kind, c.v, c.level);
        EvalOptions fwd, bwd;
        fwd.block_paths = bwd.block_paths = 700;
        bwd.mode = EvalMode::backward;
        const PathEstimates a = evaluate_policy(policy, model, 2000, 31, fwd);
        const PathEstimates b = evaluate_policy(policy, model, 2000, 31, bwd);
        CHECK((a.lower - b.lower).cwiseAbs().maxCoeff() <= 1e-10);
        CHECK((a.upper - b.upper).cwiseAbs().maxCoeff() <= 1e-10);
        CHECK((a.gain_at_stop - b.gain_at_stop).cwiseAbs().maxCoeff() <= 1e-10);
        CHECK((a.worst - b.worst).cwiseAbs().maxCoeff() <= 1e-10);
        CHECK(a.stop_date == b.stop_date);
        std::size_t early = 0;
        for (int s : a.stop_date) early += s < c.grid.exercise_dates;
        CHECK(early > 0);
    }
}

TEST_CASE("evaluation is bit-identical across thread counts and block sizes") {
    const PathModel model(heston_model());
    const TimeGrid grid{1.0, 5, 3};
    Variations v;
    v.substeps = true;
    const Policy policy = random_policy(model, grid, {PayoffKind::put, 100.0}, PolicyKind::per_date, v, 100.0);
    EvalOptions small;
    small.block_paths = 333;
    const int saved = omp_get_max_threads();
    omp_set_num_threads(1);
    const PathEstimates one = evaluate_policy(policy, model, 3000, 8, small);
    omp_set_num_threads(4);
    const PathEstimates four = evaluate_policy(policy, model, 3000, 8, small);
    omp_set_num_threads(saved);
    CHECK(one.lower == four.lower);
    CHECK(one.upper == four.upper);
    CHECK(one.worst == four.worst);
}

TEST_CASE("control variate variance properties") {
    const TimeGrid grid{1.0, 10, 1};
    const Payoff put{PayoffKind::put, 40.0};
    SUBCASE("a zero martingale leaves the variance unchanged") {
        const PathModel model(put_model(0.2));
        const VarianceCheck vc = variance_check(constant_policy(model, grid, put, 3.0), model, 5000, 2);
        CHECK(vc.var_plain == vc.var_cv);
    }
    SUBCASE("a deterministic model has no variance") {
        const PathModel model(put_model(0.0));
        const VarianceCheck vc = variance_check(constant_policy(model, grid, put, 3.0), model, 100, 2);
        CHECK(vc.var_plain < 1e-20);
        CHECK(vc.var_cv < 1e-20);
    }
}

TEST_CASE("hedging error properties") {
    const TimeGrid grid{1.0, 10, 1};
    const Payoff put{PayoffKind::put, 40.0};
    SUBCASE("no hedge and no capital lose the discounted payoff") {
        const PathModel model(put_model(0.2));
        const PathEstimates e = evaluate_policy(constant_policy(model, grid, put, 3.0), model, 4000, 6);
        const HedgeReport r = hedge_report(e, 0.0, 25);
        CHECK(r.eps1 == -e.plain);
        std::size_t c1 = 0, c2 = 0;
        for (auto c : r.eps1_counts) c1 += c;
        for (auto c : r.eps2_counts) c2 += c;
        CHECK(c1 == 4000);
        CHECK(c2 == 4000);
        CHECK(r.bin_edges.size() == 26);
    }
    SUBCASE("deterministic model gives a constant error") {
        const PathModel model(put_model(0.0));
        const HedgeReport r = hedging_errors(constant_policy(model, grid, put, 3.0), model, 50, 6, 2.0);
        CHECK(r.eps1_summary.sd == 0.0);
        // Exercised at the first date, t = 0.1.
        CHECK(r.eps1[0] == doctest::Approx(2.0 - std::exp(-0.006) * (40.0 - 36.0 * std::exp(0.006))).epsilon(1e-13));
    }
    SUBCASE("worst error never exceeds the error at the stopping date") {
        const PathModel model(put_model(0.2));
        const Policy policy = random_policy(model, grid, put, PolicyKind::per_date, {}, 36.0);
        const HedgeReport r = hedging_errors(policy, model, 3000, 7, 4.4);
        CHECK((r.eps2 - r.eps1).maxCoeff() <= 1e-12);
    }
}

TEST_CASE("training date selection") {
    std::vector<int> all(7);
    std::iota(all.begin(), all.end(), 0);
    CHECK(select_training_times(7, TimeSubsetMode::all, 0, 1) == all);
    std::vector<int> odd;
    for (int i = 1; i < 50; i += 2) odd.push_back(i);
    CHECK(select_training_times(50, TimeSubsetMode::grid, 25, 1) == odd);
    const auto r1 = select_training_times(50, TimeSubsetMode::random, 10, 3);
    CHECK(r1 == select_training_times(50, TimeSubsetMode::random, 10, 3));
    CHECK(r1.size() == 10);
    CHECK(std::adjacent_find(r1.begin(), r1.end()) == r1.end());
    CHECK(std::is_sorted(r1.begin(), r1.end()));
}

TEST_CASE("fresh batches from a deterministic model are identical") {
    const PathModel model(put_model(0.0));
    FreshPathSource source(model, TimeGrid{1.0, 4, 1}, 9);
    const PathBatch a = source.next(10), b = source.next(10);
    CHECK(a.states == b.states);
    CHECK(source.batches_drawn() == 2);
}
