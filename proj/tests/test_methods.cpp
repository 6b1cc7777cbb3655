#include <cmath>

#include <omp.h>

#include "doctest.h"

#include "dualstop/errors.hpp"
#include "dualstop/evaluation.hpp"
#include "dualstop/method_one.hpp"
#include "dualstop/method_two.hpp"
#include "dualstop/oracles.hpp"

using namespace dualstop;

namespace {

GbmSpec put_model() {
    GbmSpec g;
    g.spot = {36.0};
    g.rate = 0.06;
    g.volatility = {0.2};
    return g;
}

NetworkConfig small_nets() {
    NetworkConfig n;
    n.phi_hidden = {16, 16};
    n.psi_hidden = {16, 8};
    return n;
}

TrainConfig quick_training() {
    TrainConfig t;
    t.batch_size = 64;
    t.max_epochs = 8;
    t.patience = 3;
    return t;
}

Variations v145() {
    Variations v;
    v.warm_start = true;
    v.second_order = true;
    v.split_networks = true;
    return v;
}

Variations v45() {
    Variations v;
    v.second_order = true;
    v.split_networks = true;
    return v;
}

bool same_parameters(const Policy& a, const Policy& b) {
    if (a.nets().size() != b.nets().size()) return false;
    for (std::size_t i = 0; i < a.nets().size(); ++i) {
        if (a.nets()[i].phi_net().parameters() != b.nets()[i].phi_net().parameters()) return false;
        if (a.nets()[i].psi_net().parameters() != b.nets()[i].psi_net().parameters()) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("european limit of both methods matches black-scholes") {
    const PathModel model(put_model());
    const TimeGrid grid{1.0, 1, 1};
    const Payoff put{PayoffKind::put, 40.0};
    const PathBatch paths = simulate(model, grid, 20000, 1);
    const double bs = black_scholes_put(36, 40, 0.06, 0.2, 1.0);

    const TrainResult one = train_method_one(paths, model, put, grid, small_nets(), quick_training(), v145(), 2);
    AlternationConfig alt;
    alt.max_updates = 0;
    const TrainResult two =
        train_method_two(paths, model, put, grid, small_nets(), quick_training(), alt, v45(), 3);
    CHECK(two.diagnostics.records.size() == 1);
    for (const Policy* p : {&one.policy, &two.policy}) {
        const BoundsEstimate b = bounds_from(evaluate_policy(*p, model, 20000, 4));
        CHECK(std::abs(b.lower_mean - bs) < 3.0 * b.lower_se);
        CHECK(std::abs(b.upper_mean - bs) < 3.0 * b.upper_se);
        // Without early exercise both summands are the same quantity.
        CHECK(b.gap_mean == doctest::Approx(0.0).epsilon(1e-12));
    }
}

TEST_CASE("a worthless option prices at zero") {
    const PathModel model(put_model());
    const TimeGrid grid{1.0, 5, 1};
    const PathBatch paths = simulate(model, grid, 4000, 5);
    TrainConfig t = quick_training();
    t.max_epochs = 60;
    t.patience = 10;
    const TrainResult r =
        train_method_one(paths, model, {PayoffKind::put, 0.0}, grid, small_nets(), t, v145(), 6);
    const BoundsEstimate b = bounds_from(evaluate_policy(r.policy, model, 4000, 7));
    CHECK(std::abs(b.lower_mean) < 1e-2);
    CHECK(std::abs(b.upper_mean) < 1e-2);
}

TEST_CASE("method one is deterministic and independent of the thread count") {
    const PathModel model(put_model());
    const TimeGrid grid{1.0, 6, 1};
    const Payoff put{PayoffKind::put, 40.0};
    const PathBatch paths = simulate(model, grid, 3000, 8);
    const int saved = omp_get_max_threads();
    omp_set_num_threads(1);
    const TrainResult a = train_method_one(paths, model, put, grid, small_nets(), quick_training(), v145(), 9);
    omp_set_num_threads(4);
    const TrainResult b = train_method_one(paths, model, put, grid, small_nets(), quick_training(), v145(), 9);
    omp_set_num_threads(saved);
    CHECK(same_parameters(a.policy, b.policy));
    CHECK(a.diagnostics.in_sample_lower == b.diagnostics.in_sample_lower);
    REQUIRE(a.diagnostics.records.size() == 6);
    CHECK(a.diagnostics.unit == "date");

    const TrainResult c = train_method_one(paths, model, put, grid, small_nets(), quick_training(), v145(), 10);
    CHECK(!same_parameters(a.policy, c.policy));
}

TEST_CASE("method one learns an early-exercise premium") {
    const PathModel model(put_model());
    const TimeGrid grid{1.0, 10, 1};
    const Payoff put{PayoffKind::put, 40.0};
    const PathBatch paths = simulate(model, grid, 20000, 11);
    TrainConfig t = quick_training();
    t.max_epochs = 30;
    const TrainResult r = train_method_one(paths, model, put, grid, small_nets(), t, v145(), 12);
    const BoundsEstimate b = bounds_from(evaluate_policy(r.policy, model, 20000, 13));
    const double reference = binomial_bermudan_put(36, 40, 0.06, 0.2, 1.0, 10, 5000);
    CHECK(b.lower_mean > black_scholes_put(36, 40, 0.06, 0.2, 1.0) + 0.3);
    CHECK(b.lower_mean < reference + 3.0 * b.lower_se);
    CHECK(b.upper_mean > reference - 3.0 * b.upper_se);
    CHECK(b.gap_mean < 0.1);
}

TEST_CASE("method two alternates and keeps the best strategy") {
    const PathModel model(put_model());
    const TimeGrid grid{1.0, 10, 1};
    const Payoff put{PayoffKind::put, 40.0};
    const PathBatch paths = simulate(model, grid, 5000, 14);
    AlternationConfig alt;
    alt.max_updates = 4;
    const TrainResult a = train_method_two(paths, model, put, grid, small_nets(), quick_training(), alt, v45(), 15);
    const TrainResult b = train_method_two(paths, model, put, grid, small_nets(), quick_training(), alt, v45(), 15);
    CHECK(a.diagnostics.records.size() == 5);
    CHECK(a.diagnostics.unit == "update");
    CHECK(same_parameters(a.policy, b.policy));
    double best = -1e300;
    for (const auto& rec : a.diagnostics.records) best = std::max(best, rec.validation_lower);
    CHECK(a.diagnostics.records[a.diagnostics.best_update].validation_lower == best);
}

TEST_CASE("method two with subsets of dates and fresh batches") {
    const PathModel model(put_model());
    const TimeGrid grid{1.0, 10, 1};
    const Payoff put{PayoffKind::put, 40.0};
    const PathBatch validation = simulate(model, grid, 2000, 16);
    AlternationConfig alt;
    alt.max_updates = 2;
    alt.time_subset = TimeSubsetMode::grid;
    alt.time_subset_size = 5;
    alt.fresh_batches = 2;
    alt.fresh_batch_size = 1000;
    Variations v = v45();
    v.time_subset = true;
    v.fresh_data = true;
    const TrainResult r =
        train_method_two(validation, model, put, grid, small_nets(), quick_training(), alt, v, 17);
    CHECK(r.diagnostics.records.size() == 3);
    CHECK(std::isfinite(r.diagnostics.in_sample_lower));
    CHECK(r.diagnostics.in_sample_upper >= r.diagnostics.in_sample_lower - 0.1);
}

TEST_CASE("illegal variation combinations are rejected") {
    const PathModel model(put_model());
    const TimeGrid grid{1.0, 4, 1};
    const PathBatch paths = simulate(model, grid, 100, 1);
    Variations v;
    v.time_subset = true;
    CHECK_THROWS_AS(train_method_one(paths, model, {PayoffKind::put, 40.0}, grid, small_nets(), quick_training(), v, 1),
                    ConfigError);
    CHECK_THROWS_AS(train_method_two(paths, model, {PayoffKind::put, 40.0}, grid, small_nets(), quick_training(), {},
                                     v145(), 1),
                    ConfigError);
}
