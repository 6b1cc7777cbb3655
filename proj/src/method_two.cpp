#include "dualstop/method_two.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "dualstop/errors.hpp"

namespace dualstop {

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// Pooled (path, date) samples; sample s belongs to date date_of[s] and to
// row row_of[s] of the path list it was built from.
struct Pool {
    RegressionData data;
    std::vector<int> date_of;
    std::vector<std::size_t> row_of;
};

Pool build_pool(const TimeGrid& grid, const PathBatch& batch, std::span<const std::size_t> paths,
                const std::vector<int>& dates) {
    Pool pool;
    const int m = grid.substeps;
    const auto per_date = static_cast<Eigen::Index>(paths.size());
    const auto samples = per_date * static_cast<Eigen::Index>(dates.size());
    auto& d = pool.data;
    d.inputs.resize(batch.state_dim + 1, samples * m);
    d.dw.resize(batch.brownian_dim, samples * m);
    d.target = Eigen::VectorXd::Zero(samples);
    d.substeps = m;
    d.step = grid.step_size();
    d.group.reserve(static_cast<std::size_t>(samples));
    for (std::size_t j = 0; j < dates.size(); ++j) {
        const IntervalSlice slice = interval_slice(batch, grid, dates[j], paths);
        const Eigen::Index offset = static_cast<Eigen::Index>(j) * per_date * m;
        d.inputs.middleCols(offset, per_date * m) = make_inputs(PolicyKind::global, grid, dates[j], slice.states);
        d.dw.middleCols(offset, per_date * m) = slice.dw;
        for (std::size_t k = 0; k < paths.size(); ++k) {
            pool.date_of.push_back(dates[j]);
            pool.row_of.push_back(k);
            d.group.push_back(paths[k]);
        }
    }
    return pool;
}

// target = disc * Y_{i+1} on each sample.
void set_targets(Pool& pool, const Eigen::MatrixXd& y, double disc) {
    for (std::size_t s = 0; s < pool.date_of.size(); ++s)
        pool.data.target[static_cast<Eigen::Index>(s)] =
            disc * y(static_cast<Eigen::Index>(pool.row_of[s]), pool.date_of[s] + 1);
}

// Value process when every path is held to maturity.
Eigen::MatrixXd hold_to_maturity(const TimeGrid& grid, const PathBatch& batch, const Payoff& payoff, double rate,
                                 std::span<const std::size_t> paths) {
    const int n = grid.exercise_dates;
    const Eigen::VectorXd terminal = payoff_at(batch, grid, payoff, n, paths);
    Eigen::MatrixXd y(terminal.size(), n + 1);
    for (int j = 0; j <= n; ++j) y.col(j) = discount(rate, grid.maturity - grid.exercise_time(j)) * terminal;
    return y;
}

std::vector<std::size_t> iota_paths(std::size_t n) {
    std::vector<std::size_t> v(n);
    std::iota(v.begin(), v.end(), 0);
    return v;
}

}  // namespace

void AlternationConfig::validate(int exercise_dates) const {
    if (epochs_per_update < 1) throw ConfigError("method.alternation.epochs_per_update must be >= 1");
    if (stagnation_patience < 1) throw ConfigError("method.alternation.stagnation_patience must be >= 1");
    if (max_updates < 0) throw ConfigError("method.alternation.max_updates must be >= 0");
    if (time_subset != TimeSubsetMode::all && (time_subset_size < 1 || time_subset_size > exercise_dates))
        throw ConfigError("method.alternation.time_subset_size must lie in [1, exercise_dates]");
    if (fresh_batches < 1) throw ConfigError("method.alternation.fresh_batches must be >= 1");
    if (fresh_batch_size < 2) throw ConfigError("method.alternation.fresh_batch_size must be >= 2");
}

std::vector<int> select_training_times(int n, TimeSubsetMode mode, int k, std::uint64_t seed) {
    if (n < 1) throw ConfigError("select_training_times: n must be >= 1");
    std::vector<int> dates;
    if (mode == TimeSubsetMode::all) {
        dates.resize(n);
        std::iota(dates.begin(), dates.end(), 0);
        return dates;
    }
    if (k < 1 || k > n) throw ConfigError("select_training_times: k must lie in [1, n]");
    if (mode == TimeSubsetMode::grid) {
        const int stride = (n + k - 1) / k;
        for (int i = n - 1; i >= 0 && static_cast<int>(dates.size()) < k; i -= stride) dates.push_back(i);
    } else {
        std::vector<int> all(n);
        std::iota(all.begin(), all.end(), 0);
        std::mt19937_64 rng(seed);
        std::shuffle(all.begin(), all.end(), rng);
        dates.assign(all.begin(), all.begin() + k);
    }
    std::sort(dates.begin(), dates.end());
    return dates;
}

FreshPathSource::FreshPathSource(const PathModel& model, TimeGrid grid, std::uint64_t seed, std::size_t memory_cap)
    : model_(&model), grid_(grid), seed_(seed), memory_cap_(memory_cap) {}

PathBatch FreshPathSource::next(std::size_t paths) {
    return simulate(*model_, grid_, paths, derive_seed(seed_, 0, drawn_++), memory_cap_);
}

void refresh_training_data(FreshPathSource& source, int batches, std::size_t batch_size,
                           const std::function<void(const PathBatch&)>& consume) {
    for (int b = 0; b < batches; ++b) {
        const PathBatch batch = source.next(batch_size);
        consume(batch);
    }
}

TrainResult train_method_two(const PathBatch& paths, const PathModel& model, const Payoff& payoff,
                             const TimeGrid& grid, const NetworkConfig& net, const TrainConfig& train_cfg,
                             const AlternationConfig& alt, const Variations& variations, std::uint64_t seed) {
    const auto started = std::chrono::steady_clock::now();
    grid.validate();
    train_cfg.validate();
    alt.validate(grid.exercise_dates);
    check_variations(PolicyKind::global, grid, variations);
    payoff.check_dimension(model.asset_dim());
    if (paths.steps != grid.total_steps() || paths.state_dim != model.state_dim() ||
        paths.brownian_dim != model.brownian_dim())
        throw ConfigError("method two: paths do not match the model and grid");
    if (paths.paths < 2) throw ConfigError("method two: at least two paths required");

    const int n = grid.exercise_dates;
    const double rate = model.rate();
    const double disc = discount(rate, grid.exercise_interval());
    const bool fresh = variations.fresh_data;

    std::vector<int> dates;
    if (variations.time_subset) {
        dates = select_training_times(n, alt.time_subset, alt.time_subset_size, derive_seed(seed, 6));
        // The first martingale increment needs psi at t_0.
        if (dates.front() != 0) dates.insert(dates.begin(), 0);
    } else {
        dates = select_training_times(n, TimeSubsetMode::all, n, 0);
    }

    PathSplit split;
    if (fresh) split.validation = iota_paths(paths.paths);
    else split = split_paths(paths.paths, train_cfg.validation_fraction, derive_seed(seed, 1));

    const NetArchitecture arch = make_architecture(PolicyKind::global, model.state_dim(), model.brownian_dim(),
                                                   variations, net.phi_hidden, net.psi_hidden);
    RegressionNets nets(arch, derive_seed(seed, 2));

    Pool train_pool;
    if (!fresh) {
        train_pool = build_pool(grid, paths, split.train, dates);
        set_targets(train_pool, hold_to_maturity(grid, paths, payoff, rate, split.train), disc);
        nets.scaling() = pooled_scaling(PolicyKind::global, grid, paths, split.train, dates, train_pool.data.target);
    }
    Pool val_pool = build_pool(grid, paths, split.validation, dates);
    set_targets(val_pool, hold_to_maturity(grid, paths, payoff, rate, split.validation), disc);
    if (fresh)
        nets.scaling() = pooled_scaling(PolicyKind::global, grid, paths, split.validation, dates, val_pool.data.target);

    auto make_policy = [&](const RegressionNets& current) {
        return Policy(PolicyKind::global, grid, payoff, rate, model.state_dim(), model.asset_dim(),
                      model.brownian_dim(), {current});
    };

    RegressionTrainer trainer(nets, train_cfg);
    FreshPathSource source(model, grid, derive_seed(seed, 5));
    TrainDiagnostics diag;
    diag.unit = "update";
    RegressionNets best = nets;
    double best_lower = -std::numeric_limits<double>::infinity();
    double best_loss = std::numeric_limits<double>::infinity();
    int stall = 0;
    int epoch_counter = 0;
    double lr = train_cfg.learning_rate;
    bool have_strategy = false;
    Policy strategy;

    auto run_epoch = [&](const RegressionData& data, int update) {
        const double loss = trainer.run_epoch(data, derive_seed(seed, 7, static_cast<std::uint64_t>(epoch_counter++)), lr);
        if (!std::isfinite(loss))
            throw DivergenceError("method two: non-finite loss in update " + std::to_string(update), epoch_counter);
        return loss;
    };

    for (int update = 0;; ++update) {
        const auto round_start = std::chrono::steady_clock::now();
        double train_loss = 0.0;
        for (int e = 0; e < alt.epochs_per_update; ++e) {
            if (!fresh) {
                train_loss = run_epoch(train_pool.data, update);
            } else {
                double total = 0.0;
                refresh_training_data(source, alt.fresh_batches, alt.fresh_batch_size, [&](const PathBatch& batch) {
                    const auto rows = iota_paths(batch.paths);
                    Pool pool = build_pool(grid, batch, rows, dates);
                    const Eigen::MatrixXd y = have_strategy ? roll_back(strategy, batch, rows, false).y
                                                            : hold_to_maturity(grid, batch, payoff, rate, rows);
                    set_targets(pool, y, disc);
                    total += run_epoch(pool.data, update);
                });
                train_loss = total / alt.fresh_batches;
            }
            lr *= train_cfg.lr_decay;
        }
        const double val_loss = regression_loss(nets, val_pool.data);
        if (!std::isfinite(val_loss))
            throw DivergenceError("method two: non-finite validation loss in update " + std::to_string(update),
                                  epoch_counter);

        // Strategy update: recompute the value processes with the current network.
        strategy = make_policy(nets);
        have_strategy = true;
        const ValueProcesses val_values = roll_back(strategy, paths, split.validation, alt.track_upper);
        const double val_lower = val_values.y.col(0).mean();
        if (!std::isfinite(val_lower))
            throw DivergenceError("method two: non-finite strategy in update " + std::to_string(update), epoch_counter);
        set_targets(val_pool, val_values.y, disc);

        TrainRecord rec;
        rec.index = update;
        rec.epochs = alt.epochs_per_update;
        rec.train_loss = train_loss;
        rec.validation_loss = val_loss;
        rec.validation_lower = val_lower;
        if (val_lower > best_lower) {
            best_lower = val_lower;
            best = nets;
            diag.best_update = update;
        }
        diag.total_epochs += alt.epochs_per_update;

        bool stop = update >= alt.max_updates;
        if (val_loss < best_loss) {
            best_loss = val_loss;
            stall = 0;
        } else if (++stall >= alt.stagnation_patience) {
            stop = true;
        }
        if (!stop && !fresh) set_targets(train_pool, roll_back(strategy, paths, split.train, false).y, disc);
        rec.seconds = seconds_since(round_start);
        diag.records.push_back(rec);
        if (stop) break;
    }

    Policy policy = make_policy(best);
    const auto everyone = iota_paths(paths.paths);
    const ValueProcesses in_sample = roll_back(policy, paths, everyone, true);
    diag.in_sample_lower = in_sample.y.col(0).mean();
    diag.in_sample_upper = in_sample.x.col(0).mean();
    diag.seconds = seconds_since(started);
    return {std::move(policy), diag};
}

}  // namespace dualstop
