#include "dualstop/method_one.hpp"

#include <chrono>
#include <limits>
#include <numeric>

#include "dualstop/errors.hpp"

namespace dualstop {

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

TrainResult train_method_one(const PathBatch& paths, const PathModel& model, const Payoff& payoff,
                             const TimeGrid& grid, const NetworkConfig& net, const TrainConfig& train_cfg,
                             const Variations& variations, std::uint64_t seed) {
    const auto started = std::chrono::steady_clock::now();
    grid.validate();
    train_cfg.validate();
    check_variations(PolicyKind::per_date, grid, variations);
    payoff.check_dimension(model.asset_dim());
    if (paths.steps != grid.total_steps() || paths.state_dim != model.state_dim() ||
        paths.brownian_dim != model.brownian_dim())
        throw ConfigError("method one: paths do not match the model and grid");
    if (paths.paths < 2) throw ConfigError("method one: at least two paths required");

    const int n = grid.exercise_dates;
    const double disc = discount(model.rate(), grid.exercise_interval());
    const PathSplit split = split_paths(paths.paths, train_cfg.validation_fraction, derive_seed(seed, 1));
    std::vector<std::size_t> every(paths.paths);
    std::iota(every.begin(), every.end(), 0);

    const NetArchitecture arch = make_architecture(PolicyKind::per_date, model.state_dim(), model.brownian_dim(),
                                                   variations, net.phi_hidden, net.psi_hidden);

    Eigen::VectorXd y = payoff_at(paths, grid, payoff, n);
    Eigen::VectorXd x = y;

    std::vector<int> dates(n);
    std::iota(dates.begin(), dates.end(), 0);
    Eigen::VectorXd first_target(static_cast<Eigen::Index>(split.train.size()));
    for (std::size_t k = 0; k < split.train.size(); ++k)
        first_target[static_cast<Eigen::Index>(k)] = disc * y[static_cast<Eigen::Index>(split.train[k])];
    const Scaling scaling = pooled_scaling(PolicyKind::per_date, grid, paths, split.train, dates, first_target);

    std::vector<RegressionNets> nets(n);
    TrainDiagnostics diag;
    diag.unit = "date";
    const Eigen::VectorXd never = Eigen::VectorXd::Constant(y.size(), std::numeric_limits<double>::infinity());
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(y.size());

    auto gather = [&](const std::vector<std::size_t>& rows) {
        Eigen::VectorXd t(static_cast<Eigen::Index>(rows.size()));
        for (std::size_t k = 0; k < rows.size(); ++k) t[static_cast<Eigen::Index>(k)] = disc * y[static_cast<Eigen::Index>(rows[k])];
        return t;
    };

    for (int i = n - 1; i >= 0; --i) {
        const auto step_start = std::chrono::steady_clock::now();
        if (variations.warm_start && i < n - 1) {
            nets[i] = warm_start_from(nets[i + 1], arch);
        } else {
            nets[i] = RegressionNets(arch, derive_seed(seed, 2, static_cast<std::uint64_t>(i)));
            nets[i].scaling() = scaling;
        }
        const RegressionData train_data =
            interval_data(PolicyKind::per_date, grid, paths, i, split.train, gather(split.train));
        const RegressionData val_data =
            interval_data(PolicyKind::per_date, grid, paths, i, split.validation, gather(split.validation));
        TrainHistory history;
        try {
            history = train(nets[i], train_data, val_data, train_cfg, derive_seed(seed, 3, static_cast<std::uint64_t>(i)));
        } catch (const DivergenceError& e) {
            throw DivergenceError(std::string(e.what()) + " at exercise date " + std::to_string(i), e.epoch(), i);
        }

        // Update the value processes on every path with the trained regressor.
        const IntervalValues values =
            evaluate_interval(nets[i], PolicyKind::per_date, grid, i, interval_slice(paths, grid, i, every));
        if (!values.increment.allFinite() || !values.phi.allFinite())
            throw DivergenceError("method one: non-finite regression output at exercise date " + std::to_string(i),
                                  history.epochs_run, i);
        if (i > 0) {
            const Eigen::VectorXd f = payoff_at(paths, grid, payoff, i);
            y = y_update(y, values.phi, values.increment, f, disc);
            x = x_update(x, values.increment, f, disc);
        } else {
            y = y_update(y, never, values.increment, zero, disc);
            x = disc * x - values.increment;
        }

        TrainRecord rec;
        rec.index = i;
        rec.epochs = history.epochs_run;
        rec.best_epoch = history.best_epoch;
        rec.train_loss = history.train_loss.empty() ? std::numeric_limits<double>::quiet_NaN() : history.train_loss.back();
        rec.validation_loss = history.best_validation_loss;
        rec.validation_lower = std::numeric_limits<double>::quiet_NaN();
        rec.seconds = seconds_since(step_start);
        diag.records.push_back(rec);
        diag.total_epochs += history.epochs_run;
    }
    diag.in_sample_lower = y.mean();
    diag.in_sample_upper = x.mean();
    diag.seconds = seconds_since(started);
    return {Policy(PolicyKind::per_date, grid, payoff, model.rate(), model.state_dim(), model.asset_dim(),
                   model.brownian_dim(), std::move(nets)),
            diag};
}

}  // namespace dualstop
