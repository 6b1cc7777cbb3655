#include "dualstop/market.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dualstop/errors.hpp"

namespace dualstop {

void TimeGrid::validate() const {
    if (!(maturity > 0.0)) throw ConfigError("grid: maturity must be positive");
    if (exercise_dates < 1) throw ConfigError("grid: exercise_dates must be >= 1");
    if (substeps < 1) throw ConfigError("grid: substeps must be >= 1");
}

namespace {

Eigen::MatrixXd correlation_factor(const Eigen::MatrixXd& corr) {
    const Eigen::Index d = corr.rows();
    if (corr.cols() != d) throw ConfigError("model.correlation: matrix must be square");
    for (Eigen::Index i = 0; i < d; ++i) {
        if (std::abs(corr(i, i) - 1.0) > 1e-12)
            throw ConfigError("model.correlation: diagonal entries must be 1");
        for (Eigen::Index j = 0; j < i; ++j) {
            if (std::abs(corr(i, j) - corr(j, i)) > 1e-12)
                throw ConfigError("model.correlation: matrix must be symmetric");
        }
    }
    Eigen::LLT<Eigen::MatrixXd> llt(corr);
    if (llt.info() == Eigen::Success) return llt.matrixL();

    // Singular but PSD matrices (e.g. perfectly correlated assets) have no
    // Cholesky factor; fall back to the symmetric square root.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(corr);
    if (eig.eigenvalues().minCoeff() < -1e-10)
        throw ConfigError("model.correlation: matrix is not positive semi-definite");
    const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return eig.eigenvectors() * root.asDiagonal();
}

}  // namespace

PathModel::PathModel(ModelSpec spec) : spec_(std::move(spec)) {
    if (auto* gbm = std::get_if<GbmSpec>(&spec_)) {
        const int d = gbm->dimension();
        if (d < 1) throw ConfigError("model.spot: at least one asset required");
        if (static_cast<int>(gbm->volatility.size()) != d)
            throw ConfigError("model.sigma: length must match model.spot");
        if (gbm->dividend.empty()) gbm->dividend.assign(d, 0.0);
        if (static_cast<int>(gbm->dividend.size()) != d)
            throw ConfigError("model.dividend: length must match model.spot");
        for (double s : gbm->spot)
            if (!(s > 0.0)) throw ConfigError("model.spot: prices must be positive");
        for (double v : gbm->volatility)
            if (v < 0.0) throw ConfigError("model.sigma: volatilities must be non-negative");
        if (gbm->correlation.size() == 0) gbm->correlation = Eigen::MatrixXd::Identity(d, d);
        if (gbm->correlation.rows() != d)
            throw ConfigError("model.correlation: dimension must match model.spot");
        factor_ = correlation_factor(gbm->correlation);
        identity_corr_ = gbm->correlation.isIdentity(0.0);
        state_dim_ = brownian_dim_ = asset_dim_ = d;
        rate_ = gbm->rate;
    } else {
        const auto& h = std::get<HestonSpec>(spec_);
        if (!(h.spot > 0.0)) throw ConfigError("model.s0: price must be positive");
        if (h.initial_variance < 0.0) throw ConfigError("model.v0: must be >= 0");
        if (h.mean_reversion < 0.0) throw ConfigError("model.lambda: must be >= 0");
        if (h.vol_of_vol < 0.0) throw ConfigError("model.xi: must be >= 0");
        if (std::abs(h.correlation) > 1.0) throw ConfigError("model.rho: must lie in [-1, 1]");
        state_dim_ = 2;
        brownian_dim_ = 2;
        asset_dim_ = 1;
        rate_ = h.rate;
    }
}

void PathModel::initial_state(std::span<double> state) const {
    if (const auto* gbm = std::get_if<GbmSpec>(&spec_)) {
        std::copy(gbm->spot.begin(), gbm->spot.end(), state.begin());
    } else {
        const auto& h = std::get<HestonSpec>(spec_);
        state[0] = h.spot;
        state[1] = h.initial_variance;
    }
}

void PathModel::draw_increments(double h, PathRng& rng, std::span<double> dw) const {
    const double root_h = std::sqrt(h);
    if (is_heston()) {
        const double rho = std::get<HestonSpec>(spec_).correlation;
        const double z1 = rng.normal();
        const double z2 = rng.normal();
        dw[0] = root_h * z1;
        dw[1] = root_h * (rho * z1 + std::sqrt(1.0 - rho * rho) * z2);
        return;
    }
    const int d = brownian_dim_;
    if (identity_corr_) {
        for (int j = 0; j < d; ++j) dw[j] = root_h * rng.normal();
        return;
    }
    double z[64];
    std::vector<double> heap;
    double* zp = z;
    if (d > 64) {
        heap.resize(d);
        zp = heap.data();
    }
    for (int j = 0; j < d; ++j) zp[j] = rng.normal();
    for (int i = 0; i < d; ++i) {
        double acc = 0.0;
        for (int j = 0; j < d; ++j) acc += factor_(i, j) * zp[j];
        dw[i] = root_h * acc;
    }
}

void PathModel::advance(double h, std::span<const double> state, std::span<const double> dw,
                        std::span<double> next) const {
    if (const auto* gbm = std::get_if<GbmSpec>(&spec_)) {
        for (int j = 0; j < state_dim_; ++j) {
            const double sigma = gbm->volatility[j];
            const double drift = (gbm->rate - gbm->dividend[j] - 0.5 * sigma * sigma) * h;
            next[j] = state[j] * std::exp(drift + sigma * dw[j]);
        }
        return;
    }
    const auto& p = std::get<HestonSpec>(spec_);
    // Full truncation: the positive part of the variance feeds drift and diffusion.
    const double v_plus = std::max(state[1], 0.0);
    const double vol = std::sqrt(v_plus);
    const double theta = p.long_term_vol * p.long_term_vol;
    next[0] = state[0] * std::exp((p.rate - 0.5 * v_plus) * h + vol * dw[0]);
    next[1] = state[1] + p.mean_reversion * (theta - v_plus) * h + p.vol_of_vol * vol * dw[1];
}

std::size_t path_batch_bytes(const PathModel& model, const TimeGrid& grid, std::size_t paths) {
    const std::size_t steps = static_cast<std::size_t>(grid.total_steps());
    const std::size_t per_path = (steps + 1) * model.state_dim() + steps * model.brownian_dim();
    return paths * per_path * sizeof(double);
}

PathBatch simulate(const PathModel& model, const TimeGrid& grid, std::size_t paths,
                   std::uint64_t seed, std::size_t memory_cap) {
    return simulate_range(model, grid, 0, paths, seed, memory_cap);
}

PathBatch simulate_range(const PathModel& model, const TimeGrid& grid, std::size_t first_path,
                         std::size_t paths, std::uint64_t seed, std::size_t memory_cap) {
    grid.validate();
    if (paths < 1) throw ConfigError("simulate: at least one path required");
    const std::size_t bytes = path_batch_bytes(model, grid, paths);
    if (bytes > memory_cap) {
        throw ResourceError("simulate: batch needs " + std::to_string(bytes >> 20) +
                            " MiB, above the memory cap of " + std::to_string(memory_cap >> 20) +
                            " MiB; use fresh-data training (V3) or fewer paths");
    }

    PathBatch batch;
    batch.paths = paths;
    batch.steps = grid.total_steps();
    batch.state_dim = model.state_dim();
    batch.brownian_dim = model.brownian_dim();
    batch.asset_dim = model.asset_dim();
    batch.seed = seed;
    batch.states.resize(paths * (batch.steps + 1) * batch.state_dim);
    batch.increments.resize(paths * batch.steps * batch.brownian_dim);

    const double h = grid.step_size();
    const int ds = batch.state_dim;
    const int dw = batch.brownian_dim;
    const int steps = batch.steps;
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t p = 0; p < static_cast<std::ptrdiff_t>(paths); ++p) {
        PathRng rng(seed, first_path + static_cast<std::uint64_t>(p));
        double* s = batch.states.data() + static_cast<std::size_t>(p) * (steps + 1) * ds;
        double* w = batch.increments.data() + static_cast<std::size_t>(p) * steps * dw;
        model.initial_state({s, static_cast<std::size_t>(ds)});
        for (int k = 0; k < steps; ++k) {
            std::span<double> inc(w + k * dw, dw);
            model.draw_increments(h, rng, inc);
            model.advance(h, {s + k * ds, static_cast<std::size_t>(ds)}, inc,
                          {s + (k + 1) * ds, static_cast<std::size_t>(ds)});
        }
    }
    return batch;
}

PathBatch simulate_gbm(const GbmSpec& spec, const TimeGrid& grid, std::size_t paths,
                       std::uint64_t seed, std::size_t memory_cap) {
    return simulate(PathModel(spec), grid, paths, seed, memory_cap);
}

PathBatch simulate_heston(const HestonSpec& spec, const TimeGrid& grid, std::size_t paths,
                          std::uint64_t seed, std::size_t memory_cap) {
    return simulate(PathModel(spec), grid, paths, seed, memory_cap);
}

double Payoff::operator()(std::span<const double> assets) const {
    if (kind == PayoffKind::put) return std::max(strike - assets[0], 0.0);
    const double top = *std::max_element(assets.begin(), assets.end());
    return std::max(top - strike, 0.0);
}

void Payoff::check_dimension(int asset_dim) const {
    if (kind == PayoffKind::put && asset_dim != 1)
        throw ConfigError("payoff: put requires a single asset, got " + std::to_string(asset_dim));
}

Eigen::VectorXd payoff_eval(const Payoff& payoff, const Eigen::MatrixXd& assets) {
    payoff.check_dimension(static_cast<int>(assets.cols()));
    Eigen::VectorXd out(assets.rows());
    std::vector<double> row(assets.cols());
    for (Eigen::Index i = 0; i < assets.rows(); ++i) {
        for (Eigen::Index j = 0; j < assets.cols(); ++j) row[j] = assets(i, j);
        out[i] = payoff(row);
    }
    return out;
}

}  // namespace dualstop
