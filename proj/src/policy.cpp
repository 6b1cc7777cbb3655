#include "dualstop/policy.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "dualstop/errors.hpp"

namespace dualstop {

namespace {

constexpr const char* kVariationLabels[] = {"V1", "V2", "V3", "V4", "V5", "V6"};

// Samples per network evaluation chunk; bounds activation memory.
constexpr std::size_t kEvalChunk = 4096;

std::vector<std::size_t> all_paths(std::size_t n) {
    std::vector<std::size_t> paths(n);
    std::iota(paths.begin(), paths.end(), 0);
    return paths;
}

}  // namespace

std::vector<std::string> Variations::labels() const {
    const bool flags[] = {warm_start, time_subset, fresh_data, second_order, split_networks, substeps};
    std::vector<std::string> out;
    for (int i = 0; i < 6; ++i)
        if (flags[i]) out.emplace_back(kVariationLabels[i]);
    return out;
}

Variations Variations::parse(const std::vector<std::string>& labels) {
    Variations v;
    bool* flags[] = {&v.warm_start, &v.time_subset, &v.fresh_data, &v.second_order, &v.split_networks,
                     &v.substeps};
    for (const auto& label : labels) {
        const auto* it = std::find(std::begin(kVariationLabels), std::end(kVariationLabels), label);
        if (it == std::end(kVariationLabels)) throw ConfigError("method.variations: unknown variation '" + label + "'");
        *flags[it - std::begin(kVariationLabels)] = true;
    }
    return v;
}

Policy::Policy(PolicyKind kind, TimeGrid grid, Payoff payoff, double rate, int state_dim, int asset_dim,
               int brownian_dim, std::vector<RegressionNets> nets)
    : kind_(kind), grid_(grid), payoff_(payoff), rate_(rate), state_dim_(state_dim), asset_dim_(asset_dim),
      brownian_dim_(brownian_dim), nets_(std::move(nets)) {
    grid_.validate();
    const std::size_t expected = kind_ == PolicyKind::global ? 1 : static_cast<std::size_t>(grid_.exercise_dates);
    if (nets_.size() != expected)
        throw ConfigError("policy: expected " + std::to_string(expected) + " networks, got " +
                          std::to_string(nets_.size()));
    for (const auto& n : nets_) {
        if (n.architecture().input_dim != input_dim() || n.architecture().brownian_dim != brownian_dim_)
            throw ConfigError("policy: network dimensions do not match the model");
    }
}

RegressionNets& Policy::nets_at(int date) { return nets_[kind_ == PolicyKind::global ? 0 : date]; }

const RegressionNets& Policy::nets_at(int date) const { return nets_[kind_ == PolicyKind::global ? 0 : date]; }

std::size_t Policy::parameter_count() const {
    std::size_t total = 0;
    for (const auto& n : nets_) total += n.parameter_count();
    return total;
}

Eigen::MatrixXd make_inputs(PolicyKind kind, const TimeGrid& grid, int date, const Eigen::MatrixXd& states) {
    if (kind == PolicyKind::per_date) return states;
    const int m = grid.substeps;
    Eigen::MatrixXd inputs(states.rows() + 1, states.cols());
    inputs.bottomRows(states.rows()) = states;
    for (Eigen::Index c = 0; c < states.cols(); ++c) {
        const int step = date * m + static_cast<int>(c % m);
        inputs(0, c) = grid.time_at_step(step) / grid.maturity;
    }
    return inputs;
}

Eigen::MatrixXd Policy::interval_inputs(int date, const Eigen::MatrixXd& states) const {
    return make_inputs(kind_, grid_, date, states);
}

Heads Policy::evaluate(int date, const Eigen::MatrixXd& states) const {
    return nets_at(date).evaluate(interval_inputs(date, states), grid_.substeps);
}

void Policy::check_model(const PathModel& model) const {
    if (model.state_dim() != state_dim_ || model.brownian_dim() != brownian_dim_ || model.asset_dim() != asset_dim_)
        throw ConfigError("policy: trained for a model with different dimensions");
}

NetArchitecture make_architecture(PolicyKind kind, int state_dim, int brownian_dim, const Variations& v,
                                  const std::vector<int>& phi_hidden, const std::vector<int>& psi_hidden) {
    NetArchitecture arch;
    arch.input_dim = state_dim + (kind == PolicyKind::global ? 1 : 0);
    arch.brownian_dim = brownian_dim;
    arch.second_order = v.second_order;
    arch.shared = !v.split_networks;
    arch.phi_hidden = phi_hidden;
    if (!arch.shared) arch.psi_hidden = psi_hidden;
    return arch;
}

IntervalSlice interval_slice(const PathBatch& batch, const TimeGrid& grid, int date,
                             std::span<const std::size_t> paths) {
    const int m = grid.substeps;
    if (batch.steps != grid.total_steps()) throw ConfigError("paths were simulated on a different grid");
    IntervalSlice slice;
    const auto cols = static_cast<Eigen::Index>(paths.size()) * m;
    slice.states.resize(batch.state_dim, cols);
    slice.dw.resize(batch.brownian_dim, cols);
    for (std::size_t i = 0; i < paths.size(); ++i) {
        for (int k = 0; k < m; ++k) {
            const auto c = static_cast<Eigen::Index>(i) * m + k;
            const auto s = batch.state(paths[i], date * m + k);
            const auto w = batch.increment(paths[i], date * m + k);
            std::copy(s.begin(), s.end(), slice.states.col(c).data());
            std::copy(w.begin(), w.end(), slice.dw.col(c).data());
        }
    }
    return slice;
}

IntervalSlice interval_slice(const PathBatch& batch, const TimeGrid& grid, int date) {
    const auto paths = all_paths(batch.paths);
    return interval_slice(batch, grid, date, paths);
}

Eigen::VectorXd payoff_at(const PathBatch& batch, const TimeGrid& grid, const Payoff& payoff, int date,
                          std::span<const std::size_t> paths) {
    payoff.check_dimension(batch.asset_dim);
    const int step = date * grid.substeps;
    const std::size_t count = paths.empty() ? batch.paths : paths.size();
    Eigen::VectorXd f(static_cast<Eigen::Index>(count));
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t p = paths.empty() ? i : paths[i];
        f[static_cast<Eigen::Index>(i)] = payoff(batch.state(p, step).first(batch.asset_dim));
    }
    return f;
}

IntervalValues evaluate_interval(const Policy& policy, int date, const IntervalSlice& slice, Rebalancing hedge) {
    return evaluate_interval(policy.nets_at(date), policy.kind(), policy.grid(), date, slice, hedge);
}

IntervalValues evaluate_interval(const RegressionNets& nets, PolicyKind kind, const TimeGrid& grid, int date,
                                 const IntervalSlice& slice, Rebalancing hedge) {
    const int m = grid.substeps;
    const double h = grid.step_size();
    const auto samples = slice.states.cols() / m;
    IntervalValues out;
    out.phi.resize(samples);
    out.increment.resize(samples);
    if (hedge != Rebalancing::none) out.hedge.resize(samples);
    const auto chunk = static_cast<Eigen::Index>(kEvalChunk);
    for (Eigen::Index start = 0; start < samples; start += chunk) {
        const Eigen::Index count = std::min(chunk, samples - start);
        const Eigen::MatrixXd states = slice.states.middleCols(start * m, count * m);
        const Eigen::MatrixXd dw = slice.dw.middleCols(start * m, count * m);
        const Heads heads = nets.evaluate(make_inputs(kind, grid, date, states), m);
        out.phi.segment(start, count) = heads.phi;
        out.increment.segment(start, count) = martingale_increments(heads, dw, m, h);
        if (hedge == Rebalancing::substeps) {
            out.hedge.segment(start, count) = hedge_increments(heads, dw, m);
        } else if (hedge == Rebalancing::exercise_dates) {
            for (Eigen::Index p = 0; p < count; ++p) {
                const Eigen::VectorXd total = dw.middleCols(p * m, m).rowwise().sum();
                out.hedge[start + p] = heads.psi.col(p * m).dot(total);
            }
        }
    }
    return out;
}

Eigen::VectorXd y_update(const Eigen::VectorXd& y_next, const Eigen::VectorXd& phi,
                         const Eigen::VectorXd& increment, const Eigen::VectorXd& f_now, double disc) {
    Eigen::VectorXd y(y_next.size());
    for (Eigen::Index p = 0; p < y.size(); ++p)
        y[p] = exercise_now(f_now[p], phi[p]) ? f_now[p] : disc * y_next[p] - increment[p];
    return y;
}

Eigen::VectorXd x_update(const Eigen::VectorXd& x_next, const Eigen::VectorXd& increment,
                         const Eigen::VectorXd& f_now, double disc) {
    return f_now.cwiseMax(disc * x_next - increment);
}

ValueProcesses roll_back(const Policy& policy, const PathBatch& batch, std::span<const std::size_t> paths,
                         bool with_upper) {
    const auto& grid = policy.grid();
    const int n = grid.exercise_dates;
    const std::vector<std::size_t> every = paths.empty() ? all_paths(batch.paths) : std::vector<std::size_t>{};
    if (paths.empty()) paths = every;
    const auto count = static_cast<Eigen::Index>(paths.size());
    const double disc = discount(policy.rate(), grid.exercise_interval());

    ValueProcesses v;
    v.y.resize(count, n + 1);
    v.y.col(n) = payoff_at(batch, grid, policy.payoff(), n, paths);
    if (with_upper) {
        v.x.resize(count, n + 1);
        v.x.col(n) = v.y.col(n);
    }
    const Eigen::VectorXd never = Eigen::VectorXd::Constant(count, std::numeric_limits<double>::infinity());
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(count);
    for (int i = n - 1; i >= 0; --i) {
        const IntervalValues values = evaluate_interval(policy, i, interval_slice(batch, grid, i, paths));
        if (i > 0) {
            const Eigen::VectorXd f = payoff_at(batch, grid, policy.payoff(), i, paths);
            v.y.col(i) = y_update(v.y.col(i + 1), values.phi, values.increment, f, disc);
            if (with_upper) v.x.col(i) = x_update(v.x.col(i + 1), values.increment, f, disc);
        } else {
            // No exercise decision at the initial date.
            v.y.col(0) = y_update(v.y.col(1), never, values.increment, zero, disc);
            if (with_upper) v.x.col(0) = disc * v.x.col(1) - values.increment;
        }
    }
    return v;
}

}  // namespace dualstop
