#include "dualstop/regression.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "dualstop/errors.hpp"
#include "dualstop/random.hpp"

namespace dualstop {

std::vector<int> NetArchitecture::phi_layers() const {
    std::vector<int> sizes{input_dim};
    sizes.insert(sizes.end(), phi_hidden.begin(), phi_hidden.end());
    sizes.push_back(shared ? 1 + psi_outputs() : 1);
    return sizes;
}

std::vector<int> NetArchitecture::psi_layers() const {
    if (shared) return {};
    std::vector<int> sizes{input_dim};
    sizes.insert(sizes.end(), psi_hidden.begin(), psi_hidden.end());
    sizes.push_back(psi_outputs());
    return sizes;
}

std::size_t NetArchitecture::parameter_count() const {
    return Mlp::parameter_count(phi_layers()) + Mlp::parameter_count(psi_layers());
}

RegressionData RegressionData::subset(std::span<const std::size_t> rows) const {
    RegressionData out;
    const int m = substeps;
    out.substeps = m;
    out.step = step;
    out.inputs.resize(inputs.rows(), static_cast<Eigen::Index>(rows.size()) * m);
    out.dw.resize(dw.rows(), static_cast<Eigen::Index>(rows.size()) * m);
    out.target.resize(static_cast<Eigen::Index>(rows.size()));
    if (!group.empty()) out.group.resize(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto src = static_cast<Eigen::Index>(rows[i]) * m;
        const auto dst = static_cast<Eigen::Index>(i) * m;
        out.inputs.middleCols(dst, m) = inputs.middleCols(src, m);
        out.dw.middleCols(dst, m) = dw.middleCols(src, m);
        out.target[static_cast<Eigen::Index>(i)] = target[static_cast<Eigen::Index>(rows[i])];
        if (!group.empty()) out.group[i] = group[rows[i]];
    }
    return out;
}

RegressionNets::RegressionNets(NetArchitecture arch, std::uint64_t seed) : arch_(std::move(arch)) {
    if (arch_.input_dim < 1 || arch_.brownian_dim < 1)
        throw ConfigError("network: input and brownian dimensions must be positive");
    phi_ = Mlp::he_init(arch_.phi_layers(), derive_seed(seed, 11));
    if (!arch_.shared) psi_ = Mlp::he_init(arch_.psi_layers(), derive_seed(seed, 12));
    scaling_.input_mean = Eigen::VectorXd::Zero(arch_.input_dim);
    scaling_.input_scale = Eigen::VectorXd::Ones(arch_.input_dim);
}

RegressionNets::RegressionNets(NetArchitecture arch, Mlp phi, Mlp psi, Scaling scaling)
    : arch_(std::move(arch)), phi_(std::move(phi)), psi_(std::move(psi)), scaling_(std::move(scaling)) {
    if (phi_.layer_sizes() != arch_.phi_layers() || psi_.layer_sizes() != arch_.psi_layers())
        throw ConfigError("network: parameters do not match the architecture");
    if (scaling_.input_mean.size() != arch_.input_dim || scaling_.input_scale.size() != arch_.input_dim)
        throw ConfigError("network: scaling does not match the input width");
}

RegressionNets warm_start_from(const RegressionNets& previous, const NetArchitecture& arch) {
    if (!(previous.architecture() == arch))
        throw ConfigError("warm start: architecture mismatch with the previous network");
    return previous.warm_start_copy();
}

Eigen::MatrixXd RegressionNets::normalize(const Eigen::MatrixXd& inputs) const {
    if (inputs.rows() != arch_.input_dim)
        throw ConfigError("network: input width " + std::to_string(inputs.rows()) + " != " +
                          std::to_string(arch_.input_dim));
    return ((inputs.colwise() - scaling_.input_mean).array().colwise() / scaling_.input_scale.array())
        .matrix();
}

namespace {

Eigen::MatrixXd first_substep_columns(const Eigen::MatrixXd& x, int m) {
    if (m == 1) return x;
    const Eigen::Index samples = x.cols() / m;
    Eigen::MatrixXd out(x.rows(), samples);
    for (Eigen::Index p = 0; p < samples; ++p) out.col(p) = x.col(p * m);
    return out;
}

// Raw (unscaled) network outputs for a batch.
struct RawHeads {
    Eigen::RowVectorXd phi;  // [samples]
    Eigen::MatrixXd psi;     // [psi_outputs x cols]
};

RawHeads raw_forward(const RegressionNets& nets, const Eigen::MatrixXd& xn, int m,
                     Mlp::Tape* phi_tape, Mlp::Tape* psi_tape) {
    const auto& arch = nets.architecture();
    RawHeads raw;
    if (arch.shared) {
        Eigen::MatrixXd out = phi_tape ? nets.phi_net().forward(xn, *phi_tape) : nets.phi_net().forward(xn);
        const Eigen::Index samples = out.cols() / m;
        raw.phi.resize(samples);
        for (Eigen::Index p = 0; p < samples; ++p) raw.phi[p] = out(0, p * m);
        raw.psi = out.bottomRows(arch.psi_outputs());
    } else {
        const Eigen::MatrixXd x0 = first_substep_columns(xn, m);
        raw.phi = phi_tape ? nets.phi_net().forward(x0, *phi_tape) : nets.phi_net().forward(x0);
        raw.psi = psi_tape ? nets.psi_net().forward(xn, *psi_tape) : nets.psi_net().forward(xn);
    }
    return raw;
}

// Sums consecutive groups of m entries of a row vector.
Eigen::VectorXd sum_groups(const Eigen::RowVectorXd& row, int m) {
    const Eigen::Index samples = row.size() / m;
    return Eigen::Map<const Eigen::MatrixXd>(row.data(), m, samples).colwise().sum().transpose();
}

}  // namespace

Heads RegressionNets::evaluate(const Eigen::MatrixXd& inputs, int substeps) const {
    const Eigen::MatrixXd xn = normalize(inputs);
    RawHeads raw = raw_forward(*this, xn, substeps, nullptr, nullptr);
    const int dw = arch_.brownian_dim;
    Heads heads;
    heads.phi = (scaling_.phi_shift + scaling_.phi_scale * raw.phi.array()).matrix().transpose();
    heads.psi = scaling_.psi_scale * raw.psi.topRows(dw);
    if (arch_.second_order) heads.psi2 = scaling_.psi2_scale * raw.psi.bottomRows(dw);
    return heads;
}

Scaling scaling_from_moments(const Eigen::VectorXd& input_mean, const Eigen::VectorXd& input_variance,
                             const Eigen::VectorXd& target, double interval) {
    Scaling s;
    s.input_mean = input_mean;
    s.input_scale.resize(input_mean.size());
    for (Eigen::Index i = 0; i < input_mean.size(); ++i) {
        const double sd = std::sqrt(std::max(input_variance[i], 0.0));
        // Constant inputs (deterministic initial state) are only centred.
        s.input_scale[i] = sd > 1e-12 * std::max(1.0, std::abs(input_mean[i])) ? sd : 1.0;
    }
    const double mean = target.size() ? target.mean() : 0.0;
    double sd = 0.0;
    if (target.size() > 1) sd = std::sqrt((target.array() - mean).square().sum() / (target.size() - 1));
    s.phi_shift = mean;
    s.phi_scale = sd > 1e-12 ? sd : 1.0;
    s.psi_scale = s.phi_scale / std::sqrt(interval);
    s.psi2_scale = s.phi_scale / interval;
    return s;
}

Scaling fit_scaling(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& target, double interval) {
    const Eigen::Index n = inputs.cols();
    const Eigen::VectorXd mean = inputs.rowwise().mean();
    Eigen::VectorXd var = Eigen::VectorXd::Zero(inputs.rows());
    if (n > 1) var = (inputs.colwise() - mean).array().square().rowwise().sum() / static_cast<double>(n - 1);
    return scaling_from_moments(mean, var, target, interval);
}

Eigen::VectorXd martingale_increments(const Heads& heads, const Eigen::MatrixXd& dw, int substeps,
                                      double step) {
    Eigen::RowVectorXd per_col = (heads.psi.array() * dw.array()).colwise().sum();
    if (heads.psi2.size() != 0)
        per_col += (heads.psi2.array() * (dw.array().square() - step)).colwise().sum().matrix();
    return sum_groups(per_col, substeps);
}

Eigen::VectorXd hedge_increments(const Heads& heads, const Eigen::MatrixXd& dw, int substeps) {
    Eigen::RowVectorXd per_col = (heads.psi.array() * dw.array()).colwise().sum();
    return sum_groups(per_col, substeps);
}

double loss_and_grads(const RegressionNets& nets, const RegressionData& batch, NetGradients* grads) {
    const auto& arch = nets.architecture();
    const auto& sc = nets.scaling();
    const int m = batch.substeps;
    const int dwd = arch.brownian_dim;
    if (batch.dw.rows() != dwd)
        throw ConfigError("loss: dw width " + std::to_string(batch.dw.rows()) + " != psi width " +
                          std::to_string(dwd));
    const Eigen::Index samples = batch.target.size();
    if (samples == 0) return 0.0;

    const Eigen::MatrixXd xn = nets.normalize(batch.inputs);
    Mlp::Tape phi_tape, psi_tape;
    const bool want = grads != nullptr;
    RawHeads raw = raw_forward(nets, xn, m, want ? &phi_tape : nullptr, want ? &psi_tape : nullptr);

    Eigen::RowVectorXd per_col = sc.psi_scale * (raw.psi.topRows(dwd).array() * batch.dw.array()).colwise().sum();
    Eigen::ArrayXXd compensated;
    if (arch.second_order) {
        compensated = batch.dw.array().square() - batch.step;
        per_col += sc.psi2_scale * (raw.psi.bottomRows(dwd).array() * compensated).colwise().sum().matrix();
    }
    const Eigen::VectorXd increment = sum_groups(per_col, m);
    const Eigen::VectorXd residual =
        batch.target - (sc.phi_shift + sc.phi_scale * raw.phi.transpose().array()).matrix() - increment;
    const double loss = residual.squaredNorm() / static_cast<double>(samples);
    if (!want) return loss;

    // dLoss/dprediction per sample, broadcast over its substep columns.
    const Eigen::VectorXd g = (-2.0 / static_cast<double>(samples)) * residual;
    Eigen::RowVectorXd g_cols(samples * m);
    for (Eigen::Index p = 0; p < samples; ++p) g_cols.segment(p * m, m).setConstant(g[p]);

    Eigen::MatrixXd dpsi(arch.psi_outputs(), samples * m);
    dpsi.topRows(dwd) = sc.psi_scale * (batch.dw.array().rowwise() * g_cols.array()).matrix();
    if (arch.second_order)
        dpsi.bottomRows(dwd) = sc.psi2_scale * (compensated.rowwise() * g_cols.array()).matrix();
    const Eigen::RowVectorXd dphi = sc.phi_scale * g.transpose();

    grads->phi.setZero(nets.phi_net().parameter_count());
    if (arch.shared) {
        Eigen::MatrixXd dout(1 + arch.psi_outputs(), samples * m);
        dout.row(0).setZero();
        for (Eigen::Index p = 0; p < samples; ++p) dout(0, p * m) = dphi[p];
        dout.bottomRows(arch.psi_outputs()) = dpsi;
        nets.phi_net().backward(phi_tape, dout, grads->phi);
        grads->psi.resize(0);
    } else {
        grads->psi.setZero(nets.psi_net().parameter_count());
        nets.phi_net().backward(phi_tape, dphi, grads->phi);
        nets.psi_net().backward(psi_tape, dpsi, grads->psi);
    }
    return loss;
}

double regression_loss(const RegressionNets& nets, const RegressionData& data) {
    const std::size_t n = data.samples();
    if (n == 0) return 0.0;
    constexpr std::size_t kChunk = 8192;
    double total = 0.0;
    std::vector<std::size_t> rows;
    for (std::size_t start = 0; start < n; start += kChunk) {
        const std::size_t end = std::min(n, start + kChunk);
        rows.resize(end - start);
        std::iota(rows.begin(), rows.end(), start);
        const RegressionData chunk = (start == 0 && end == n) ? data : data.subset(rows);
        total += loss_and_grads(nets, chunk, nullptr) * static_cast<double>(end - start);
    }
    return total / static_cast<double>(n);
}

void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, AdamState& state, double lr,
               const AdamConfig& cfg) {
    if (state.first.size() != params.size()) {
        state.first = Eigen::VectorXd::Zero(params.size());
        state.second = Eigen::VectorXd::Zero(params.size());
        state.step = 0;
    }
    ++state.step;
    state.first = cfg.beta1 * state.first + (1.0 - cfg.beta1) * grad;
    state.second = cfg.beta2 * state.second + (1.0 - cfg.beta2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    params.array() -= lr * (state.first.array() / c1) / ((state.second.array() / c2).sqrt() + cfg.epsilon);
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("train.learning_rate must be positive");
    if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
    if (max_epochs < 0) throw ConfigError("train.max_epochs must be >= 0");
    if (patience < 1) throw ConfigError("train.patience must be >= 1");
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
        throw ConfigError("train.validation_fraction must lie in (0, 1)");
}

RegressionTrainer::RegressionTrainer(RegressionNets& nets, TrainConfig cfg) : nets_(nets), cfg_(cfg) {}

void RegressionTrainer::reset_optimizer() {
    phi_state_ = {};
    psi_state_ = {};
}

double RegressionTrainer::run_epoch(const RegressionData& data, std::uint64_t shuffle_seed, double lr) {
    const std::size_t n = data.samples();
    if (n == 0) throw ConfigError("train: empty data");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 shuffler(shuffle_seed);
    std::shuffle(order.begin(), order.end(), shuffler);

    const std::size_t bs = static_cast<std::size_t>(cfg_.batch_size);
    double total = 0.0;
    for (std::size_t start = 0; start < n; start += bs) {
        const std::size_t end = std::min(n, start + bs);
        const RegressionData batch = data.subset(std::span<const std::size_t>(order).subspan(start, end - start));
        const double loss = loss_and_grads(nets_, batch, &grads_);
        if (!std::isfinite(loss)) return loss;
        total += loss * static_cast<double>(end - start);
        adam_step(nets_.phi_net(), grads_.phi, phi_state_, lr, cfg_.adam);
        if (!nets_.architecture().shared) adam_step(nets_.psi_net(), grads_.psi, psi_state_, lr, cfg_.adam);
    }
    return total / static_cast<double>(n);
}

PathSplit split_paths(std::size_t paths, double validation_fraction, std::uint64_t seed) {
    std::vector<std::size_t> order(paths);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    auto n_val = static_cast<std::size_t>(std::llround(validation_fraction * static_cast<double>(paths)));
    if (paths > 1) n_val = std::clamp<std::size_t>(n_val, 1, paths - 1);
    else n_val = 0;
    PathSplit split;
    split.validation.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
    split.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
    std::sort(split.validation.begin(), split.validation.end());
    std::sort(split.train.begin(), split.train.end());
    return split;
}

TrainHistory train(RegressionNets& nets, const RegressionData& train_data,
                   const RegressionData& validation_data, const TrainConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    if (train_data.samples() == 0) throw ConfigError("train: empty data");
    TrainHistory history;
    const bool has_validation = validation_data.samples() > 0;
    history.best_validation_loss = has_validation ? regression_loss(nets, validation_data) : 0.0;
    if (cfg.max_epochs == 0) return history;

    RegressionTrainer trainer(nets, cfg);
    RegressionNets best = nets;
    int stall = 0;
    double lr = cfg.learning_rate;
    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        const double train_loss = trainer.run_epoch(train_data, derive_seed(seed, 21, epoch), lr);
        if (!std::isfinite(train_loss))
            throw DivergenceError("train: non-finite loss at epoch " + std::to_string(epoch), epoch);
        history.train_loss.push_back(train_loss);
        history.epochs_run = epoch;
        lr *= cfg.lr_decay;
        if (!has_validation) continue;
        const double val = regression_loss(nets, validation_data);
        if (!std::isfinite(val))
            throw DivergenceError("train: non-finite validation loss at epoch " + std::to_string(epoch), epoch);
        history.validation_loss.push_back(val);
        if (val < history.best_validation_loss) {
            history.best_validation_loss = val;
            history.best_epoch = epoch;
            best = nets;
            stall = 0;
        } else if (++stall >= cfg.patience) {
            break;
        }
    }
    if (has_validation) nets = std::move(best);
    else history.best_epoch = history.epochs_run;
    return history;
}

TrainHistory train(RegressionNets& nets, const RegressionData& data, const TrainConfig& cfg,
                   std::uint64_t seed) {
    cfg.validate();
    if (data.samples() == 0) throw ConfigError("train: empty data");
    std::vector<std::size_t> group = data.group;
    if (group.empty()) {
        group.resize(data.samples());
        std::iota(group.begin(), group.end(), 0);
    }
    const std::size_t paths = *std::max_element(group.begin(), group.end()) + 1;
    const PathSplit split = split_paths(paths, cfg.validation_fraction, derive_seed(seed, 22));
    std::vector<char> is_val(paths, 0);
    for (auto p : split.validation) is_val[p] = 1;
    std::vector<std::size_t> train_rows, val_rows;
    for (std::size_t i = 0; i < group.size(); ++i) (is_val[group[i]] ? val_rows : train_rows).push_back(i);
    return train(nets, data.subset(train_rows), data.subset(val_rows), cfg, seed);
}

}  // namespace dualstop
