#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "dualstop/mlp.hpp"

namespace dualstop {

/// Shape of the continuation / martingale-increment regressors.
///
/// With `shared` a single trunk (phi_hidden) carries every head; otherwise phi
/// and psi are disjoint networks. The second-order martingale term, when on,
/// is an extra block of psi outputs: psi emits [psi | psi2].
struct NetArchitecture {
    int input_dim = 1;
    int brownian_dim = 1;
    bool second_order = false;
    bool shared = false;
    std::vector<int> phi_hidden;
    std::vector<int> psi_hidden;

    int psi_outputs() const { return brownian_dim * (second_order ? 2 : 1); }
    std::vector<int> phi_layers() const;
    std::vector<int> psi_layers() const;  // empty when shared
    std::size_t parameter_count() const;
    bool operator==(const NetArchitecture&) const = default;
};

/// Fixed affine maps around the networks: inputs are standardized, outputs
/// rescaled. Estimated once from the first regression and then frozen.
struct Scaling {
    Eigen::VectorXd input_mean;
    Eigen::VectorXd input_scale;
    double phi_shift = 0.0;
    double phi_scale = 1.0;
    double psi_scale = 1.0;
    double psi2_scale = 1.0;

    bool operator==(const Scaling&) const = default;
};

/// Regression samples, one per (path, exercise interval). Each sample owns
/// `substeps` consecutive columns of `inputs`/`dw`; phi is read at the first.
struct RegressionData {
    Eigen::MatrixXd inputs;          // [input_dim x samples*substeps]
    Eigen::MatrixXd dw;              // [brownian_dim x samples*substeps]
    Eigen::VectorXd target;          // [samples], already discounted to the interval start
    std::vector<std::size_t> group;  // originating path per sample (optional)
    int substeps = 1;
    double step = 0.0;               // substep length h

    std::size_t samples() const { return static_cast<std::size_t>(target.size()); }
    RegressionData subset(std::span<const std::size_t> rows) const;
};

/// Head values in model units.
struct Heads {
    Eigen::VectorXd phi;   // [samples]
    Eigen::MatrixXd psi;   // [brownian_dim x samples*substeps]
    Eigen::MatrixXd psi2;  // empty unless second_order
};

class RegressionNets {
public:
    RegressionNets() = default;
    /// He-initialized networks.
    RegressionNets(NetArchitecture arch, std::uint64_t seed);
    /// Assemble from existing parameters (persistence).
    RegressionNets(NetArchitecture arch, Mlp phi, Mlp psi, Scaling scaling);

    const NetArchitecture& architecture() const { return arch_; }
    Mlp& phi_net() { return phi_; }
    const Mlp& phi_net() const { return phi_; }
    /// Empty when the architecture is shared.
    Mlp& psi_net() { return psi_; }
    const Mlp& psi_net() const { return psi_; }
    Scaling& scaling() { return scaling_; }
    const Scaling& scaling() const { return scaling_; }
    std::size_t parameter_count() const { return phi_.parameter_count() + psi_.parameter_count(); }

    Eigen::MatrixXd normalize(const Eigen::MatrixXd& inputs) const;
    Heads evaluate(const Eigen::MatrixXd& inputs, int substeps) const;

    /// Copy used to initialize the next regression (optimizer state is not part of it).
    RegressionNets warm_start_copy() const { return *this; }

private:
    NetArchitecture arch_;
    Mlp phi_;
    Mlp psi_;
    Scaling scaling_;
};

/// Warm start from a previously trained regressor; architectures must match.
RegressionNets warm_start_from(const RegressionNets& previous, const NetArchitecture& arch);

/// Moments for the input standardization and the output scales.
Scaling fit_scaling(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& target, double interval);
/// Same from precomputed input moments.
Scaling scaling_from_moments(const Eigen::VectorXd& input_mean, const Eigen::VectorXd& input_variance,
                             const Eigen::VectorXd& target, double interval);

/// Per-sample sum over substeps of psi . dw (+ psi2 . (dw^2 - h)).
Eigen::VectorXd martingale_increments(const Heads& heads, const Eigen::MatrixXd& dw, int substeps,
                                      double step);
/// Per-sample sum over substeps of psi . dw only (the tradable hedge gain).
Eigen::VectorXd hedge_increments(const Heads& heads, const Eigen::MatrixXd& dw, int substeps);

struct NetGradients {
    Eigen::VectorXd phi;
    Eigen::VectorXd psi;
};

/// Mean squared residual of target - phi - martingale increment, with exact
/// backpropagated gradients when `grads` is non-null.
double loss_and_grads(const RegressionNets& nets, const RegressionData& batch, NetGradients* grads);

/// Loss without gradients, evaluated in chunks.
double regression_loss(const RegressionNets& nets, const RegressionData& data);

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    Eigen::VectorXd first;
    Eigen::VectorXd second;
    long step = 0;
};

void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, AdamState& state, double lr,
               const AdamConfig& cfg = {});
inline void adam_step(Mlp& net, const Eigen::VectorXd& grad, AdamState& state, double lr,
                      const AdamConfig& cfg = {}) {
    adam_step(net.parameters(), grad, state, lr, cfg);
}

struct TrainConfig {
    double learning_rate = 1e-3;
    double lr_decay = 1.0;  // multiplier applied per epoch
    int batch_size = 256;
    int max_epochs = 200;
    int patience = 5;
    AdamConfig adam;
    double validation_fraction = 0.2;

    void validate() const;
};

struct TrainHistory {
    std::vector<double> train_loss;
    std::vector<double> validation_loss;
    int epochs_run = 0;
    int best_epoch = 0;  // 0 means the initial parameters were never beaten
    double best_validation_loss = 0.0;
};

/// Mini-batch ADAM over one network pair, keeping optimizer state across calls.
class RegressionTrainer {
public:
    RegressionTrainer(RegressionNets& nets, TrainConfig cfg);

    /// One shuffled pass; returns the mean mini-batch loss.
    double run_epoch(const RegressionData& data, std::uint64_t shuffle_seed, double lr);
    void reset_optimizer();
    const TrainConfig& config() const { return cfg_; }

private:
    RegressionNets& nets_;
    TrainConfig cfg_;
    AdamState phi_state_;
    AdamState psi_state_;
    NetGradients grads_;
};

struct PathSplit {
    std::vector<std::size_t> train;
    std::vector<std::size_t> validation;
};

/// Random train/validation partition of path indices.
PathSplit split_paths(std::size_t paths, double validation_fraction, std::uint64_t seed);

/// Trains until max_epochs or `patience` epochs without validation
/// improvement, then restores the best-validation parameters.
TrainHistory train(RegressionNets& nets, const RegressionData& train_data,
                   const RegressionData& validation_data, const TrainConfig& cfg, std::uint64_t seed);

/// Same, splitting `data` by its `group` (path) column using `seed`.
TrainHistory train(RegressionNets& nets, const RegressionData& data, const TrainConfig& cfg,
                   std::uint64_t seed);

}  // namespace dualstop
