#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace dualstop {

/// Fully connected ReLU network with an identity output layer.
///
/// Parameters live in one flat vector: for each layer the weight matrix
/// (out x in, column-major, i.e. the in x out matrix of A(x) = w^T x + b in
/// row-major order) followed by its bias. Batches are column-major
/// [features x samples].
class Mlp {
public:
    struct Tape {
        std::vector<Eigen::MatrixXd> activations;  // input, then every hidden output
    };

    Mlp() = default;
    /// Zero-initialized network with the given layer widths (input first, output last).
    explicit Mlp(std::vector<int> layer_sizes);

    static Mlp he_init(std::vector<int> layer_sizes, std::uint64_t seed);
    static std::size_t parameter_count(const std::vector<int>& layer_sizes);

    const std::vector<int>& layer_sizes() const { return sizes_; }
    int input_dim() const { return sizes_.front(); }
    int output_dim() const { return sizes_.back(); }
    int layers() const { return static_cast<int>(sizes_.size()) - 1; }
    std::size_t parameter_count() const { return static_cast<std::size_t>(params_.size()); }
    bool empty() const { return sizes_.empty(); }

    Eigen::VectorXd& parameters() { return params_; }
    const Eigen::VectorXd& parameters() const { return params_; }

    Eigen::Map<const Eigen::MatrixXd> weight(int layer) const;
    Eigen::Map<const Eigen::VectorXd> bias(int layer) const;
    Eigen::Map<Eigen::MatrixXd> weight(int layer);
    Eigen::Map<Eigen::VectorXd> bias(int layer);

    Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const;
    Eigen::MatrixXd forward(const Eigen::MatrixXd& x, Tape& tape) const;

    /// Accumulates dLoss/dparams into `grad` given dLoss/doutput.
    void backward(const Tape& tape, const Eigen::MatrixXd& grad_output, Eigen::VectorXd& grad) const;

private:
    std::vector<int> sizes_;
    std::vector<Eigen::Index> offsets_;  // start of each layer's weights
    Eigen::VectorXd params_;
};

}  // namespace dualstop
