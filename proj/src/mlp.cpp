#include "dualstop/mlp.hpp"

#include <cmath>
#include <string>

#include "dualstop/errors.hpp"
#include "dualstop/random.hpp"

namespace dualstop {

Mlp::Mlp(std::vector<int> layer_sizes) : sizes_(std::move(layer_sizes)) {
    if (sizes_.size() < 2) throw ConfigError("network needs an input and an output layer");
    for (int n : sizes_)
        if (n < 1) throw ConfigError("network layer widths must be positive");
    Eigen::Index offset = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
        offsets_.push_back(offset);
        offset += static_cast<Eigen::Index>(sizes_[l]) * sizes_[l + 1] + sizes_[l + 1];
    }
    params_ = Eigen::VectorXd::Zero(offset);
}

std::size_t Mlp::parameter_count(const std::vector<int>& sizes) {
    std::size_t count = 0;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l)
        count += static_cast<std::size_t>(sizes[l]) * sizes[l + 1] + sizes[l + 1];
    return count;
}

Mlp Mlp::he_init(std::vector<int> layer_sizes, std::uint64_t seed) {
    Mlp net(std::move(layer_sizes));
    PathRng rng(seed, 0);
    for (int l = 0; l < net.layers(); ++l) {
        const double scale = std::sqrt(2.0 / net.sizes_[l]);
        auto w = net.weight(l);
        for (Eigen::Index j = 0; j < w.cols(); ++j)
            for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = scale * rng.normal();
    }
    return net;
}

Eigen::Map<const Eigen::MatrixXd> Mlp::weight(int l) const {
    return {params_.data() + offsets_[l], sizes_[l + 1], sizes_[l]};
}
Eigen::Map<const Eigen::VectorXd> Mlp::bias(int l) const {
    return {params_.data() + offsets_[l] + static_cast<Eigen::Index>(sizes_[l]) * sizes_[l + 1], sizes_[l + 1]};
}
Eigen::Map<Eigen::MatrixXd> Mlp::weight(int l) {
    return {params_.data() + offsets_[l], sizes_[l + 1], sizes_[l]};
}
Eigen::Map<Eigen::VectorXd> Mlp::bias(int l) {
    return {params_.data() + offsets_[l] + static_cast<Eigen::Index>(sizes_[l]) * sizes_[l + 1], sizes_[l + 1]};
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x) const {
    if (x.rows() != input_dim())
        throw ConfigError("network input width " + std::to_string(x.rows()) + " != " +
                          std::to_string(input_dim()));
    Eigen::MatrixXd a = x;
    for (int l = 0; l < layers(); ++l) {
        Eigen::MatrixXd z = weight(l) * a;
        z.colwise() += bias(l);
        if (l + 1 < layers()) z = z.cwiseMax(0.0);
        a = std::move(z);
    }
    return a;
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x, Tape& tape) const {
    if (x.rows() != input_dim())
        throw ConfigError("network input width " + std::to_string(x.rows()) + " != " +
                          std::to_string(input_dim()));
    tape.activations.resize(layers());
    tape.activations[0] = x;
    Eigen::MatrixXd out;
    for (int l = 0; l < layers(); ++l) {
        Eigen::MatrixXd z = weight(l) * tape.activations[l];
        z.colwise() += bias(l);
        if (l + 1 < layers()) {
            tape.activations[l + 1] = z.cwiseMax(0.0);
        } else {
            out = std::move(z);
        }
    }
    return out;
}

void Mlp::backward(const Tape& tape, const Eigen::MatrixXd& grad_output, Eigen::VectorXd& grad) const {
    if (grad.size() != params_.size()) grad = Eigen::VectorXd::Zero(params_.size());
    Eigen::MatrixXd delta = grad_output;
    for (int l = layers() - 1; l >= 0; --l) {
        const Eigen::MatrixXd& a = tape.activations[l];
        Eigen::Map<Eigen::MatrixXd> gw(grad.data() + offsets_[l], sizes_[l + 1], sizes_[l]);
        Eigen::Map<Eigen::VectorXd> gb(grad.data() + offsets_[l] + static_cast<Eigen::Index>(sizes_[l]) * sizes_[l + 1],
                                       sizes_[l + 1]);
        gw.noalias() += delta * a.transpose();
        gb.noalias() += delta.rowwise().sum();
        if (l > 0) {
            Eigen::MatrixXd back = weight(l).transpose() * delta;
            // ReLU subgradient is 0 at exactly 0.
            delta = (a.array() > 0.0).select(back, 0.0);
        }
    }
}

}  // namespace dualstop
