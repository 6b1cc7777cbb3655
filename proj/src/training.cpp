#include "dualstop/training.hpp"

#include "dualstop/errors.hpp"

namespace dualstop {

Scaling pooled_scaling(PolicyKind kind, const TimeGrid& grid, const PathBatch& batch,
                       std::span<const std::size_t> paths, std::span<const int> dates,
                       const Eigen::VectorXd& target) {
    const int rows = batch.state_dim + (kind == PolicyKind::global ? 1 : 0);
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(rows);
    Eigen::VectorXd sum_sq = Eigen::VectorXd::Zero(rows);
    double count = 0.0;
    for (int date : dates) {
        const Eigen::MatrixXd x = make_inputs(kind, grid, date, interval_slice(batch, grid, date, paths).states);
        sum += x.rowwise().sum();
        sum_sq += x.array().square().rowwise().sum().matrix();
        count += static_cast<double>(x.cols());
    }
    const Eigen::VectorXd mean = sum / count;
    Eigen::VectorXd var = Eigen::VectorXd::Zero(rows);
    if (count > 1.0) var = ((sum_sq - count * mean.cwiseProduct(mean)) / (count - 1.0)).cwiseMax(0.0);
    return scaling_from_moments(mean, var, target, grid.exercise_interval());
}

RegressionData interval_data(PolicyKind kind, const TimeGrid& grid, const PathBatch& batch, int date,
                             std::span<const std::size_t> paths, const Eigen::VectorXd& target) {
    IntervalSlice slice = interval_slice(batch, grid, date, paths);
    RegressionData data;
    data.inputs = make_inputs(kind, grid, date, slice.states);
    data.dw = std::move(slice.dw);
    data.target = target;
    data.group.assign(paths.begin(), paths.end());
    data.substeps = grid.substeps;
    data.step = grid.step_size();
    return data;
}

void check_variations(PolicyKind kind, const TimeGrid& grid, const Variations& v) {
    if (kind == PolicyKind::per_date && (v.time_subset || v.fresh_data))
        throw ConfigError(std::string("method.variations: ") + (v.time_subset ? "V2" : "V3") +
                          " applies only to method two");
    if (kind == PolicyKind::global && v.warm_start)
        throw ConfigError("method.variations: V1 applies only to method one");
    if (grid.substeps > 1 && !v.substeps)
        throw ConfigError("grid.substeps: more than one substep requires variation V6");
}

}  // namespace dualstop
