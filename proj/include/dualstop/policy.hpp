#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dualstop/market.hpp"
#include "dualstop/regression.hpp"

namespace dualstop {

/// Algorithm variations V1..V6.
struct Variations {
    bool warm_start = false;      // V1, per-date networks only
    bool time_subset = false;     // V2, global network only
    bool fresh_data = false;      // V3, global network only
    bool second_order = false;    // V4
    bool split_networks = false;  // V5
    bool substeps = false;        // V6

    /// Labels of the active variations, e.g. {"V1", "V4"}.
    std::vector<std::string> labels() const;
    /// Parses labels "V1".."V6"; unknown labels raise ConfigError.
    static Variations parse(const std::vector<std::string>& labels);
    bool operator==(const Variations&) const = default;
};

enum class PolicyKind { per_date, global };

/// Trained continuation and martingale-increment functions plus everything
/// needed to apply them: one network per date t_0..t_{n-1} (per_date) or a
/// single network taking t/T as an extra leading input (global).
class Policy {
public:
    Policy() = default;
    Policy(PolicyKind kind, TimeGrid grid, Payoff payoff, double rate, int state_dim, int asset_dim,
           int brownian_dim, std::vector<RegressionNets> nets);

    PolicyKind kind() const { return kind_; }
    const TimeGrid& grid() const { return grid_; }
    const Payoff& payoff() const { return payoff_; }
    double rate() const { return rate_; }
    int state_dim() const { return state_dim_; }
    int asset_dim() const { return asset_dim_; }
    int brownian_dim() const { return brownian_dim_; }
    int input_dim() const { return state_dim_ + (kind_ == PolicyKind::global ? 1 : 0); }

    std::vector<RegressionNets>& nets() { return nets_; }
    const std::vector<RegressionNets>& nets() const { return nets_; }
    RegressionNets& nets_at(int date);
    const RegressionNets& nets_at(int date) const;
    std::size_t parameter_count() const;

    /// Network inputs for exercise interval `date` from states laid out
    /// [state_dim x samples*substeps], sample-major.
    Eigen::MatrixXd interval_inputs(int date, const Eigen::MatrixXd& states) const;
    Heads evaluate(int date, const Eigen::MatrixXd& states) const;

    /// Throws ConfigError when the model's dimensions differ from the policy's.
    void check_model(const PathModel& model) const;

private:
    PolicyKind kind_ = PolicyKind::per_date;
    TimeGrid grid_;
    Payoff payoff_;
    double rate_ = 0.0;
    int state_dim_ = 1;
    int asset_dim_ = 1;
    int brownian_dim_ = 1;
    std::vector<RegressionNets> nets_;
};

/// Network inputs for interval `date`: the states themselves, or for the
/// global network a leading row t/T at each substep time.
Eigen::MatrixXd make_inputs(PolicyKind kind, const TimeGrid& grid, int date, const Eigen::MatrixXd& states);

/// Architecture implied by the model, grid and variations.
NetArchitecture make_architecture(PolicyKind kind, int state_dim, int brownian_dim, const Variations& v,
                                  const std::vector<int>& phi_hidden, const std::vector<int>& psi_hidden);

/// States and increments of one exercise interval for a set of paths,
/// sample-major with `substeps` columns per path.
struct IntervalSlice {
    Eigen::MatrixXd states;  // [state_dim x paths*substeps]
    Eigen::MatrixXd dw;      // [brownian_dim x paths*substeps]
};

IntervalSlice interval_slice(const PathBatch& batch, const TimeGrid& grid, int date,
                             std::span<const std::size_t> paths);
IntervalSlice interval_slice(const PathBatch& batch, const TimeGrid& grid, int date);

/// Payoff at exercise date `date` for the listed paths (all paths when empty).
Eigen::VectorXd payoff_at(const PathBatch& batch, const TimeGrid& grid, const Payoff& payoff, int date,
                          std::span<const std::size_t> paths = {});

/// Network outputs over one exercise interval, per sample.
struct IntervalValues {
    Eigen::VectorXd phi;        // continuation value at the interval start
    Eigen::VectorXd increment;  // martingale increment, including the second-order term
    Eigen::VectorXd hedge;      // tradable gain psi . dw, empty unless requested
};

enum class Rebalancing { none, substeps, exercise_dates };

/// Evaluates the policy on an interval slice in bounded-memory chunks.
IntervalValues evaluate_interval(const Policy& policy, int date, const IntervalSlice& slice,
                                 Rebalancing hedge = Rebalancing::none);
/// Same for a standalone regressor used at exercise interval `date` of `grid`.
IntervalValues evaluate_interval(const RegressionNets& nets, PolicyKind kind, const TimeGrid& grid, int date,
                                 const IntervalSlice& slice, Rebalancing hedge = Rebalancing::none);

/// Exercise when the payoff is positive and at least the continuation value.
inline bool exercise_now(double payoff, double continuation) {
    return payoff > 0.0 && payoff >= continuation;
}

/// Lower-bound recursion: f where exercising, else disc*y_next - increment.
Eigen::VectorXd y_update(const Eigen::VectorXd& y_next, const Eigen::VectorXd& phi,
                         const Eigen::VectorXd& increment, const Eigen::VectorXd& f_now, double disc);

/// Upper-bound recursion: max(f, disc*x_next - increment).
Eigen::VectorXd x_update(const Eigen::VectorXd& x_next, const Eigen::VectorXd& increment,
                         const Eigen::VectorXd& f_now, double disc);

/// Y and X at every exercise date, columns 0..n, for the listed paths.
struct ValueProcesses {
    Eigen::MatrixXd y;  // [paths x (n+1)]
    Eigen::MatrixXd x;  // empty unless requested
};

/// Replays the backward recursions on stored paths with a frozen policy.
ValueProcesses roll_back(const Policy& policy, const PathBatch& batch, std::span<const std::size_t> paths,
                         bool with_upper);

}  // namespace dualstop
