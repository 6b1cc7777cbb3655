#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "dualstop/random.hpp"

namespace dualstop {

/// Bermudan exercise grid t_i = i * T / n, each interval split into `substeps`
/// simulation steps.
struct TimeGrid {
    double maturity = 1.0;
    int exercise_dates = 1;
    int substeps = 1;

    void validate() const;
    int total_steps() const { return exercise_dates * substeps; }
    double step_size() const { return maturity / static_cast<double>(total_steps()); }
    double exercise_interval() const { return maturity / static_cast<double>(exercise_dates); }
    double time_at_step(int step) const { return static_cast<double>(step) * step_size(); }
    double exercise_time(int date) const { return time_at_step(date * substeps); }
};

/// Correlated geometric Brownian motions with continuous dividend yields.
struct GbmSpec {
    std::vector<double> spot;
    double rate = 0.0;
    std::vector<double> dividend;   // empty means zero for every asset
    std::vector<double> volatility;
    Eigen::MatrixXd correlation;    // empty means identity

    int dimension() const { return static_cast<int>(spot.size()); }
};

/// Heston stochastic volatility; `long_term_vol` is the level whose square the
/// variance reverts to.
struct HestonSpec {
    double spot = 100.0;
    double initial_variance = 0.01;
    double rate = 0.0;
    double mean_reversion = 0.0;
    double long_term_vol = 0.0;
    double vol_of_vol = 0.0;
    double correlation = 0.0;
};

using ModelSpec = std::variant<GbmSpec, HestonSpec>;

/// Validated model with precomputed stepping constants. Drives both batch
/// simulation and step-at-a-time forward evaluation, so the two agree exactly.
class PathModel {
public:
    explicit PathModel(ModelSpec spec);

    const ModelSpec& spec() const { return spec_; }
    bool is_heston() const { return std::holds_alternative<HestonSpec>(spec_); }
    int state_dim() const { return state_dim_; }
    int brownian_dim() const { return brownian_dim_; }
    /// Leading state components that are traded asset prices.
    int asset_dim() const { return asset_dim_; }
    double rate() const { return rate_; }

    void initial_state(std::span<double> state) const;
    void draw_increments(double h, PathRng& rng, std::span<double> dw) const;
    void advance(double h, std::span<const double> state, std::span<const double> dw,
                 std::span<double> next) const;

private:
    ModelSpec spec_;
    int state_dim_ = 0;
    int brownian_dim_ = 0;
    int asset_dim_ = 0;
    double rate_ = 0.0;
    Eigen::MatrixXd factor_;  // factor * factor^T == correlation
    bool identity_corr_ = true;
};

/// Simulated states and the Brownian increments that produced them.
/// states: [path][step 0..steps][state], increments: [path][step][brownian].
struct PathBatch {
    std::size_t paths = 0;
    int steps = 0;
    int state_dim = 0;
    int brownian_dim = 0;
    int asset_dim = 0;
    std::uint64_t seed = 0;
    std::vector<double> states;
    std::vector<double> increments;

    std::span<const double> state(std::size_t path, int step) const {
        return {states.data() + (path * (steps + 1) + step) * state_dim,
                static_cast<std::size_t>(state_dim)};
    }
    std::span<const double> increment(std::size_t path, int step) const {
        return {increments.data() + (path * steps + step) * brownian_dim,
                static_cast<std::size_t>(brownian_dim)};
    }
};

/// Memory guard for materialized batches, in bytes.
inline constexpr std::size_t kDefaultMemoryCap = std::size_t{2} << 30;

std::size_t path_batch_bytes(const PathModel& model, const TimeGrid& grid, std::size_t paths);

PathBatch simulate(const PathModel& model, const TimeGrid& grid, std::size_t paths,
                   std::uint64_t seed, std::size_t memory_cap = kDefaultMemoryCap);
/// Paths first_path .. first_path+count-1 of the stream addressed by `seed`,
/// stored with local indices 0..count-1.
PathBatch simulate_range(const PathModel& model, const TimeGrid& grid, std::size_t first_path,
                         std::size_t count, std::uint64_t seed, std::size_t memory_cap = kDefaultMemoryCap);
PathBatch simulate_gbm(const GbmSpec& spec, const TimeGrid& grid, std::size_t paths,
                       std::uint64_t seed, std::size_t memory_cap = kDefaultMemoryCap);
PathBatch simulate_heston(const HestonSpec& spec, const TimeGrid& grid, std::size_t paths,
                          std::uint64_t seed, std::size_t memory_cap = kDefaultMemoryCap);

enum class PayoffKind { put, max_call };

struct Payoff {
    PayoffKind kind = PayoffKind::put;
    double strike = 0.0;

    /// Payoff on one row of asset prices.
    double operator()(std::span<const double> assets) const;
    void check_dimension(int asset_dim) const;
};

/// Elementwise payoff over rows of an [N x d] asset matrix.
Eigen::VectorXd payoff_eval(const Payoff& payoff, const Eigen::MatrixXd& assets);

/// Discount factor exp(-r t).
inline double discount(double rate, double t) { return std::exp(-rate * t); }

}  // namespace dualstop
