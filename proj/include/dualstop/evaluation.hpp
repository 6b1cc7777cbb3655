#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "dualstop/market.hpp"
#include "dualstop/policy.hpp"

namespace dualstop {

enum class EvalMode { forward, backward };

struct EvalOptions {
    EvalMode mode = EvalMode::forward;
    /// Rebalance the hedge at every substep or only on exercise dates.
    Rebalancing rebalancing = Rebalancing::substeps;
    std::size_t block_paths = 8192;
    std::size_t memory_cap = kDefaultMemoryCap;
};

/// Per-path quantities of one out-of-sample evaluation.
struct PathEstimates {
    Eigen::VectorXd lower;         // Y_0: discounted stopped payoff minus the control variate
    Eigen::VectorXd upper;         // X_0: dual-martingale upper-bound summand
    Eigen::VectorXd plain;         // discounted stopped payoff without control variate
    Eigen::VectorXd gain_at_stop;  // discounted hedge gain up to the stopping date
    Eigen::VectorXd worst;         // min over exercise dates of (gain - discounted payoff)
    std::vector<int> stop_date;    // exercise-date index of the stopping time, n when held to maturity

    std::size_t size() const { return static_cast<std::size_t>(lower.size()); }
};

/// Simulates `paths` fresh paths from `seed` and applies the frozen policy.
/// Forward mode steps each block of paths one exercise interval at a time;
/// backward mode materializes each block and replays the training recursions.
/// Both consume identical random streams.
PathEstimates evaluate_policy(const Policy& policy, const PathModel& model, std::size_t paths,
                              std::uint64_t seed, const EvalOptions& options = {});

struct BoundsEstimate {
    double lower_mean = 0.0;
    double lower_se = 0.0;   // Monte Carlo standard error of lower_mean
    double upper_mean = 0.0;
    double upper_se = 0.0;
    double gap_mean = 0.0;
    double gap_se = 0.0;     // paired standard error of the per-path difference
    std::size_t n_eval = 0;  // paths per repeat
    int n_repeats = 0;
    std::vector<double> repeat_lower;
    std::vector<double> repeat_upper;

    /// Cross-repeat standard deviations; NaN with fewer than two repeats.
    double lower_sd() const;
    double upper_sd() const;
    double gap_sd() const;
};

BoundsEstimate bounds_from(const PathEstimates& estimates);
/// Pools single-run estimates (equal path counts) into one with repeat statistics.
BoundsEstimate combine_bounds(const std::vector<BoundsEstimate>& runs);

BoundsEstimate estimate_bounds(const Policy& policy, const PathModel& model, std::size_t paths,
                               const std::vector<std::uint64_t>& seeds, const EvalOptions& options = {});

struct SampleSummary {
    double mean = 0.0;
    double sd = 0.0;
    double se = 0.0;
    double min = 0.0;
    double max = 0.0;
    double q01 = 0.0;
    double q05 = 0.0;
    double q50 = 0.0;
    double q95 = 0.0;
    double q99 = 0.0;
};

SampleSummary summarize(const Eigen::VectorXd& sample);

struct HedgeReport {
    double v0 = 0.0;
    Eigen::VectorXd eps1;  // total hedging error at the stopping time
    Eigen::VectorXd eps2;  // worst hedging error over the exercise dates
    SampleSummary eps1_summary;
    SampleSummary eps2_summary;
    std::vector<double> bin_edges;  // bins + 1 edges shared by both histograms
    std::vector<std::size_t> eps1_counts;
    std::vector<std::size_t> eps2_counts;
};

HedgeReport hedge_report(const PathEstimates& estimates, double v0, int bins = 40);

HedgeReport hedging_errors(const Policy& policy, const PathModel& model, std::size_t paths, std::uint64_t seed,
                           double v0, const EvalOptions& options = {});

struct VarianceCheck {
    double var_plain = 0.0;  // sample variance of the discounted stopped payoff
    double var_cv = 0.0;     // sample variance of the control-variated lower-bound summand
};

VarianceCheck variance_check(const PathEstimates& estimates);
VarianceCheck variance_check(const Policy& policy, const PathModel& model, std::size_t paths, std::uint64_t seed,
                             const EvalOptions& options = {});

/// Unbiased sample variance.
double sample_variance(const Eigen::VectorXd& x);

}  // namespace dualstop
