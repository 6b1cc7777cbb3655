#pragma once

#include <string>
#include <vector>

#include "dualstop/market.hpp"
#include "dualstop/policy.hpp"
#include "dualstop/regression.hpp"

namespace dualstop {

/// Hidden-layer widths. Without split networks (V5) `phi_hidden` is the
/// shared trunk and `psi_hidden` is ignored.
struct NetworkConfig {
    std::vector<int> phi_hidden{50, 50};
    std::vector<int> psi_hidden{50, 30, 30};
};

/// One regression (per date) or one alternation round (global network).
struct TrainRecord {
    int index = 0;               // exercise date, or update number
    int epochs = 0;              // epochs run in this record
    int best_epoch = 0;
    double train_loss = 0.0;     // last training epoch
    double validation_loss = 0.0;
    double validation_lower = 0.0;  // validation mean(Y_0); global network only
    double seconds = 0.0;
};

struct TrainDiagnostics {
    std::string unit;  // "date" or "update"
    std::vector<TrainRecord> records;
    int total_epochs = 0;
    int best_update = 0;      // global network: update whose parameters were kept
    double in_sample_lower = 0.0;
    double in_sample_upper = 0.0;
    double seconds = 0.0;
};

struct TrainResult {
    Policy policy;
    TrainDiagnostics diagnostics;
};

/// Input moments pooled over the listed dates of the listed paths, with the
/// output scales taken from `target`.
Scaling pooled_scaling(PolicyKind kind, const TimeGrid& grid, const PathBatch& batch,
                       std::span<const std::size_t> paths, std::span<const int> dates,
                       const Eigen::VectorXd& target);

/// Regression samples of one interval for the listed paths.
RegressionData interval_data(PolicyKind kind, const TimeGrid& grid, const PathBatch& batch, int date,
                             std::span<const std::size_t> paths, const Eigen::VectorXd& target);

/// Rejects variation sets that do not apply to the method or grid.
void check_variations(PolicyKind kind, const TimeGrid& grid, const Variations& v);

}  // namespace dualstop
