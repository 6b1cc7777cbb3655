#pragma once

#include <cstdint>

#include "dualstop/training.hpp"

namespace dualstop {

/// Backward induction with one regressor per exercise date t_0..t_{n-1}.
/// Paths are split once into training and validation sets; Y and X are
/// updated on every path after each regression.
TrainResult train_method_one(const PathBatch& paths, const PathModel& model, const Payoff& payoff,
                             const TimeGrid& grid, const NetworkConfig& net, const TrainConfig& train_cfg,
                             const Variations& variations, std::uint64_t seed);

}  // namespace dualstop
