#pragma once

#include <cstdint>
#include <functional>

#include "dualstop/training.hpp"

namespace dualstop {

enum class TimeSubsetMode { all, grid, random };

struct AlternationConfig {
    int epochs_per_update = 1;
    int stagnation_patience = 8;
    int max_updates = 200;
    TimeSubsetMode time_subset = TimeSubsetMode::all;  // V2
    int time_subset_size = 0;                          // k dates when not `all`
    int fresh_batches = 5;                             // V3: batches between updates
    std::size_t fresh_batch_size = 10000;              // V3: paths per batch
    bool track_upper = false;  // also roll back X on the validation paths each update

    void validate(int exercise_dates) const;
};

/// Exercise dates used for training. Grid mode takes n-1, n-1-s, ... with
/// s = ceil(n/k); random mode draws k distinct dates. Sorted ascending.
std::vector<int> select_training_times(int n, TimeSubsetMode mode, int k, std::uint64_t seed);

/// Streams fresh training paths with seeds drawn from a master sequence.
class FreshPathSource {
public:
    FreshPathSource(const PathModel& model, TimeGrid grid, std::uint64_t seed,
                    std::size_t memory_cap = kDefaultMemoryCap);
    PathBatch next(std::size_t paths);
    std::size_t batches_drawn() const { return drawn_; }

private:
    const PathModel* model_;
    TimeGrid grid_;
    std::uint64_t seed_;
    std::size_t memory_cap_;
    std::size_t drawn_ = 0;
};

/// Draws `batches` batches of `batch_size` paths one at a time and hands each
/// to `consume`; a batch is released before the next is simulated.
void refresh_training_data(FreshPathSource& source, int batches, std::size_t batch_size,
                           const std::function<void(const PathBatch&)>& consume);

/// One global regressor on (t/T, state), alternating training epochs with
/// strategy updates. With V3 `paths` is the validation set and training data
/// is streamed; otherwise `paths` is split into training and validation.
TrainResult train_method_two(const PathBatch& paths, const PathModel& model, const Payoff& payoff,
                             const TimeGrid& grid, const NetworkConfig& net, const TrainConfig& train_cfg,
                             const AlternationConfig& alt, const Variations& variations, std::uint64_t seed);

}  // namespace dualstop
