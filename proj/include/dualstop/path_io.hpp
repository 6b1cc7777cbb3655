#pragma once

#include <filesystem>

#include "dualstop/market.hpp"

namespace dualstop {

/// Flat binary cache of a PathBatch.
///
/// Layout (little-endian): magic "DSPB", u32 version, u64 paths, u32 steps,
/// u32 state_dim, u32 brownian_dim, u32 asset_dim, u64 seed, then the states
/// as f64 [path][step][state] followed by the increments as f64
/// [path][step][brownian].
void write_path_batch(const std::filesystem::path& file, const PathBatch& batch);
PathBatch read_path_batch(const std::filesystem::path& file);

}  // namespace dualstop
