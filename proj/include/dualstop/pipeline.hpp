#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dualstop/config.hpp"

namespace dualstop {

struct RunOptions {
    std::optional<std::uint64_t> seed;              // overrides seeds.master
    std::optional<std::filesystem::path> out;       // overrides output.directory
    bool dry_run = false;
    std::ostream* log = nullptr;                    // progress messages
};

struct RepeatOutcome {
    BoundsEstimate bounds;
    VarianceCheck variance;
    TrainDiagnostics diagnostics;
};

struct RunOutcome {
    std::filesystem::path directory;
    BoundsEstimate bounds;  // pooled over repeats
    std::vector<RepeatOutcome> repeats;
    std::optional<HedgeReport> hedge;  // first repeat only
    std::size_t parameter_count = 0;
};

/// Human-readable plan of a resolved configuration (used by --dry-run).
std::string describe_plan(const RunConfig& cfg);

/// simulate -> train -> evaluate -> hedge, writing artifacts to the output
/// directory. Returns nullopt for a dry run.
std::optional<RunOutcome> run_pipeline(RunConfig cfg, const RunOptions& options);

/// Markdown results table rendered from the artifacts in `dir`.
std::string render_report(const std::filesystem::path& dir);

/// Trains one policy from a configuration (no artifacts written).
TrainResult train_policy(const RunConfig& cfg, int repeat = 0);

}  // namespace dualstop
