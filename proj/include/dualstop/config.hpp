#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "json.hpp"

#include "dualstop/evaluation.hpp"
#include "dualstop/market.hpp"
#include "dualstop/method_two.hpp"
#include "dualstop/training.hpp"

namespace dualstop {

inline constexpr int kSchemaVersion = 1;

enum class Method { one, two };

struct RunConfig {
    ModelSpec model;
    TimeGrid grid;
    Payoff payoff;

    Method method = Method::one;
    Variations variations;
    NetworkConfig network;
    TrainConfig train;
    AlternationConfig alternation;

    std::size_t training_paths = 50000;  // validation set only, under V3
    std::size_t memory_cap = kDefaultMemoryCap;

    std::size_t eval_paths = 100000;
    int repeats = 1;
    EvalMode eval_mode = EvalMode::forward;
    bool hedging = true;
    std::size_t hedge_paths = 100000;
    Rebalancing rebalancing = Rebalancing::substeps;
    int histogram_bins = 40;

    std::uint64_t master_seed = 1;
    std::filesystem::path output_dir = "runs/out";
    bool save_policy = true;

    PolicyKind policy_kind() const { return method == Method::one ? PolicyKind::per_date : PolicyKind::global; }
    /// Cross-section checks (variation legality, payoff dimension, ...).
    void validate() const;
};

/// Parses and validates a JSON run configuration; errors name the offending
/// field path, e.g. "method.variations".
RunConfig parse_config(const nlohmann::json& doc);
RunConfig load_config(const std::filesystem::path& file);

/// Canonical JSON of the fully resolved configuration (defaults filled in).
nlohmann::json to_json(const RunConfig& cfg);
nlohmann::json model_to_json(const ModelSpec& model);

/// FNV-1a hash of the canonical model JSON, as 16 hex digits.
std::string model_hash(const ModelSpec& model);

/// Fixed purpose indices for seeds derived from the master seed.
enum class SeedPurpose : std::uint64_t {
    training_paths = 100,
    training = 200,
    evaluation = 300,
    hedging = 400,
};

std::uint64_t run_seed(std::uint64_t master, SeedPurpose purpose, int repeat);

}  // namespace dualstop
