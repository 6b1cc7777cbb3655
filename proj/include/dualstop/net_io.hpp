#pragma once

#include <filesystem>

#include <string>
#include <vector>

#include "dualstop/policy.hpp"
#include "dualstop/regression.hpp"

namespace dualstop {

/// Versioned flat file for one RegressionNets.
///
/// Layout (little-endian): magic "DSNN", u32 version, u32 input_dim,
/// u32 brownian_dim, u8 shared, u8 second_order, u32 count + u32 widths for the
/// phi hidden layers, the same for psi, the input mean and scale (f64 each,
/// input_dim entries), phi_shift, phi_scale, psi_scale, psi2_scale (f64), then
/// u64 count + f64 parameters of the phi network and of the psi network.
void save_nets(const std::filesystem::path& file, const RegressionNets& nets);

/// Loads a network file; when `expected` is given the stored architecture must match it.
RegressionNets load_nets(const std::filesystem::path& file, const NetArchitecture* expected = nullptr);

/// Extra provenance stored in a policy manifest.
struct PolicyManifest {
    std::string model_hash;
    std::vector<std::string> variations;
};

/// Writes manifest.json plus one network file per regressor into `dir`.
void save_policy(const std::filesystem::path& dir, const Policy& policy, const PolicyManifest& manifest);

struct LoadedPolicy {
    Policy policy;
    PolicyManifest manifest;
};

LoadedPolicy load_policy(const std::filesystem::path& dir);

}  // namespace dualstop
