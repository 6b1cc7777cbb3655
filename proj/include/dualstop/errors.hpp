#pragma once

#include <stdexcept>
#include <string>

namespace dualstop {

/// Invalid model, grid, network or run configuration.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A request would exceed a configured resource limit (memory cap).
class ResourceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or incompatible file on disk.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Training produced a non-finite loss.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(const std::string& what, int epoch, int date_index = -1)
        : std::runtime_error(what), epoch_(epoch), date_index_(date_index) {}

    int epoch() const noexcept { return epoch_; }
    /// Exercise-date index of the failing regression, -1 when not applicable.
    int date_index() const noexcept { return date_index_; }

private:
    int epoch_;
    int date_index_;
};

}  // namespace dualstop
