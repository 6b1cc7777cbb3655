#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <random>

namespace dualstop {

/// Philox4x32-10 counter-based generator (Salmon et al., Random123).
///
/// Each (key, stream) pair addresses an independent sequence, so every path can
/// own its stream and parallel runs reproduce serial ones bit-for-bit.
/// Satisfies UniformRandomBitGenerator with 64-bit output.
class Philox4x32 {
public:
    using result_type = std::uint64_t;
    using block_type = std::array<std::uint32_t, 4>;
    using key_type = std::array<std::uint32_t, 2>;

    Philox4x32() : Philox4x32(0, 0) {}
    Philox4x32(std::uint64_t key, std::uint64_t stream);

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()();

    /// Raw ten-round bijection, exposed for known-answer tests.
    static block_type bijection(block_type counter, key_type key);

private:
    key_type key_{};
    block_type counter_{};
    block_type buffer_{};
    int used_ = 4;
};

/// Per-path normal stream: a Philox stream plus its own normal distribution
/// state (the distribution caches a spare variate, so it must not be shared).
class PathRng {
public:
    PathRng() = default;
    PathRng(std::uint64_t seed, std::uint64_t path_index) : engine_(seed, path_index) {}

    double normal() { return normal_(engine_); }
    Philox4x32& engine() { return engine_; }

private:
    Philox4x32 engine_;
    std::normal_distribution<double> normal_;
};

/// Stable seed derivation (SplitMix64 finalizer over seed and purpose index).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t purpose, std::uint64_t index = 0);

}  // namespace dualstop
