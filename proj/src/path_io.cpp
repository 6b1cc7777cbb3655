#include "dualstop/path_io.hpp"

#include <fstream>

#include "dualstop/binary_io.hpp"

namespace dualstop {

namespace {
constexpr std::uint32_t kVersion = 1;
}

void write_path_batch(const std::filesystem::path& file, const PathBatch& batch) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw FormatError("cannot open " + file.string() + " for writing");
    detail::put_magic(out, "DSPB");
    detail::put<std::uint32_t>(out, kVersion);
    detail::put<std::uint64_t>(out, batch.paths);
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(batch.steps));
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(batch.state_dim));
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(batch.brownian_dim));
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(batch.asset_dim));
    detail::put<std::uint64_t>(out, batch.seed);
    detail::put_span(out, batch.states);
    detail::put_span(out, batch.increments);
    if (!out) throw FormatError("write failed for " + file.string());
}

PathBatch read_path_batch(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw FormatError("cannot open " + file.string());
    detail::expect_magic(in, "DSPB");
    const auto version = detail::get<std::uint32_t>(in);
    if (version != kVersion) throw FormatError("unsupported path cache version " + std::to_string(version));
    PathBatch batch;
    batch.paths = detail::get<std::uint64_t>(in);
    batch.steps = static_cast<int>(detail::get<std::uint32_t>(in));
    batch.state_dim = static_cast<int>(detail::get<std::uint32_t>(in));
    batch.brownian_dim = static_cast<int>(detail::get<std::uint32_t>(in));
    batch.asset_dim = static_cast<int>(detail::get<std::uint32_t>(in));
    batch.seed = detail::get<std::uint64_t>(in);
    batch.states.resize(batch.paths * (batch.steps + 1) * batch.state_dim);
    batch.increments.resize(batch.paths * batch.steps * batch.brownian_dim);
    detail::get_span(in, batch.states);
    detail::get_span(in, batch.increments);
    return batch;
}

}  // namespace dualstop
