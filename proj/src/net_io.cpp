#include "dualstop/net_io.hpp"

#include <cstdio>
#include <fstream>

#include "dualstop/binary_io.hpp"
#include "json.hpp"

namespace dualstop {

namespace {

constexpr std::uint32_t kVersion = 1;

void put_widths(std::ostream& out, const std::vector<int>& widths) {
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(widths.size()));
    for (int w : widths) detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(w));
}

std::vector<int> get_widths(std::istream& in) {
    const auto n = detail::get<std::uint32_t>(in);
    if (n > 1024) throw FormatError("network file: implausible layer count");
    std::vector<int> widths(n);
    for (auto& w : widths) w = static_cast<int>(detail::get<std::uint32_t>(in));
    return widths;
}

void put_vector(std::ostream& out, const Eigen::VectorXd& v) {
    detail::put<std::uint64_t>(out, static_cast<std::uint64_t>(v.size()));
    detail::put_span(out, {v.data(), static_cast<std::size_t>(v.size())});
}

Eigen::VectorXd get_vector(std::istream& in, std::size_t expected) {
    const auto n = detail::get<std::uint64_t>(in);
    if (n != expected) throw FormatError("network file: parameter count mismatch");
    Eigen::VectorXd v(static_cast<Eigen::Index>(n));
    detail::get_span(in, {v.data(), static_cast<std::size_t>(n)});
    return v;
}

}  // namespace

void save_nets(const std::filesystem::path& file, const RegressionNets& nets) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw FormatError("cannot open " + file.string() + " for writing");
    const auto& arch = nets.architecture();
    const auto& sc = nets.scaling();
    detail::put_magic(out, "DSNN");
    detail::put<std::uint32_t>(out, kVersion);
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(arch.input_dim));
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(arch.brownian_dim));
    detail::put<std::uint8_t>(out, arch.shared ? 1 : 0);
    detail::put<std::uint8_t>(out, arch.second_order ? 1 : 0);
    put_widths(out, arch.phi_hidden);
    put_widths(out, arch.psi_hidden);
    detail::put_span(out, {sc.input_mean.data(), static_cast<std::size_t>(sc.input_mean.size())});
    detail::put_span(out, {sc.input_scale.data(), static_cast<std::size_t>(sc.input_scale.size())});
    for (double v : {sc.phi_shift, sc.phi_scale, sc.psi_scale, sc.psi2_scale}) detail::put<double>(out, v);
    put_vector(out, nets.phi_net().parameters());
    put_vector(out, nets.psi_net().empty() ? Eigen::VectorXd() : nets.psi_net().parameters());
    if (!out) throw FormatError("write failed for " + file.string());
}

RegressionNets load_nets(const std::filesystem::path& file, const NetArchitecture* expected) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw FormatError("cannot open " + file.string());
    detail::expect_magic(in, "DSNN");
    const auto version = detail::get<std::uint32_t>(in);
    if (version != kVersion) throw FormatError("unsupported network file version " + std::to_string(version));
    NetArchitecture arch;
    arch.input_dim = static_cast<int>(detail::get<std::uint32_t>(in));
    arch.brownian_dim = static_cast<int>(detail::get<std::uint32_t>(in));
    arch.shared = detail::get<std::uint8_t>(in) != 0;
    arch.second_order = detail::get<std::uint8_t>(in) != 0;
    arch.phi_hidden = get_widths(in);
    arch.psi_hidden = get_widths(in);
    if (expected && !(arch == *expected))
        throw FormatError("network file " + file.string() + ": architecture does not match the expected one");

    Scaling sc;
    sc.input_mean.resize(arch.input_dim);
    sc.input_scale.resize(arch.input_dim);
    detail::get_span(in, {sc.input_mean.data(), static_cast<std::size_t>(arch.input_dim)});
    detail::get_span(in, {sc.input_scale.data(), static_cast<std::size_t>(arch.input_dim)});
    sc.phi_shift = detail::get<double>(in);
    sc.phi_scale = detail::get<double>(in);
    sc.psi_scale = detail::get<double>(in);
    sc.psi2_scale = detail::get<double>(in);

    Mlp phi(arch.phi_layers());
    phi.parameters() = get_vector(in, phi.parameter_count());
    Mlp psi;
    if (!arch.shared) {
        psi = Mlp(arch.psi_layers());
        psi.parameters() = get_vector(in, psi.parameter_count());
    } else {
        get_vector(in, 0);
    }
    return RegressionNets(std::move(arch), std::move(phi), std::move(psi), std::move(sc));
}

namespace {

constexpr int kManifestVersion = 1;

std::string net_file_name(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "net_%03zu.bin", index);
    return buf;
}

}  // namespace

void save_policy(const std::filesystem::path& dir, const Policy& policy, const PolicyManifest& manifest) {
    std::filesystem::create_directories(dir);
    nlohmann::json doc;
    doc["schema_version"] = kManifestVersion;
    doc["kind"] = policy.kind() == PolicyKind::global ? "global" : "per_date";
    doc["grid"] = {{"maturity", policy.grid().maturity},
                   {"exercise_dates", policy.grid().exercise_dates},
                   {"substeps", policy.grid().substeps}};
    doc["payoff"] = {{"kind", policy.payoff().kind == PayoffKind::put ? "put" : "max_call"},
                     {"strike", policy.payoff().strike}};
    doc["rate"] = policy.rate();
    doc["state_dim"] = policy.state_dim();
    doc["asset_dim"] = policy.asset_dim();
    doc["brownian_dim"] = policy.brownian_dim();
    doc["model_hash"] = manifest.model_hash;
    doc["variations"] = manifest.variations;
    doc["parameter_count"] = policy.parameter_count();
    nlohmann::json files = nlohmann::json::array();
    for (std::size_t i = 0; i < policy.nets().size(); ++i) {
        const std::string name = net_file_name(i);
        save_nets(dir / name, policy.nets()[i]);
        files.push_back(name);
    }
    doc["networks"] = files;
    std::ofstream out(dir / "manifest.json");
    if (!out) throw FormatError("cannot write " + (dir / "manifest.json").string());
    out << doc.dump(2) << '\n';
}

LoadedPolicy load_policy(const std::filesystem::path& dir) {
    std::ifstream in(dir / "manifest.json");
    if (!in) throw FormatError("missing policy manifest in " + dir.string());
    try {
        const nlohmann::json doc = nlohmann::json::parse(in);
        if (doc.at("schema_version").get<int>() != kManifestVersion)
            throw FormatError("unsupported policy manifest version");
        const auto kind = doc.at("kind").get<std::string>() == "global" ? PolicyKind::global : PolicyKind::per_date;
        TimeGrid grid{doc.at("grid").at("maturity").get<double>(), doc.at("grid").at("exercise_dates").get<int>(),
                      doc.at("grid").at("substeps").get<int>()};
        Payoff payoff{doc.at("payoff").at("kind").get<std::string>() == "put" ? PayoffKind::put : PayoffKind::max_call,
                      doc.at("payoff").at("strike").get<double>()};
        std::vector<RegressionNets> nets;
        for (const auto& name : doc.at("networks")) {
            // Every regressor of a policy shares the first one's architecture.
            const NetArchitecture first = nets.empty() ? NetArchitecture{} : nets.front().architecture();
            nets.push_back(load_nets(dir / name.get<std::string>(), nets.empty() ? nullptr : &first));
        }
        LoadedPolicy loaded{Policy(kind, grid, payoff, doc.at("rate").get<double>(), doc.at("state_dim").get<int>(),
                                   doc.at("asset_dim").get<int>(), doc.at("brownian_dim").get<int>(), std::move(nets)),
                            {doc.at("model_hash").get<std::string>(),
                             doc.at("variations").get<std::vector<std::string>>()}};
        return loaded;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("corrupt policy manifest in " + dir.string() + ": " + e.what());
    }
}

}  // namespace dualstop
