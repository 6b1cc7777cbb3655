#include "dualstop/config.hpp"

#include <cstdio>
#include <fstream>
#include <optional>
#include <set>

#include "dualstop/errors.hpp"

namespace dualstop {

using nlohmann::json;

namespace {

// Typed access to one JSON object that remembers which keys were read, so
// misspelled keys are reported instead of silently ignored.
class Section {
public:
    Section(const json& node, std::string path) : node_(node), path_(std::move(path)) {
        if (!node_.is_object()) throw ConfigError(path_ + ": expected an object");
    }

    bool has(const std::string& key) const { return node_.contains(key); }
    std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    Section child(const std::string& key) {
        used_.insert(key);
        if (!node_.contains(key)) throw ConfigError(at(key) + ": missing section");
        return Section(node_.at(key), at(key));
    }

    std::optional<Section> optional_child(const std::string& key) {
        if (!node_.contains(key)) return std::nullopt;
        return child(key);
    }

    double number(const std::string& key) {
        const json& v = require(key);
        if (!v.is_number()) throw ConfigError(at(key) + ": expected a number");
        return v.get<double>();
    }
    double number(const std::string& key, double fallback) { return has(key) ? number(key) : mark(key, fallback); }

    std::int64_t integer(const std::string& key) {
        const json& v = require(key);
        if (!v.is_number_integer()) throw ConfigError(at(key) + ": expected an integer");
        return v.get<std::int64_t>();
    }
    std::int64_t integer(const std::string& key, std::int64_t fallback) {
        return has(key) ? integer(key) : mark(key, fallback);
    }

    std::uint64_t unsigned_integer(const std::string& key) {
        const json& v = require(key);
        if (!v.is_number_unsigned()) throw ConfigError(at(key) + ": expected a non-negative integer");
        return v.get<std::uint64_t>();
    }

    std::size_t count(const std::string& key, std::size_t fallback) {
        if (!has(key)) return mark(key, fallback);
        const std::int64_t v = integer(key);
        if (v < 1) throw ConfigError(at(key) + ": must be >= 1");
        return static_cast<std::size_t>(v);
    }

    bool boolean(const std::string& key, bool fallback) {
        if (!has(key)) return mark(key, fallback);
        const json& v = require(key);
        if (!v.is_boolean()) throw ConfigError(at(key) + ": expected true or false");
        return v.get<bool>();
    }

    std::string string(const std::string& key) {
        const json& v = require(key);
        if (!v.is_string()) throw ConfigError(at(key) + ": expected a string");
        return v.get<std::string>();
    }
    std::string string(const std::string& key, const std::string& fallback) {
        return has(key) ? string(key) : mark(key, fallback);
    }

    std::vector<double> numbers(const std::string& key) {
        const json& v = require(key);
        if (!v.is_array()) throw ConfigError(at(key) + ": expected an array of numbers");
        std::vector<double> out;
        for (const auto& e : v) {
            if (!e.is_number()) throw ConfigError(at(key) + ": expected an array of numbers");
            out.push_back(e.get<double>());
        }
        return out;
    }

    std::vector<int> widths(const std::string& key, const std::vector<int>& fallback) {
        if (!has(key)) return mark(key, fallback);
        const json& v = require(key);
        if (!v.is_array()) throw ConfigError(at(key) + ": expected an array of layer widths");
        std::vector<int> out;
        for (const auto& e : v) {
            if (!e.is_number_integer() || e.get<int>() < 1)
                throw ConfigError(at(key) + ": layer widths must be positive integers");
            out.push_back(e.get<int>());
        }
        return out;
    }

    std::vector<std::string> strings(const std::string& key) {
        if (!has(key)) return mark(key, std::vector<std::string>{});
        const json& v = require(key);
        if (!v.is_array()) throw ConfigError(at(key) + ": expected an array of strings");
        std::vector<std::string> out;
        for (const auto& e : v) {
            if (!e.is_string()) throw ConfigError(at(key) + ": expected an array of strings");
            out.push_back(e.get<std::string>());
        }
        return out;
    }

    Eigen::MatrixXd matrix(const std::string& key) {
        const json& v = require(key);
        if (!v.is_array()) throw ConfigError(at(key) + ": expected an array of rows");
        const auto rows = static_cast<Eigen::Index>(v.size());
        Eigen::MatrixXd m(rows, rows);
        for (Eigen::Index i = 0; i < rows; ++i) {
            const json& row = v[static_cast<std::size_t>(i)];
            if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != rows)
                throw ConfigError(at(key) + ": expected a square matrix");
            for (Eigen::Index j = 0; j < rows; ++j) {
                const json& e = row[static_cast<std::size_t>(j)];
                if (!e.is_number()) throw ConfigError(at(key) + ": entries must be numbers");
                m(i, j) = e.get<double>();
            }
        }
        return m;
    }

    /// Rejects keys that were never read.
    void finish() const {
        for (const auto& [key, value] : node_.items()) {
            if (!used_.count(key)) throw ConfigError(at(key) + ": unknown field");
        }
    }

private:
    const json& require(const std::string& key) {
        used_.insert(key);
        if (!node_.contains(key)) throw ConfigError(at(key) + ": missing field");
        return node_.at(key);
    }
    template <class T>
    T mark(const std::string& key, T value) {
        used_.insert(key);
        return value;
    }

    const json& node_;
    std::string path_;
    std::set<std::string> used_;
};

template <class E>
E choose(const std::string& path, const std::string& value,
         std::initializer_list<std::pair<const char*, E>> options) {
    std::string allowed;
    for (const auto& [name, e] : options) {
        if (value == name) return e;
        allowed += allowed.empty() ? name : std::string(", ") + name;
    }
    throw ConfigError(path + ": '" + value + "' is not one of " + allowed);
}

ModelSpec parse_model(Section s) {
    const std::string type = s.string("type");
    if (type == "gbm") {
        GbmSpec g;
        g.spot = s.numbers("spot");
        g.rate = s.number("rate");
        g.volatility = s.numbers("sigma");
        if (s.has("dividend")) g.dividend = s.numbers("dividend");
        if (s.has("correlation")) g.correlation = s.matrix("correlation");
        for (double v : g.volatility)
            if (!(v > 0.0)) throw ConfigError(s.at("sigma") + ": volatilities must be positive");
        s.finish();
        return g;
    }
    if (type == "heston") {
        HestonSpec h;
        h.spot = s.number("s0");
        h.initial_variance = s.number("v0");
        h.rate = s.number("rate");
        h.mean_reversion = s.number("lambda");
        h.long_term_vol = s.number("sigma");
        h.vol_of_vol = s.number("xi");
        h.correlation = s.number("rho");
        s.finish();
        return h;
    }
    throw ConfigError(s.at("type") + ": '" + type + "' is not one of gbm, heston");
}

}  // namespace

void RunConfig::validate() const {
    grid.validate();
    const PathModel m(model);  // validates the model parameters
    payoff.check_dimension(m.asset_dim());
    check_variations(policy_kind(), grid, variations);
    train.validate();
    alternation.validate(grid.exercise_dates);
    if (variations.time_subset && alternation.time_subset == TimeSubsetMode::all)
        throw ConfigError("method.alternation.time_subset: V2 needs 'grid' or 'random'");
    if (training_paths < 2) throw ConfigError("simulation.paths: at least two paths required");
    if (repeats < 1) throw ConfigError("evaluation.repeats: must be >= 1");
    if (histogram_bins < 1) throw ConfigError("evaluation.histogram_bins: must be >= 1");
    if (payoff.strike < 0.0) throw ConfigError("payoff.strike: must be >= 0");
}

RunConfig parse_config(const json& doc) {
    Section root(doc, "");
    RunConfig cfg;
    if (root.has("schema_version")) {
        const auto v = root.integer("schema_version");
        if (v != kSchemaVersion)
            throw ConfigError("schema_version: unsupported version " + std::to_string(v));
    }

    cfg.model = parse_model(root.child("model"));

    {
        Section s = root.child("grid");
        cfg.grid.maturity = s.number("maturity");
        cfg.grid.exercise_dates = static_cast<int>(s.integer("exercise_dates"));
        cfg.grid.substeps = static_cast<int>(s.integer("substeps", 1));
        s.finish();
    }
    {
        Section s = root.child("payoff");
        cfg.payoff.kind = choose<PayoffKind>(s.at("kind"), s.string("kind"),
                                             {{"put", PayoffKind::put}, {"max_call", PayoffKind::max_call}});
        cfg.payoff.strike = s.number("strike");
        s.finish();
    }
    {
        Section s = root.child("method");
        cfg.method = choose<Method>(s.at("name"), s.string("name"), {{"one", Method::one}, {"two", Method::two}});
        cfg.variations = Variations::parse(s.strings("variations"));
        cfg.network.phi_hidden = s.widths("phi_hidden", cfg.network.phi_hidden);
        cfg.network.psi_hidden = s.widths("psi_hidden", cfg.network.psi_hidden);
        if (auto t = s.optional_child("train")) {
            auto& tc = cfg.train;
            tc.learning_rate = t->number("learning_rate", tc.learning_rate);
            tc.lr_decay = t->number("lr_decay", tc.lr_decay);
            tc.batch_size = static_cast<int>(t->integer("batch_size", tc.batch_size));
            tc.max_epochs = static_cast<int>(t->integer("max_epochs", tc.max_epochs));
            tc.patience = static_cast<int>(t->integer("patience", tc.patience));
            tc.validation_fraction = t->number("validation_fraction", tc.validation_fraction);
            tc.adam.beta1 = t->number("beta1", tc.adam.beta1);
            tc.adam.beta2 = t->number("beta2", tc.adam.beta2);
            tc.adam.epsilon = t->number("epsilon", tc.adam.epsilon);
            t->finish();
        }
        if (auto a = s.optional_child("alternation")) {
            auto& ac = cfg.alternation;
            ac.epochs_per_update = static_cast<int>(a->integer("epochs_per_update", ac.epochs_per_update));
            ac.stagnation_patience = static_cast<int>(a->integer("stagnation_patience", ac.stagnation_patience));
            ac.max_updates = static_cast<int>(a->integer("max_updates", ac.max_updates));
            ac.time_subset = choose<TimeSubsetMode>(
                a->at("time_subset"), a->string("time_subset", "all"),
                {{"all", TimeSubsetMode::all}, {"grid", TimeSubsetMode::grid}, {"random", TimeSubsetMode::random}});
            ac.time_subset_size = static_cast<int>(a->integer("time_subset_size", ac.time_subset_size));
            ac.fresh_batches = static_cast<int>(a->integer("fresh_batches", ac.fresh_batches));
            ac.fresh_batch_size = a->count("fresh_batch_size", ac.fresh_batch_size);
            ac.track_upper = a->boolean("track_upper", ac.track_upper);
            a->finish();
        }
        s.finish();
    }
    {
        Section s = root.child("simulation");
        cfg.training_paths = s.count("paths", cfg.training_paths);
        cfg.memory_cap = s.count("memory_cap_mb", cfg.memory_cap >> 20) << 20;
        s.finish();
    }
    if (auto s = root.optional_child("evaluation")) {
        cfg.eval_paths = s->count("paths", cfg.eval_paths);
        cfg.repeats = static_cast<int>(s->integer("repeats", cfg.repeats));
        cfg.eval_mode = choose<EvalMode>(s->at("mode"), s->string("mode", "forward"),
                                         {{"forward", EvalMode::forward}, {"backward", EvalMode::backward}});
        cfg.hedging = s->boolean("hedging", cfg.hedging);
        cfg.hedge_paths = s->count("hedge_paths", cfg.hedge_paths);
        cfg.rebalancing = choose<Rebalancing>(
            s->at("rebalancing"), s->string("rebalancing", "substeps"),
            {{"substeps", Rebalancing::substeps}, {"exercise_dates", Rebalancing::exercise_dates}});
        cfg.histogram_bins = static_cast<int>(s->integer("histogram_bins", cfg.histogram_bins));
        s->finish();
    }
    {
        Section s = root.child("seeds");
        cfg.master_seed = s.unsigned_integer("master");
        s.finish();
    }
    if (auto s = root.optional_child("output")) {
        cfg.output_dir = s->string("directory", cfg.output_dir.string());
        cfg.save_policy = s->boolean("save_policy", cfg.save_policy);
        s->finish();
    }
    root.finish();
    cfg.validate();
    return cfg;
}

RunConfig load_config(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot open config file " + file.string());
    json doc;
    try {
        doc = json::parse(in, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::parse_error& e) {
        throw ConfigError(file.string() + ": " + e.what());
    }
    return parse_config(doc);
}

json model_to_json(const ModelSpec& model) {
    if (const auto* g = std::get_if<GbmSpec>(&model)) {
        json corr = json::array();
        const PathModel resolved(*g);
        const auto& r = std::get<GbmSpec>(resolved.spec());
        for (Eigen::Index i = 0; i < r.correlation.rows(); ++i) {
            json row = json::array();
            for (Eigen::Index j = 0; j < r.correlation.cols(); ++j) row.push_back(r.correlation(i, j));
            corr.push_back(row);
        }
        return {{"type", "gbm"},        {"spot", r.spot},      {"rate", r.rate},
                {"dividend", r.dividend}, {"sigma", r.volatility}, {"correlation", corr}};
    }
    const auto& h = std::get<HestonSpec>(model);
    return {{"type", "heston"}, {"s0", h.spot},           {"v0", h.initial_variance}, {"rate", h.rate},
            {"lambda", h.mean_reversion}, {"sigma", h.long_term_vol}, {"xi", h.vol_of_vol}, {"rho", h.correlation}};
}

json to_json(const RunConfig& cfg) {
    const auto subset_name = [](TimeSubsetMode m) {
        return m == TimeSubsetMode::all ? "all" : m == TimeSubsetMode::grid ? "grid" : "random";
    };
    json doc;
    doc["schema_version"] = kSchemaVersion;
    doc["model"] = model_to_json(cfg.model);
    doc["grid"] = {{"maturity", cfg.grid.maturity},
                   {"exercise_dates", cfg.grid.exercise_dates},
                   {"substeps", cfg.grid.substeps}};
    doc["payoff"] = {{"kind", cfg.payoff.kind == PayoffKind::put ? "put" : "max_call"},
                     {"strike", cfg.payoff.strike}};
    doc["method"] = {
        {"name", cfg.method == Method::one ? "one" : "two"},
        {"variations", cfg.variations.labels()},
        {"phi_hidden", cfg.network.phi_hidden},
        {"psi_hidden", cfg.network.psi_hidden},
        {"train",
         {{"learning_rate", cfg.train.learning_rate},
          {"lr_decay", cfg.train.lr_decay},
          {"batch_size", cfg.train.batch_size},
          {"max_epochs", cfg.train.max_epochs},
          {"patience", cfg.train.patience},
          {"validation_fraction", cfg.train.validation_fraction},
          {"beta1", cfg.train.adam.beta1},
          {"beta2", cfg.train.adam.beta2},
          {"epsilon", cfg.train.adam.epsilon}}},
        {"alternation",
         {{"epochs_per_update", cfg.alternation.epochs_per_update},
          {"stagnation_patience", cfg.alternation.stagnation_patience},
          {"max_updates", cfg.alternation.max_updates},
          {"time_subset", subset_name(cfg.alternation.time_subset)},
          {"time_subset_size", cfg.alternation.time_subset_size},
          {"fresh_batches", cfg.alternation.fresh_batches},
          {"fresh_batch_size", cfg.alternation.fresh_batch_size},
          {"track_upper", cfg.alternation.track_upper}}}};
    doc["simulation"] = {{"paths", cfg.training_paths}, {"memory_cap_mb", cfg.memory_cap >> 20}};
    doc["evaluation"] = {{"paths", cfg.eval_paths},
                         {"repeats", cfg.repeats},
                         {"mode", cfg.eval_mode == EvalMode::forward ? "forward" : "backward"},
                         {"hedging", cfg.hedging},
                         {"hedge_paths", cfg.hedge_paths},
                         {"rebalancing", cfg.rebalancing == Rebalancing::exercise_dates ? "exercise_dates" : "substeps"},
                         {"histogram_bins", cfg.histogram_bins}};
    doc["seeds"] = {{"master", cfg.master_seed}};
    doc["output"] = {{"directory", cfg.output_dir.string()}, {"save_policy", cfg.save_policy}};
    return doc;
}

std::string model_hash(const ModelSpec& model) {
    const std::string text = model_to_json(model).dump();
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::uint64_t run_seed(std::uint64_t master, SeedPurpose purpose, int repeat) {
    return derive_seed(master, static_cast<std::uint64_t>(purpose), static_cast<std::uint64_t>(repeat));
}

}  // namespace dualstop
