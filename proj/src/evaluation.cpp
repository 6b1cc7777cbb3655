#include "dualstop/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "dualstop/errors.hpp"

namespace dualstop {

namespace {

// Discount factors to every exercise date.
std::vector<double> date_discounts(const Policy& policy) {
    const auto& grid = policy.grid();
    std::vector<double> d(grid.exercise_dates + 1);
    for (int i = 0; i <= grid.exercise_dates; ++i) d[i] = discount(policy.rate(), grid.exercise_time(i));
    return d;
}

struct Block {
    std::size_t first = 0;
    std::size_t count = 0;
};

// Writes the per-path results of one block into `out` starting at block.first.
void forward_block(const Policy& policy, const PathModel& model, std::uint64_t seed, const Block& block,
                   Rebalancing rebalancing, PathEstimates& out) {
    const auto& grid = policy.grid();
    const int n = grid.exercise_dates;
    const int m = grid.substeps;
    const int ds = model.state_dim();
    const int dw = model.brownian_dim();
    const int da = model.asset_dim();
    const double h = grid.step_size();
    const auto count = static_cast<Eigen::Index>(block.count);
    const std::vector<double> disc = date_discounts(policy);

    std::vector<PathRng> rngs;
    rngs.reserve(block.count);
    for (std::size_t b = 0; b < block.count; ++b) rngs.emplace_back(seed, block.first + b);
    Eigen::MatrixXd current(ds, count);
    for (Eigen::Index b = 0; b < count; ++b) model.initial_state({current.col(b).data(), static_cast<std::size_t>(ds)});

    Eigen::VectorXd cv = Eigen::VectorXd::Zero(count);       // control variate up to the stopping date
    Eigen::VectorXd dual = Eigen::VectorXd::Zero(count);     // full martingale up to the current date
    Eigen::VectorXd gain = Eigen::VectorXd::Zero(count);
    Eigen::VectorXd upper = Eigen::VectorXd::Constant(count, -std::numeric_limits<double>::infinity());
    Eigen::VectorXd worst = Eigen::VectorXd::Constant(count, std::numeric_limits<double>::infinity());
    std::vector<char> stopped(block.count, 0);

    auto visit_date = [&](int i, const Eigen::MatrixXd& states, Eigen::Index stride, const Eigen::VectorXd* phi) {
        for (Eigen::Index b = 0; b < count; ++b) {
            const double f = policy.payoff()({states.col(b * stride).data(), static_cast<std::size_t>(da)});
            const double df = disc[i] * f;
            upper[b] = std::max(upper[b], df - dual[b]);
            worst[b] = std::min(worst[b], gain[b] - df);
            const auto p = static_cast<Eigen::Index>(block.first) + b;
            if (!stopped[b] && (phi == nullptr || exercise_now(f, (*phi)[b]))) {
                stopped[b] = 1;
                out.stop_date[p] = i;
                out.plain[p] = df;
                out.lower[p] = df - cv[b];
                out.gain_at_stop[p] = gain[b];
            }
        }
    };

    IntervalSlice slice;
    slice.states.resize(ds, count * m);
    slice.dw.resize(dw, count * m);
    Eigen::VectorXd next(ds);
    for (int i = 0; i < n; ++i) {
        for (Eigen::Index b = 0; b < count; ++b) {
            for (int k = 0; k < m; ++k) {
                const Eigen::Index c = b * m + k;
                slice.states.col(c) = current.col(b);
                std::span<double> inc(slice.dw.col(c).data(), static_cast<std::size_t>(dw));
                model.draw_increments(h, rngs[b], inc);
                model.advance(h, {current.col(b).data(), static_cast<std::size_t>(ds)}, inc,
                              {next.data(), static_cast<std::size_t>(ds)});
                current.col(b) = next;
            }
        }
        const IntervalValues values = evaluate_interval(policy, i, slice, rebalancing);
        if (i > 0) visit_date(i, slice.states, m, &values.phi);
        for (Eigen::Index b = 0; b < count; ++b) {
            const double increment = disc[i] * values.increment[b];
            dual[b] += increment;
            if (!stopped[b]) cv[b] += increment;
            gain[b] += disc[i] * values.hedge[b];
        }
    }
    visit_date(n, current, 1, nullptr);
    out.upper.segment(static_cast<Eigen::Index>(block.first), count) = upper;
    out.worst.segment(static_cast<Eigen::Index>(block.first), count) = worst;
}

void backward_block(const Policy& policy, const PathModel& model, std::uint64_t seed, const Block& block,
                    Rebalancing rebalancing, std::size_t memory_cap, PathEstimates& out) {
    const auto& grid = policy.grid();
    const int n = grid.exercise_dates;
    const PathBatch batch = simulate_range(model, grid, block.first, block.count, seed, memory_cap);
    const auto count = static_cast<Eigen::Index>(block.count);
    const double step_disc = discount(policy.rate(), grid.exercise_interval());
    const std::vector<double> disc = date_discounts(policy);

    std::vector<IntervalValues> values(n);
    std::vector<Eigen::VectorXd> payoff(n + 1);
    for (int i = 0; i < n; ++i) values[i] = evaluate_interval(policy, i, interval_slice(batch, grid, i), rebalancing);
    for (int i = 1; i <= n; ++i) payoff[i] = payoff_at(batch, grid, policy.payoff(), i);

    Eigen::VectorXd y = payoff[n];
    Eigen::VectorXd x = payoff[n];
    std::vector<int> stop(block.count, n);
    for (int i = n - 1; i >= 1; --i) {
        for (Eigen::Index b = 0; b < count; ++b)
            if (exercise_now(payoff[i][b], values[i].phi[b])) stop[b] = i;
        y = y_update(y, values[i].phi, values[i].increment, payoff[i], step_disc);
        x = x_update(x, values[i].increment, payoff[i], step_disc);
    }
    y = step_disc * y - values[0].increment;
    x = step_disc * x - values[0].increment;

    // Hedge gains accumulate forward in time.
    Eigen::VectorXd gain = Eigen::VectorXd::Zero(count);
    Eigen::VectorXd worst = Eigen::VectorXd::Constant(count, std::numeric_limits<double>::infinity());
    const auto first = static_cast<Eigen::Index>(block.first);
    for (int i = 0; i <= n; ++i) {
        if (i > 0) {
            for (Eigen::Index b = 0; b < count; ++b) {
                worst[b] = std::min(worst[b], gain[b] - disc[i] * payoff[i][b]);
                if (stop[b] == i) {
                    out.gain_at_stop[first + b] = gain[b];
                    out.plain[first + b] = disc[i] * payoff[i][b];
                }
            }
        }
        if (i < n) gain += disc[i] * values[i].hedge;
    }
    out.lower.segment(first, count) = y;
    out.upper.segment(first, count) = x;
    out.worst.segment(first, count) = worst;
    std::copy(stop.begin(), stop.end(), out.stop_date.begin() + first);
}

double mean_of(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v) {
    if (v.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    const double mu = mean_of(v);
    double acc = 0.0;
    for (double x : v) acc += (x - mu) * (x - mu);
    return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

double quantile(std::vector<double>& sorted, double q) {
    if (sorted.empty()) return 0.0;
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double w = pos - static_cast<double>(lo);
    return (1.0 - w) * sorted[lo] + w * sorted[hi];
}

}  // namespace

PathEstimates evaluate_policy(const Policy& policy, const PathModel& model, std::size_t paths, std::uint64_t seed,
                              const EvalOptions& options) {
    policy.check_model(model);
    policy.payoff().check_dimension(model.asset_dim());
    if (paths < 1) throw ConfigError("evaluation: at least one path required");
    if (options.block_paths < 1) throw ConfigError("evaluation: block size must be positive");
    const Rebalancing rebalancing =
        options.rebalancing == Rebalancing::none ? Rebalancing::substeps : options.rebalancing;

    PathEstimates out;
    const auto n = static_cast<Eigen::Index>(paths);
    out.lower.resize(n);
    out.upper.resize(n);
    out.plain.resize(n);
    out.gain_at_stop.resize(n);
    out.worst.resize(n);
    out.stop_date.assign(paths, policy.grid().exercise_dates);

    const std::size_t blocks = (paths + options.block_paths - 1) / options.block_paths;
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(blocks); ++k) {
        Block block;
        block.first = static_cast<std::size_t>(k) * options.block_paths;
        block.count = std::min(options.block_paths, paths - block.first);
        if (options.mode == EvalMode::forward)
            forward_block(policy, model, seed, block, rebalancing, out);
        else
            backward_block(policy, model, seed, block, rebalancing, options.memory_cap, out);
    }
    return out;
}

double sample_variance(const Eigen::VectorXd& x) {
    if (x.size() < 2) return 0.0;
    const double mu = x.mean();
    return (x.array() - mu).square().sum() / static_cast<double>(x.size() - 1);
}

double BoundsEstimate::lower_sd() const { return sd_of(repeat_lower); }

double BoundsEstimate::upper_sd() const { return sd_of(repeat_upper); }

double BoundsEstimate::gap_sd() const {
    std::vector<double> gaps(repeat_lower.size());
    for (std::size_t i = 0; i < gaps.size(); ++i) gaps[i] = repeat_upper[i] - repeat_lower[i];
    return sd_of(gaps);
}

BoundsEstimate bounds_from(const PathEstimates& e) {
    BoundsEstimate b;
    const double n = static_cast<double>(e.size());
    b.n_eval = e.size();
    b.n_repeats = 1;
    b.lower_mean = e.lower.mean();
    b.upper_mean = e.upper.mean();
    b.gap_mean = b.upper_mean - b.lower_mean;
    b.lower_se = std::sqrt(sample_variance(e.lower) / n);
    b.upper_se = std::sqrt(sample_variance(e.upper) / n);
    b.gap_se = std::sqrt(sample_variance(e.upper - e.lower) / n);
    b.repeat_lower = {b.lower_mean};
    b.repeat_upper = {b.upper_mean};
    return b;
}

BoundsEstimate combine_bounds(const std::vector<BoundsEstimate>& runs) {
    if (runs.empty()) throw ConfigError("combine_bounds: no runs");
    if (runs.size() == 1) return runs.front();
    BoundsEstimate b;
    const double r = static_cast<double>(runs.size());
    double vl = 0.0, vu = 0.0, vg = 0.0;
    for (const auto& run : runs) {
        b.repeat_lower.insert(b.repeat_lower.end(), run.repeat_lower.begin(), run.repeat_lower.end());
        b.repeat_upper.insert(b.repeat_upper.end(), run.repeat_upper.begin(), run.repeat_upper.end());
        vl += run.lower_se * run.lower_se;
        vu += run.upper_se * run.upper_se;
        vg += run.gap_se * run.gap_se;
    }
    b.n_eval = runs.front().n_eval;
    b.n_repeats = static_cast<int>(b.repeat_lower.size());
    b.lower_mean = mean_of(b.repeat_lower);
    b.upper_mean = mean_of(b.repeat_upper);
    b.gap_mean = b.upper_mean - b.lower_mean;
    b.lower_se = std::sqrt(vl) / r;
    b.upper_se = std::sqrt(vu) / r;
    b.gap_se = std::sqrt(vg) / r;
    return b;
}

BoundsEstimate estimate_bounds(const Policy& policy, const PathModel& model, std::size_t paths,
                               const std::vector<std::uint64_t>& seeds, const EvalOptions& options) {
    if (seeds.empty()) throw ConfigError("estimate_bounds: at least one seed required");
    std::vector<BoundsEstimate> runs;
    for (auto seed : seeds) runs.push_back(bounds_from(evaluate_policy(policy, model, paths, seed, options)));
    return combine_bounds(runs);
}

SampleSummary summarize(const Eigen::VectorXd& sample) {
    SampleSummary s;
    if (sample.size() == 0) return s;
    std::vector<double> sorted(sample.data(), sample.data() + sample.size());
    std::sort(sorted.begin(), sorted.end());
    s.mean = sample.mean();
    s.sd = std::sqrt(sample_variance(sample));
    s.se = s.sd / std::sqrt(static_cast<double>(sample.size()));
    s.min = sorted.front();
    s.max = sorted.back();
    s.q01 = quantile(sorted, 0.01);
    s.q05 = quantile(sorted, 0.05);
    s.q50 = quantile(sorted, 0.50);
    s.q95 = quantile(sorted, 0.95);
    s.q99 = quantile(sorted, 0.99);
    return s;
}

HedgeReport hedge_report(const PathEstimates& e, double v0, int bins) {
    if (bins < 1) throw ConfigError("hedging: histogram needs at least one bin");
    HedgeReport r;
    r.v0 = v0;
    r.eps1 = (v0 + e.gain_at_stop.array() - e.plain.array()).matrix();
    r.eps2 = (v0 + e.worst.array()).matrix();
    r.eps1_summary = summarize(r.eps1);
    r.eps2_summary = summarize(r.eps2);

    double lo = std::min(r.eps1_summary.min, r.eps2_summary.min);
    double hi = std::max(r.eps1_summary.max, r.eps2_summary.max);
    if (!(hi > lo)) {
        lo -= 0.5;
        hi += 0.5;
    }
    const double width = (hi - lo) / bins;
    r.bin_edges.resize(bins + 1);
    for (int k = 0; k <= bins; ++k) r.bin_edges[k] = lo + k * width;
    r.bin_edges.back() = hi;
    r.eps1_counts.assign(bins, 0);
    r.eps2_counts.assign(bins, 0);
    auto bin_of = [&](double x) {
        const auto k = static_cast<int>((x - lo) / width);
        return std::clamp(k, 0, bins - 1);
    };
    for (Eigen::Index p = 0; p < r.eps1.size(); ++p) {
        ++r.eps1_counts[bin_of(r.eps1[p])];
        ++r.eps2_counts[bin_of(r.eps2[p])];
    }
    return r;
}

HedgeReport hedging_errors(const Policy& policy, const PathModel& model, std::size_t paths, std::uint64_t seed,
                           double v0, const EvalOptions& options) {
    return hedge_report(evaluate_policy(policy, model, paths, seed, options), v0);
}

VarianceCheck variance_check(const PathEstimates& e) {
    return {sample_variance(e.plain), sample_variance(e.lower)};
}

VarianceCheck variance_check(const Policy& policy, const PathModel& model, std::size_t paths, std::uint64_t seed,
                             const EvalOptions& options) {
    return variance_check(evaluate_policy(policy, model, paths, seed, options));
}

}  // namespace dualstop
