#include "dualstop/oracles.hpp"

#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>
#include <numbers>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "dualstop/errors.hpp"

namespace dualstop {

namespace {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

}  // namespace

double black_scholes_call(double spot, double strike, double rate, double vol, double maturity, double q) {
    if (strike <= 0.0) return spot * std::exp(-q * maturity);
    const double fwd_disc = std::exp(-rate * maturity);
    if (vol <= 0.0 || maturity <= 0.0)
        return std::max(spot * std::exp(-q * maturity) - strike * fwd_disc, 0.0);
    const double sd = vol * std::sqrt(maturity);
    const double d1 = (std::log(spot / strike) + (rate - q + 0.5 * vol * vol) * maturity) / sd;
    const double d2 = d1 - sd;
    return spot * std::exp(-q * maturity) * normal_cdf(d1) - strike * fwd_disc * normal_cdf(d2);
}

double black_scholes_put(double spot, double strike, double rate, double vol, double maturity, double q) {
    if (strike <= 0.0) return 0.0;
    const double fwd_disc = std::exp(-rate * maturity);
    if (vol <= 0.0 || maturity <= 0.0)
        return std::max(strike * fwd_disc - spot * std::exp(-q * maturity), 0.0);
    const double sd = vol * std::sqrt(maturity);
    const double d1 = (std::log(spot / strike) + (rate - q + 0.5 * vol * vol) * maturity) / sd;
    const double d2 = d1 - sd;
    return strike * fwd_disc * normal_cdf(-d2) - spot * std::exp(-q * maturity) * normal_cdf(-d1);
}

double binomial_bermudan_put(double spot, double strike, double rate, double vol, double maturity,
                             int exercise_dates, int tree_steps) {
    if (exercise_dates < 1 || tree_steps < 1 || tree_steps % exercise_dates != 0)
        throw ConfigError("binomial: tree_steps must be a positive multiple of exercise_dates");
    if (!(vol > 0.0)) throw ConfigError("binomial: volatility must be positive");
    const double dt = maturity / tree_steps;
    const double u = std::exp(vol * std::sqrt(dt));
    const double d = 1.0 / u;
    const double growth = std::exp(rate * dt);
    const double p = (growth - d) / (u - d);
    if (!(p > 0.0 && p < 1.0)) throw ConfigError("binomial: tree is not arbitrage-free at this resolution");
    const double disc = 1.0 / growth;
    const int stride = tree_steps / exercise_dates;

    std::vector<double> value(tree_steps + 1);
    for (int j = 0; j <= tree_steps; ++j)
        value[j] = std::max(strike - spot * std::pow(u, 2.0 * j - tree_steps), 0.0);
    for (int level = tree_steps - 1; level >= 0; --level) {
        const bool exercisable = level > 0 && level % stride == 0;
        for (int j = 0; j <= level; ++j) {
            double v = disc * (p * value[j + 1] + (1.0 - p) * value[j]);
            if (exercisable) v = std::max(v, strike - spot * std::pow(u, 2.0 * j - level));
            value[j] = v;
        }
    }
    return value[0];
}

namespace {

using cplx = std::complex<double>;

// Characteristic function of log(S_T) under the pricing measure.
cplx heston_cf(const HestonSpec& h, double maturity, cplx u) {
    const cplx i(0.0, 1.0);
    const double kappa = h.mean_reversion;
    const double theta = h.long_term_vol * h.long_term_vol;
    const double xi = h.vol_of_vol;
    const double rho = h.correlation;
    const cplx drift = i * u * (std::log(h.spot) + h.rate * maturity);
    if (xi == 0.0) {
        // Deterministic variance path.
        const double integrated = kappa > 0.0
                                      ? theta * maturity + (h.initial_variance - theta) * (1.0 - std::exp(-kappa * maturity)) / kappa
                                      : h.initial_variance * maturity;
        return std::exp(drift - 0.5 * (i * u + u * u) * integrated);
    }
    // Written in terms of q = (b - d) / xi^2 = -(iu + u^2) / (b + d), which stays
    // accurate as xi -> 0 where the textbook form cancels catastrophically.
    const cplx b = kappa - rho * xi * i * u;
    const cplx d = std::sqrt(b * b + xi * xi * (i * u + u * u));
    const cplx q = -(i * u + u * u) / (b + d);
    const cplx g = q * xi * xi / (b + d);
    const cplx e = std::exp(-d * maturity);
    const cplx w = (1.0 - e) / (1.0 - g);
    const cplx z = g * w;  // (1 - g e) / (1 - g) = 1 + z
    const cplx log1p_over_z = std::abs(z) < 1e-5 ? 1.0 - z / 2.0 + z * z / 3.0 : std::log(1.0 + z) / z;
    const cplx c = kappa * theta * (q * maturity - 2.0 * q / (b + d) * w * log1p_over_z);
    const cplx dd = q * (1.0 - e) / (1.0 - g * e);
    return std::exp(drift + c + dd * h.initial_variance);
}

}  // namespace

double heston_european_call(const HestonSpec& spec, double strike, double maturity) {
    if (!(strike > 0.0) || !(maturity > 0.0)) throw ConfigError("heston oracle: strike and maturity must be positive");
    const cplx i(0.0, 1.0);
    const double log_k = std::log(strike);
    const cplx forward_cf = heston_cf(spec, maturity, -i);  // E[S_T]
    auto p1 = [&](double u) {
        if (u == 0.0) u = 1e-12;
        const cplx v = std::exp(-i * u * log_k) * heston_cf(spec, maturity, u - i) / (i * u * forward_cf);
        return v.real();
    };
    auto p2 = [&](double u) {
        if (u == 0.0) u = 1e-12;
        const cplx v = std::exp(-i * u * log_k) * heston_cf(spec, maturity, u) / (i * u);
        return v.real();
    };
    using boost::math::quadrature::gauss_kronrod;
    constexpr double inf = std::numeric_limits<double>::infinity();
    double err1 = 0.0, err2 = 0.0;
    const double i1 = gauss_kronrod<double, 61>::integrate(p1, 0.0, inf, 15, 1e-12, &err1);
    const double i2 = gauss_kronrod<double, 61>::integrate(p2, 0.0, inf, 15, 1e-12, &err2);
    if (!std::isfinite(i1) || !std::isfinite(i2) || err1 > 1e-6 || err2 > 1e-6)
        throw std::runtime_error("heston oracle: quadrature did not converge");
    const double P1 = 0.5 + i1 / std::numbers::pi;
    const double P2 = 0.5 + i2 / std::numbers::pi;
    return spec.spot * P1 - strike * std::exp(-spec.rate * maturity) * P2;
}

double heston_european_put(const HestonSpec& spec, double strike, double maturity) {
    const double call = heston_european_call(spec, strike, maturity);
    return call - spec.spot + strike * std::exp(-spec.rate * maturity);
}

}  // namespace dualstop
