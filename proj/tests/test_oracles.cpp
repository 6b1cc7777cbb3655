#include <cmath>
#include <complex>

#include "doctest.h"

#include "dualstop/oracles.hpp"

using namespace dualstop;

namespace {

// Reference pricing values frozen from the lattice and quadrature pricers.
constexpr double kBermudan50 = 4.4778699708;  // 50 dates, 10^4 tree steps
constexpr double kHestonPut = 0.935270065824;

HestonSpec heston_reference() { return {100.0, 0.01, 0.1, 2.0, 0.1, 0.2, -0.3}; }

// Lewis' single-integral call formula, Simpson's rule on a truncated range.
double lewis_call(const HestonSpec& h, double strike, double T) {
    using C = std::complex<double>;
    const C i(0.0, 1.0);
    const double theta = h.long_term_vol * h.long_term_vol;
    auto cf = [&](C u) {
        const C a = h.mean_reversion - h.correlation * h.vol_of_vol * i * u;
        const C d = std::sqrt(a * a + h.vol_of_vol * h.vol_of_vol * (i * u + u * u));
        const C g = (a - d) / (a + d);
        const C e = std::exp(-d * T);
        const C cc = h.mean_reversion * theta / (h.vol_of_vol * h.vol_of_vol) *
                     ((a - d) * T - 2.0 * std::log((1.0 - g * e) / (1.0 - g)));
        const C dd = (a - d) / (h.vol_of_vol * h.vol_of_vol) * (1.0 - e) / (1.0 - g * e);
        return std::exp(cc + dd * h.initial_variance);
    };
    const double k = std::log(h.spot / strike) + h.rate * T;
    auto integrand = [&](double u) {
        return std::real(std::exp(i * u * k) * cf(C(u, -0.5))) / (u * u + 0.25);
    };
    const int n = 200000;
    const double upper = 400.0, step = upper / n;
    double sum = integrand(0.0) + integrand(upper);
    for (int j = 1; j < n; ++j) sum += (j % 2 ? 4.0 : 2.0) * integrand(j * step);
    const double integral = sum * step / 3.0;
    return h.spot - std::sqrt(h.spot * strike) * std::exp(-0.5 * h.rate * T) / M_PI * integral;
}

}  // namespace

TEST_CASE("black-scholes put at the reference parameters") {
    CHECK(black_scholes_put(36, 40, 0.06, 0.2, 1.0) == doctest::Approx(3.8443).epsilon(2e-5));
    const double c = black_scholes_call(36, 40, 0.06, 0.2, 1.0, 0.02);
    const double p = black_scholes_put(36, 40, 0.06, 0.2, 1.0, 0.02);
    CHECK(c - p == doctest::Approx(36 * std::exp(-0.02) - 40 * std::exp(-0.06)).epsilon(1e-12));
}

TEST_CASE("binomial tree") {
    SUBCASE("european limit") {
        CHECK(std::abs(binomial_bermudan_put(36, 40, 0.06, 0.2, 1.0, 1, 10000) - 3.8443) < 1e-3);
    }
    SUBCASE("bermudan reference is pinned and converged") {
        CHECK(binomial_bermudan_put(36, 40, 0.06, 0.2, 1.0, 50, 10000) == doctest::Approx(kBermudan50).epsilon(1e-10));
        CHECK(std::abs(binomial_bermudan_put(36, 40, 0.06, 0.2, 1.0, 50, 20000) - kBermudan50) < 1e-4);
        CHECK(kBermudan50 > 4.47);
        CHECK(kBermudan50 < 4.49);
    }
    SUBCASE("zero strike is worthless") { CHECK(binomial_bermudan_put(36, 0, 0.06, 0.2, 1.0, 50, 1000) == 0.0); }
    SUBCASE("early exercise adds value") {
        CHECK(binomial_bermudan_put(36, 40, 0.06, 0.2, 1.0, 50, 1000) >
              binomial_bermudan_put(36, 40, 0.06, 0.2, 1.0, 1, 1000));
    }
}

TEST_CASE("heston european prices") {
    const HestonSpec h = heston_reference();
    SUBCASE("pinned value agrees with an independent integration") {
        CHECK(heston_european_put(h, 100, 1.0) == doctest::Approx(kHestonPut).epsilon(1e-10));
        const double call = lewis_call(h, 100, 1.0);
        CHECK(std::abs(heston_european_call(h, 100, 1.0) - call) < 1e-6);
        CHECK(std::abs(heston_european_call(h, 90, 0.5) - lewis_call(h, 90, 0.5)) < 1e-6);
    }
    SUBCASE("put-call parity") {
        for (double k : {80.0, 100.0, 120.0})
            CHECK(heston_european_call(h, k, 1.0) - heston_european_put(h, k, 1.0) ==
                  doctest::Approx(100.0 - k * std::exp(-0.1)).epsilon(1e-6));
    }
    SUBCASE("vanishing vol of vol recovers black-scholes") {
        HestonSpec flat = h;
        flat.vol_of_vol = 1e-4;
        CHECK(std::abs(heston_european_put(flat, 100, 1.0) - black_scholes_put(100, 100, 0.1, 0.1, 1.0)) < 1e-3);
        flat.vol_of_vol = 1e-9;
        CHECK(std::abs(heston_european_put(flat, 100, 1.0) - black_scholes_put(100, 100, 0.1, 0.1, 1.0)) < 1e-8);
        flat.vol_of_vol = 0.0;
        CHECK(std::abs(heston_european_put(flat, 100, 1.0) - black_scholes_put(100, 100, 0.1, 0.1, 1.0)) < 1e-10);
    }
}
