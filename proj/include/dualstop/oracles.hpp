#pragma once

#include "dualstop/market.hpp"

namespace dualstop {

/// Black-Scholes European prices with continuous dividend yield q.
double black_scholes_put(double spot, double strike, double rate, double vol, double maturity, double q = 0.0);
double black_scholes_call(double spot, double strike, double rate, double vol, double maturity, double q = 0.0);

/// Cox-Ross-Rubinstein tree for a put exercisable on `exercise_dates` equally
/// spaced dates (the last being maturity). `tree_steps` must be a multiple of
/// `exercise_dates`; date i maps to tree level i * tree_steps / exercise_dates.
double binomial_bermudan_put(double spot, double strike, double rate, double vol, double maturity,
                             int exercise_dates, int tree_steps);

/// Heston European prices by integrating the characteristic function
/// (log-stable form) with adaptive Gauss-Kronrod quadrature.
double heston_european_call(const HestonSpec& spec, double strike, double maturity);
double heston_european_put(const HestonSpec& spec, double strike, double maturity);

}  // namespace dualstop
