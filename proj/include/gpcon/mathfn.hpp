#pragma once

#include <limits>

// Scalar normal-distribution utilities shared by the samplers, the moment
// formulas and the probability estimators. Tail-sensitive quantities go
// through erfc/erfcx so they stay usable far beyond 8 sigma.

namespace gpcon {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

double norm_pdf(double x);
double norm_cdf(double x);

/// log Phi(x), stable for x << 0 (down to log-probabilities around -1e5).
double norm_logcdf(double x);

/// Inverse standard normal cdf. Returns -inf/+inf at p = 0/1.
double norm_quantile(double p);

/// Scaled complementary error function exp(x^2) erfc(x).
double erfcx(double x);

/// P(lo < Z < hi) for standard normal Z. Exact 1.0 for (-inf, inf).
double norm_mass(double lo, double hi);

/// log P(lo < Z < hi), computed on the complementary side when the
/// interval sits in a far tail. Exact 0.0 for (-inf, inf).
double log_norm_mass(double lo, double hi);

}  // namespace gpcon
