#include "gpcon/mathfn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gpcon {

namespace {
constexpr double kSqrt2 = 1.4142135623730951;
constexpr double kInvSqrt2 = 0.7071067811865476;
constexpr double kSqrtPi = 1.7724538509055160;
constexpr double kLog2Pi = 1.8378770664093455;
}  // namespace

double norm_pdf(double x) { return std::exp(-0.5 * x * x - 0.5 * kLog2Pi); }

double norm_cdf(double x) { return 0.5 * std::erfc(-x * kInvSqrt2); }

double erfcx(double x) {
  if (x < 0.0) {
    // erfcx(-x) = 2 exp(x^2) - erfcx(x); overflows to +inf like exp does
    return 2.0 * std::exp(x * x) - erfcx(-x);
  }
  if (x <= 25.0) return std::exp(x * x) * std::erfc(x);
  // asymptotic series 1/(x sqrt(pi)) * (1 - 1/(2x^2) + 3/(4x^4) - ...)
  const double ix2 = 1.0 / (x * x);
  const double s =
      1.0 + ix2 * (-0.5 + ix2 * (0.75 + ix2 * (-1.875 + ix2 * 6.5625)));
  return s / (x * kSqrtPi);
}

double norm_logcdf(double x) {
  if (x > -1.0) return std::log(norm_cdf(x));
  // Phi(x) = 0.5 exp(-x^2/2) erfcx(-x/sqrt(2)) for x < 0
  return -0.5 * x * x + std::log(0.5 * erfcx(-x * kInvSqrt2));
}

double norm_quantile(double p) {
  if (!(p >= 0.0 && p <= 1.0))
    throw std::invalid_argument("norm_quantile: p outside [0, 1]");
  if (p == 0.0) return -kInf;
  if (p == 1.0) return kInf;

  // Acklam's rational approximation, then one Halley refinement.
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};

  const double plow = 0.02425;
  double x;
  if (p < plow) {
    double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - plow) {
    double q = p - 0.5;
    double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) *
        q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }

  const double e = norm_cdf(x) - p;
  const double u = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
  x -= u / (1.0 + 0.5 * x * u);
  return x;
}

double norm_mass(double lo, double hi) {
  if (!(lo <= hi)) throw std::invalid_argument("norm_mass: lo > hi");
  // erfc is decreasing, so the difference is a sum of same-sign tails
  const double m = 0.5 * (std::erfc(lo * kInvSqrt2) - std::erfc(hi * kInvSqrt2));
  return std::clamp(m, 0.0, 1.0);
}

double log_norm_mass(double lo, double hi) {
  if (!(lo <= hi)) throw std::invalid_argument("log_norm_mass: lo > hi");
  if (lo == -kInf && hi == kInf) return 0.0;
  if (lo == hi) return -kInf;
  if (lo < 0.0 && hi > 0.0) return std::log(norm_mass(lo, hi));

  // Interval confined to one tail: reflect into the lower tail where the
  // mass is Phi(b) - Phi(a) with b <= 0, then difference in log space.
  double a = lo, b = hi;
  if (lo >= 0.0) {
    a = -hi;
    b = -lo;
  }
  const double lb = norm_logcdf(b);
  if (a == -kInf) return lb;
  const double la = norm_logcdf(a);
  const double diff = -std::expm1(la - lb);  // 1 - exp(la - lb), in (0, 1]
  return diff > 0.0 ? lb + std::log(diff) : -kInf;
}

}  // namespace gpcon
