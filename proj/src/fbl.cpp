#include "cfmimo/fbl.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "cfmimo/errors.hpp"

namespace cfmimo {

namespace {

constexpr int kMaxBisection = 200;

// Acklam's rational approximation of the standard normal quantile
// (relative error below 1.2e-9), used as the Newton starting point.
double normal_quantile_guess(double p) {
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  if (p < p_low) {
    const double q = std::sqrt(-2 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  if (p <= 1 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
  }
  const double q = std::sqrt(-2 * std::log1p(-p));
  return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
         ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
}

double normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

void require_positive(double x, const char* what) {
  if (!(x > 0)) throw DomainError(std::string(what) + ": argument must be positive");
}

// Bisection on a strictly decreasing function h over (0, upper]; returns x
// with h(x) == target. Runs to floating-point resolution of the bracket.
template <class Fn>
double invert_decreasing(Fn h, double target, double upper, const char* what) {
  double hi = upper;
  double lo = std::min(1.0, upper);
  int expansions = 0;
  while (h(lo) < target) {
    lo *= 0.5;
    if (++expansions > kMaxBisection || lo == 0.0)
      throw InfeasibleError(std::string(what) + ": target " + std::to_string(target) +
                            " not reachable");
  }
  for (int it = 0; it < kMaxBisection; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) return (h(lo) - target <= target - h(hi)) ? lo : hi;
    if (h(mid) >= target)
      lo = mid;
    else
      hi = mid;
  }
  throw InfeasibleError(std::string(what) + ": bisection did not converge");
}

}  // namespace

double q_function(double z) { return 0.5 * std::erfc(z / std::numbers::sqrt2); }

double q_inv(double eps) {
  if (!(eps > 0 && eps < 1)) throw DomainError("q_inv: eps must lie in (0, 1)");
  // Q(z) = eps  <=>  Phi(z) = 1 - eps; solve on the tail that keeps eps exact.
  double z = -normal_quantile_guess(eps);
  for (int i = 0; i < 3; ++i) {
    const double pdf = normal_pdf(z);
    if (pdf == 0.0) break;
    z += (q_function(z) - eps) / pdf;
  }
  return z;
}

FblParams FblParams::make(int blocklength, int pilot_length, double eps) {
  if (blocklength <= 0 || pilot_length < 0 || pilot_length >= blocklength)
    throw DomainError("FblParams: need 0 <= pilot_length < blocklength");
  FblParams p;
  p.blocklength = blocklength;
  p.pilot_length = pilot_length;
  p.eta = static_cast<double>(pilot_length) / blocklength;
  p.eps = eps;
  p.q_inv_eps = q_inv(eps);
  p.alpha = p.q_inv_eps / std::sqrt(blocklength * (1.0 - p.eta));
  if (p.alpha < 0) throw DomainError("FblParams: eps above 0.5 gives a negative dispersion penalty");
  p.x_max = p.alpha > 0 ? zero_rate_margin_inv(p.alpha) : std::numeric_limits<double>::infinity();
  return p;
}

double FblParams::prefactor() const { return (1.0 - eta) / std::numbers::ln2; }

double rate_fbl(double sinr, const FblParams& p) {
  require_positive(sinr, "rate_fbl");
  const double v = 1.0 - 1.0 / ((1.0 + sinr) * (1.0 + sinr));
  return (1.0 - p.eta) * std::log2(1.0 + sinr) -
         std::sqrt((1.0 - p.eta) * v / p.blocklength) * p.q_inv_eps / std::numbers::ln2;
}

double rate_kernel(double x, const FblParams& p) {
  require_positive(x, "rate_kernel");
  return std::log1p(1.0 / x) - p.alpha * std::sqrt((2.0 * x + 1.0) / ((1.0 + x) * (1.0 + x)));
}

double zero_rate_margin(double x) {
  require_positive(x, "zero_rate_margin");
  return (1.0 + x) * std::log1p(1.0 / x) / std::sqrt(2.0 * x + 1.0);
}

double dispersion_root(double chi) {
  require_positive(chi, "dispersion_root");
  const double r = 1.0 / chi + 1.0;
  return std::sqrt((2.0 / chi + 1.0) / (r * r));
}

double zero_rate_margin_inv(double target) {
  require_positive(target, "zero_rate_margin_inv");
  double upper = 1.0;
  int expansions = 0;
  while (zero_rate_margin(upper) > target) {
    upper *= 2.0;
    if (++expansions > kMaxBisection)
      throw InfeasibleError("zero_rate_margin_inv: target too small");
  }
  return invert_decreasing(zero_rate_margin, target, upper, "zero_rate_margin_inv");
}

double rate_kernel_inv(double target, const FblParams& p) {
  if (!(target >= 0)) throw InfeasibleError("rate_kernel_inv: negative rate target");
  if (p.alpha == 0.0) {
    // No dispersion penalty: ln(1 + 1/x) = target in closed form.
    if (target == 0.0) throw InfeasibleError("rate_kernel_inv: zero target without penalty");
    return 1.0 / std::expm1(target);
  }
  if (target == 0.0) return p.x_max;
  return invert_decreasing([&](double x) { return rate_kernel(x, p); }, target, p.x_max,
                           "rate_kernel_inv");
}

RateBound lb_rate(double sinr_hat, const FblParams& p) {
  require_positive(sinr_hat, "lb_rate");
  const double x = 1.0 / sinr_hat;
  RateBound r;
  r.bits = p.prefactor() * rate_kernel(x, p);
  r.in_region = x <= p.x_max * (1.0 + 1e-12);
  return r;
}

double required_sinr(double rate_bits, const FblParams& p) {
  return 1.0 / rate_kernel_inv(rate_bits / p.prefactor(), p);
}

}  // namespace cfmimo
