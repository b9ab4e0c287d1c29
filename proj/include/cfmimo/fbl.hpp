#pragma once

namespace cfmimo {

/// Per-device constants of the finite-blocklength rate approximation.
struct FblParams {
  int blocklength = 0;    // L
  int pilot_length = 0;   // K symbols spent on training
  double eta = 0.0;       // K / L
  double eps = 0.0;       // decoding error probability
  double q_inv_eps = 0.0; // Q^-1(eps)
  double alpha = 0.0;     // Q^-1(eps) / sqrt(L (1 - eta))
  double x_max = 0.0;     // largest inverse SINR with nonnegative rate

  static FblParams make(int blocklength, int pilot_length, double eps);
  /// Rate prefactor (1 - eta) / ln 2 turning nats of rate_kernel into bit/s/Hz.
  double prefactor() const;
};

/// Gaussian tail probability Q(z).
double q_function(double z);
/// Inverse of Q on (0, 1), relative accuracy ~1e-15.
double q_inv(double eps);

/// Normal-approximation achievable rate in bit/s/Hz; may be negative.
double rate_fbl(double sinr, const FblParams& p);

/// Rate kernel in nats as a function of the inverse SINR x:
/// ln(1 + 1/x) - alpha sqrt((2x + 1) / (1 + x)^2).
double rate_kernel(double x, const FblParams& p);
/// Zero-rate margin (1 + x) ln(1 + 1/x) / sqrt(2x + 1); the rate is
/// nonnegative exactly where this is >= alpha. Strictly decreasing.
double zero_rate_margin(double x);
/// sqrt((2/chi + 1) / (1/chi + 1)^2), the square root of the channel dispersion.
double dispersion_root(double chi);

/// x in (0, x_max] with rate_kernel(x) == target. Throws InfeasibleError
/// when the target is not reachable (target <= 0 is only reachable at x_max
/// for target == 0).
double rate_kernel_inv(double target, const FblParams& p);
/// x with zero_rate_margin(x) == target, target > 0.
double zero_rate_margin_inv(double target);

/// Closed-form lower bound on the ergodic rate for an effective SINR.
/// `in_region` is false when 1/sinr lies beyond x_max, where the bound's
/// convexity argument does not hold; `bits` is still the formula value.
struct RateBound {
  double bits = 0.0;
  bool in_region = false;
};
RateBound lb_rate(double sinr_hat, const FblParams& p);

/// SINR that a device needs to reach `rate_bits` (bit/s/Hz):
/// 1 / rate_kernel_inv(rate ln2 / (1 - eta)).
double required_sinr(double rate_bits, const FblParams& p);

}  // namespace cfmimo
