#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "cfmimo/fbl.hpp"
#include "cfmimo/sinr.hpp"
#include "cfmimo/sysmodel.hpp"

namespace cfmimo {

/// Sample statistics of the received-signal decomposition for one device.
/// `ds` is the analytic desired-signal power; everything else is averaged
/// over draws, with standard errors of the mean.
struct McDeviceStats {
  double ergodic_rate = 0.0;  // mean finite-blocklength rate, bit/s/Hz
  double ergodic_rate_se = 0.0;
  double ds = 0.0;
  double signal_mean = 0.0;   // sample mean of the effective gain (real part)
  double ls_mean = 0.0;
  double ls_se = 0.0;
  std::vector<double> ui_mean;
  std::vector<double> ui_se;
  double inv_sinr_mean = 0.0;
};

struct McResult {
  std::vector<McDeviceStats> devices;
  int draws = 0;
  int rejected_draws = 0;  // ill-conditioned Gram matrices, resampled
};

/// Received-signal terms of one channel draw. `gains(k', k)` is the
/// effective gain sum_{m in M_k'} sqrt(p_{m,k'}) g_{m,k}^T a*_{m,k'}, so
/// the diagonal is each device's own signal and off-diagonals are UI terms.
struct DrawTerms {
  Eigen::MatrixXcd gains;
  int rejected = 0;
};

/// Samples one draw (channel, pilot noise, precoders) from `rng`,
/// resampling until the precoders exist.
DrawTerms simulate_draw(const Scenario& sc, Scheme scheme, const PowerAllocation& powers,
                        const EstimationStats& stats, Engine& rng);

/// Ergodic-rate oracle over `n_draws` independent draws. Draw i uses
/// substream(seed, i); draws are split across OpenMP threads in fixed chunks
/// and reduced pairwise, so the result does not depend on the thread count.
McResult mc_ergodic_rate(const Scenario& sc, Scheme scheme, const PowerAllocation& powers,
                         const std::vector<FblParams>& fbl, int n_draws, std::uint64_t seed);

/// Single-threaded reference with plain running sums; agrees with
/// mc_ergodic_rate up to summation order.
McResult mc_ergodic_rate_reference(const Scenario& sc, Scheme scheme,
                                   const PowerAllocation& powers,
                                   const std::vector<FblParams>& fbl, int n_draws,
                                   std::uint64_t seed);

}  // namespace cfmimo
