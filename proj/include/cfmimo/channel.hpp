#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "cfmimo/rng.hpp"

namespace cfmimo {

/// MMSE estimate quality. `lambda(m,k)` is the per-antenna variance of the
/// channel estimate, `error_var = beta - lambda` that of the estimation error.
struct EstimationStats {
  Eigen::MatrixXd lambda;
  Eigen::MatrixXd error_var;
};

/// lambda = K p beta^2 / (K p beta + 1), elementwise; K is the pilot length.
EstimationStats estimation_variance(const Eigen::MatrixXd& beta,
                                    const Eigen::VectorXd& pilot_powers, int pilot_length);

/// One small-scale fading draw. Every vector holds one N x K matrix per AP
/// whose column k is the channel (or estimate, ...) towards device k.
struct ChannelDraw {
  std::vector<Eigen::MatrixXcd> true_channels;  // g
  std::vector<Eigen::MatrixXcd> observations;   // de-spread pilot observation y = g + n
  std::vector<Eigen::MatrixXcd> estimates;      // g_hat
  std::vector<Eigen::MatrixXcd> errors;         // g - g_hat
};

/// Draws i.i.d. CN(0, 1) entries with independent real and imaginary parts of
/// variance 1/2.
void fill_complex_normal(Eigen::MatrixXcd& out, Engine& rng);

/// g_{m,k} = sqrt(beta_{m,k}) h, h ~ CN(0, I_N).
ChannelDraw sample_channel(const Eigen::MatrixXd& beta, int antennas, Engine& rng);
ChannelDraw sample_channel(const Eigen::MatrixXd& beta, int antennas, std::uint64_t seed);

/// Simulates the de-spread pilot observation with noise variance 1/(K p_k)
/// and applies the MMSE scaling. A device with zero pilot power gets a zero
/// estimate.
void estimate_channels(ChannelDraw& draw, const Eigen::MatrixXd& beta,
                       const Eigen::VectorXd& pilot_powers, int pilot_length, Engine& rng);
void estimate_channels(ChannelDraw& draw, const Eigen::MatrixXd& beta,
                       const Eigen::VectorXd& pilot_powers, int pilot_length,
                       std::uint64_t seed);

}  // namespace cfmimo
