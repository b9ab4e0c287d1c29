#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "cfmimo/channel.hpp"
#include "cfmimo/config.hpp"
#include "cfmimo/sysmodel.hpp"

namespace cfmimo {

/// Pilot powers (one per device) and downlink powers p(m, k), in watts.
/// Downlink entries outside the serving sets must be zero.
struct PowerAllocation {
  Eigen::VectorXd pilot;
  Eigen::MatrixXd downlink;  // M x K
};

/// Spatial degrees of freedom a precoder spends on nulling at an AP serving
/// tau_m devices: 0 for MRT, K for FZF, tau_m for LZF.
int dof_loss(Scheme scheme, int tau_m, int num_devices);

/// Throws ConfigError naming the first AP whose antenna count cannot
/// support the scheme (N > K for FZF, N > tau_m for LZF).
void check_dimensions(Scheme scheme, const ServingSets& sets, int antennas);

/// Interference power reaching device k per watt transmitted by AP m on any
/// of its links (including k's own link, whose leak is estimation error).
double leak_coefficient(Scheme scheme, const ServingSets& sets, const EstimationStats& stats,
                        const Eigen::MatrixXd& beta, int m, int k);

/// Mean powers of the received-signal decomposition for one device, with
/// unit noise. `ui[k']` is the interference from device k'; `ui[k]` is 0.
struct SinrBreakdown {
  double ds = 0.0;
  double ls = 0.0;
  std::vector<double> ui;
  double noise = 1.0;
  double sinr = 0.0;

  double interference() const;
};

/// Closed-form effective SINR decomposition for every device.
std::vector<SinrBreakdown> sinr_breakdown(Scheme scheme, const ServingSets& sets,
                                          const EstimationStats& stats,
                                          const Eigen::MatrixXd& beta,
                                          const Eigen::MatrixXd& downlink, int antennas);

/// Effective SINR per device (the `sinr` field of sinr_breakdown).
Eigen::VectorXd sinr_lb(Scheme scheme, const ServingSets& sets, const EstimationStats& stats,
                        const Eigen::MatrixXd& beta, const Eigen::MatrixXd& downlink,
                        int antennas);

/// Unit mean-square precoders for one draw, one N x K matrix per AP with
/// column k = a_{m,k} (zero for devices the AP does not serve). Returns
/// nullopt when an estimated Gram matrix is too ill-conditioned to invert.
std::optional<std::vector<Eigen::MatrixXcd>> build_precoders(const ChannelDraw& draw,
                                                             Scheme scheme,
                                                             const ServingSets& sets,
                                                             const EstimationStats& stats,
                                                             int antennas);

/// Largest reciprocal condition number treated as singular.
inline constexpr double kMinGramRcond = 1e-12;

}  // namespace cfmimo
