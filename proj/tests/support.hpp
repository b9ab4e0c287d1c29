#pragma once

#include <Eigen/Dense>

#include "cfmimo/channel.hpp"
#include "cfmimo/optimizer.hpp"
#include "cfmimo/sinr.hpp"
#include "cfmimo/sysmodel.hpp"

namespace cfmimo::testing {

/// Same power on every serving link, full pilot power.
inline PowerAllocation fixed_link_power(const Scenario& sc, double watts) {
  PowerAllocation p;
  p.pilot = fix_pilot_power(sc.cfg);
  p.downlink = Eigen::MatrixXd::Zero(sc.cfg.num_aps, sc.cfg.num_devices);
  for (int k = 0; k < sc.cfg.num_devices; ++k)
    for (int m : sc.sets.serving_aps[k]) p.downlink(m, k) = watts;
  return p;
}

inline EstimationStats stats_for(const Scenario& sc, const PowerAllocation& p) {
  return estimation_variance(sc.net.beta, p.pilot, sc.cfg.num_devices);
}

inline Scenario small_scenario(double threshold, std::uint64_t seed, int m = 4, int n = 8,
                               int k = 3) {
  auto cfg = SystemConfig::defaults(m, n, k);
  cfg.selection_threshold = threshold;
  return make_scenario(cfg, seed);
}

}  // namespace cfmimo::testing
