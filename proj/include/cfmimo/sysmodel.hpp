#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "cfmimo/config.hpp"

namespace cfmimo {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// One random drop of APs and devices. `beta(m, k)` is the linear large-scale
/// gain between AP m and device k divided by the noise power, so downstream
/// powers are plain watts against unit-variance noise.
struct NetworkRealization {
  std::vector<Point> ap_positions;
  std::vector<Point> device_positions;
  Eigen::MatrixXd beta;  // M x K
};

/// User-centric association. Index lists are sorted ascending.
struct ServingSets {
  std::vector<std::vector<int>> serving_aps;     // M_k, per device
  std::vector<std::vector<int>> served_devices;  // U_m, per AP
  std::vector<int> tau;                          // |U_m|

  int num_aps() const { return static_cast<int>(served_devices.size()); }
  int num_devices() const { return static_cast<int>(serving_aps.size()); }
  bool serves(int m, int k) const { return membership_[index(m, k)] != 0; }

  static ServingSets from_membership(const std::vector<std::vector<int>>& serving_aps, int num_aps);

 private:
  std::size_t index(int m, int k) const {
    return static_cast<std::size_t>(m) * serving_aps.size() + static_cast<std::size_t>(k);
  }
  std::vector<char> membership_;
};

/// Three-slope path loss in dB for a horizontal distance in metres.
double path_loss_db(double distance_m, const SystemConfig& cfg);
/// Frequency/height dependent constant of the path-loss model, dB.
double path_loss_constant_db(const SystemConfig& cfg);
/// Thermal noise power B * k_B * T0 * NF in watts.
double noise_power_w(const SystemConfig& cfg);

/// AP grid positions: centres of a ceil(sqrt(M))^2 grid, row-major, first M.
std::vector<Point> ap_grid(int num_aps, double area_side);

/// APs on the grid, devices i.i.d. uniform over the square.
NetworkRealization deploy(const SystemConfig& cfg, std::uint64_t seed);
/// Gain matrix for given positions (used by deploy and by tests).
Eigen::MatrixXd large_scale_gains(const std::vector<Point>& aps, const std::vector<Point>& devices,
                                  const SystemConfig& cfg);

/// For each device, takes APs in descending gain order (ties: lower index)
/// until their share of the device's total gain reaches `threshold`.
ServingSets select_aps(const Eigen::MatrixXd& beta, double threshold);

/// Everything needed to evaluate one scenario.
struct Scenario {
  SystemConfig cfg;
  NetworkRealization net;
  ServingSets sets;
};

/// validate + deploy(cfg, seed) + select_aps.
Scenario make_scenario(const SystemConfig& cfg, std::uint64_t seed);
/// Restricts a scenario to a subset of its devices (round-robin groups).
Scenario subset_devices(const Scenario& sc, const std::vector<int>& devices);

}  // namespace cfmimo
