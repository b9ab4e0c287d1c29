#include "cfmimo/sysmodel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cfmimo/errors.hpp"
#include "cfmimo/rng.hpp"

namespace cfmimo {

namespace {
constexpr double kBoltzmann = 1.381e-23;  // J/K
constexpr double kNoiseTemperature = 290.0;  // K
}  // namespace

ServingSets ServingSets::from_membership(const std::vector<std::vector<int>>& serving_aps,
                                         int num_aps) {
  ServingSets s;
  const int k_count = static_cast<int>(serving_aps.size());
  s.serving_aps = serving_aps;
  s.served_devices.assign(static_cast<std::size_t>(num_aps), {});
  s.membership_.assign(static_cast<std::size_t>(num_aps) * serving_aps.size(), 0);
  for (int k = 0; k < k_count; ++k) {
    auto& aps = s.serving_aps[k];
    std::sort(aps.begin(), aps.end());
    for (int m : aps) {
      if (m < 0 || m >= num_aps) throw DomainError("serving AP index out of range");
      s.membership_[s.index(m, k)] = 1;
    }
  }
  for (int m = 0; m < num_aps; ++m)
    for (int k = 0; k < k_count; ++k)
      if (s.serves(m, k)) s.served_devices[m].push_back(k);
  s.tau.resize(static_cast<std::size_t>(num_aps));
  for (int m = 0; m < num_aps; ++m) s.tau[m] = static_cast<int>(s.served_devices[m].size());
  return s;
}

double path_loss_constant_db(const SystemConfig& cfg) {
  const double lf = std::log10(cfg.carrier_freq);
  return 46.3 + 33.9 * lf - 13.82 * std::log10(cfg.ap_height) -
         (1.1 * lf - 0.7) * cfg.device_height + (1.56 * lf - 0.8);
}

double path_loss_db(double distance_m, const SystemConfig& cfg) {
  if (!(distance_m > 0)) throw DomainError("path_loss_db: distance must be positive");
  // The model is written for distances in km.
  const double d = distance_m / 1000.0;
  const double d0 = cfg.d0 / 1000.0;
  const double d1 = cfg.d1 / 1000.0;
  const double base = path_loss_constant_db(cfg);
  if (d > d1) return base + 35.0 * std::log10(d);
  if (d <= d0) return base + 15.0 * std::log10(d1) + 20.0 * std::log10(d0);
  return base + 15.0 * std::log10(d1) + 20.0 * std::log10(d);
}

double noise_power_w(const SystemConfig& cfg) {
  if (!(cfg.bandwidth > 0)) throw DomainError("noise_power_w: bandwidth must be positive");
  return cfg.bandwidth * kBoltzmann * kNoiseTemperature * std::pow(10.0, cfg.noise_figure / 10.0);
}

std::vector<Point> ap_grid(int num_aps, double area_side) {
  const int side = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(num_aps)) - 1e-12));
  const double cell = area_side / side;
  std::vector<Point> out;
  out.reserve(static_cast<std::size_t>(num_aps));
  for (int m = 0; m < num_aps; ++m) {
    const int row = m / side;
    const int col = m % side;
    out.push_back({(col + 0.5) * cell, (row + 0.5) * cell});
  }
  return out;
}

Eigen::MatrixXd large_scale_gains(const std::vector<Point>& aps, const std::vector<Point>& devices,
                                  const SystemConfig& cfg) {
  const double pn = noise_power_w(cfg);
  Eigen::MatrixXd beta(static_cast<Eigen::Index>(aps.size()),
                       static_cast<Eigen::Index>(devices.size()));
  for (std::size_t m = 0; m < aps.size(); ++m) {
    for (std::size_t k = 0; k < devices.size(); ++k) {
      double d = std::hypot(aps[m].x - devices[k].x, aps[m].y - devices[k].y);
      // Everything inside d0 has the same loss; this also covers d == 0.
      d = std::max(d, cfg.d0);
      beta(m, k) = std::pow(10.0, -path_loss_db(d, cfg) / 10.0) / pn;
    }
  }
  return beta;
}

NetworkRealization deploy(const SystemConfig& cfg, std::uint64_t seed) {
  NetworkRealization net;
  net.ap_positions = ap_grid(cfg.num_aps, cfg.area_side);
  Engine rng(seed);
  std::uniform_real_distribution<double> coord(0.0, cfg.area_side);
  net.device_positions.reserve(static_cast<std::size_t>(cfg.num_devices));
  for (int k = 0; k < cfg.num_devices; ++k) {
    const double x = coord(rng);
    const double y = coord(rng);
    net.device_positions.push_back({x, y});
  }
  net.beta = large_scale_gains(net.ap_positions, net.device_positions, cfg);
  return net;
}

ServingSets select_aps(const Eigen::MatrixXd& beta, double threshold) {
  if (!(threshold > 0 && threshold <= 1))
    throw DomainError("select_aps: threshold must lie in (0, 1]");
  if ((beta.array() <= 0).any()) throw DomainError("select_aps: gains must be positive");
  const int m_count = static_cast<int>(beta.rows());
  const int k_count = static_cast<int>(beta.cols());
  std::vector<std::vector<int>> serving(static_cast<std::size_t>(k_count));
  std::vector<int> order(static_cast<std::size_t>(m_count));
  for (int k = 0; k < k_count; ++k) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return beta(a, k) > beta(b, k); });
    if (threshold >= 1.0) {
      serving[k] = order;
      continue;
    }
    // Total summed in the same order so the final partial sum equals it exactly.
    double total = 0.0;
    for (int m : order) total += beta(m, k);
    double acc = 0.0;
    for (int m : order) {
      acc += beta(m, k);
      serving[k].push_back(m);
      if (acc / total >= threshold) break;
    }
  }
  return ServingSets::from_membership(serving, m_count);
}

Scenario make_scenario(const SystemConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  Scenario sc;
  sc.cfg = cfg;
  sc.net = deploy(cfg, seed);
  sc.sets = select_aps(sc.net.beta, cfg.selection_threshold);
  return sc;
}

Scenario subset_devices(const Scenario& sc, const std::vector<int>& devices) {
  Scenario out;
  out.cfg = sc.cfg;
  out.cfg.num_devices = static_cast<int>(devices.size());
  auto pick = [&](const std::vector<double>& v) {
    std::vector<double> r;
    for (int k : devices) r.push_back(v.at(static_cast<std::size_t>(k)));
    return r;
  };
  out.cfg.dep = pick(sc.cfg.dep);
  out.cfg.rate_req = pick(sc.cfg.rate_req);
  out.cfg.weights = pick(sc.cfg.weights);
  out.cfg.pilot_power_max = pick(sc.cfg.pilot_power_max);
  out.net.ap_positions = sc.net.ap_positions;
  out.net.beta.resize(sc.net.beta.rows(), static_cast<Eigen::Index>(devices.size()));
  std::vector<std::vector<int>> serving;
  for (std::size_t i = 0; i < devices.size(); ++i) {
    const int k = devices[i];
    out.net.device_positions.push_back(sc.net.device_positions.at(static_cast<std::size_t>(k)));
    out.net.beta.col(static_cast<Eigen::Index>(i)) = sc.net.beta.col(k);
    serving.push_back(sc.sets.serving_aps.at(static_cast<std::size_t>(k)));
  }
  out.sets = ServingSets::from_membership(serving, sc.sets.num_aps());
  return out;
}

}  // namespace cfmimo
