#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace cfmimo {

enum class Scheme { Mrt, Fzf, Lzf };

std::string_view to_string(Scheme s);
Scheme parse_scheme(std::string_view text);

/// Scenario description. Powers are in watts; per-device vectors have one
/// entry per device and `ap_power_max` one entry per AP.
struct SystemConfig {
  double carrier_freq = 2100.0;     // MHz
  double bandwidth = 10e6;          // Hz
  double frame_duration = 0.05e-3;  // s
  double ap_height = 15.0;          // m
  double device_height = 1.6;       // m
  double noise_figure = 9.0;        // dB
  double area_side = 1000.0;        // m
  double d0 = 10.0;                 // m
  double d1 = 50.0;                 // m
  int num_aps = 16;
  int antennas_per_ap = 9;
  int num_devices = 10;
  double selection_threshold = 0.95;
  std::vector<double> dep;              // decoding error probability
  std::vector<double> rate_req;         // bit/s/Hz
  std::vector<double> weights;
  std::vector<double> pilot_power_max;  // W
  std::vector<double> ap_power_max;     // W
  Scheme scheme = Scheme::Mrt;
  double sca_tolerance = 0.01;
  std::uint64_t rng_seed = 1;

  /// Channel blocklength in symbols, round(bandwidth * frame_duration).
  int blocklength() const;

  /// Simulation defaults: 2.1 GHz, 10 MHz, L = 500, eps = 1e-7,
  /// R_req = 0.5, 100 mW pilots, 1 W per AP, unit weights.
  static SystemConfig defaults(int num_aps, int antennas_per_ap, int num_devices);
};

/// Throws ConfigError on the first violated constraint. Scheme/antenna
/// compatibility is checked later, once serving sets exist.
void validate(const SystemConfig& cfg);

/// Changes K, filling per-device vectors with their first entry.
SystemConfig with_devices(SystemConfig cfg, int num_devices);
/// Changes M and N, filling `ap_power_max` with its first entry.
SystemConfig with_aps(SystemConfig cfg, int num_aps, int antennas_per_ap);

/// Flat `key = value` text format. Keys are the SystemConfig field names;
/// `#` starts a comment. Vector fields take a single value (broadcast) or a
/// comma-separated list. Missing keys keep their defaults.
SystemConfig parse_config(std::istream& in);
SystemConfig load_config(const std::string& path);
void write_config(std::ostream& out, const SystemConfig& cfg);

}  // namespace cfmimo
