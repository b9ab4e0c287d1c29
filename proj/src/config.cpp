#include "cfmimo/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>

#include "cfmimo/errors.hpp"

namespace cfmimo {

std::string_view to_string(Scheme s) {
  switch (s) {
    case Scheme::Mrt: return "mrt";
    case Scheme::Fzf: return "fzf";
    case Scheme::Lzf: return "lzf";
  }
  return "?";
}

Scheme parse_scheme(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "mrt") return Scheme::Mrt;
  if (lower == "fzf") return Scheme::Fzf;
  if (lower == "lzf") return Scheme::Lzf;
  throw ConfigError("unknown precoding scheme '" + std::string(text) + "'");
}

int SystemConfig::blocklength() const {
  return static_cast<int>(std::lround(bandwidth * frame_duration));
}

SystemConfig SystemConfig::defaults(int num_aps, int antennas_per_ap, int num_devices) {
  SystemConfig cfg;
  cfg.num_aps = num_aps;
  cfg.antennas_per_ap = antennas_per_ap;
  cfg.num_devices = num_devices;
  const auto k = static_cast<std::size_t>(std::max(num_devices, 0));
  cfg.dep.assign(k, 1e-7);
  cfg.rate_req.assign(k, 0.5);
  cfg.weights.assign(k, 1.0);
  cfg.pilot_power_max.assign(k, 0.1);
  cfg.ap_power_max.assign(static_cast<std::size_t>(std::max(num_aps, 0)), 1.0);
  return cfg;
}

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

void check_per_device(const std::vector<double>& v, int k, const char* name) {
  require(static_cast<int>(v.size()) == k,
          std::string(name) + ": expected " + std::to_string(k) + " entries, got " +
              std::to_string(v.size()));
}

void refill(std::vector<double>& v, int n) {
  const double fill = v.empty() ? 0.0 : v.front();
  v.assign(static_cast<std::size_t>(n), fill);
}

}  // namespace

void validate(const SystemConfig& cfg) {
  require(cfg.carrier_freq > 0, "carrier_freq must be positive");
  require(cfg.bandwidth > 0, "bandwidth must be positive");
  require(cfg.frame_duration > 0, "frame_duration must be positive");
  require(cfg.ap_height > 0 && cfg.device_height > 0, "heights must be positive");
  require(cfg.area_side > 0, "area_side must be positive");
  require(cfg.d0 > 0 && cfg.d1 > cfg.d0, "need 0 < d0 < d1");
  require(cfg.num_aps >= 1, "num_aps must be >= 1");
  require(cfg.antennas_per_ap >= 1, "antennas_per_ap must be >= 1");
  require(cfg.num_devices >= 1, "num_devices must be >= 1");
  require(cfg.blocklength() > cfg.num_devices,
          "blocklength (" + std::to_string(cfg.blocklength()) +
              ") must exceed num_devices so that the pilot overhead is below 1");
  require(cfg.selection_threshold > 0 && cfg.selection_threshold <= 1,
          "selection_threshold must lie in (0, 1]");
  require(cfg.sca_tolerance > 0, "sca_tolerance must be positive");
  const int k = cfg.num_devices;
  check_per_device(cfg.dep, k, "dep");
  check_per_device(cfg.rate_req, k, "rate_req");
  check_per_device(cfg.weights, k, "weights");
  check_per_device(cfg.pilot_power_max, k, "pilot_power_max");
  require(static_cast<int>(cfg.ap_power_max.size()) == cfg.num_aps,
          "ap_power_max: expected " + std::to_string(cfg.num_aps) + " entries");
  for (int i = 0; i < k; ++i) {
    require(cfg.dep[i] > 0 && cfg.dep[i] < 0.5, "dep must lie in (0, 0.5)");
    require(cfg.rate_req[i] > 0, "rate_req must be positive");
    require(cfg.weights[i] >= 0, "weights must be nonnegative");
    require(cfg.pilot_power_max[i] > 0, "pilot_power_max must be positive");
  }
  for (double p : cfg.ap_power_max) require(p > 0, "ap_power_max must be positive");
}

SystemConfig with_devices(SystemConfig cfg, int num_devices) {
  cfg.num_devices = num_devices;
  refill(cfg.dep, num_devices);
  refill(cfg.rate_req, num_devices);
  refill(cfg.weights, num_devices);
  refill(cfg.pilot_power_max, num_devices);
  return cfg;
}

SystemConfig with_aps(SystemConfig cfg, int num_aps, int antennas_per_ap) {
  cfg.num_aps = num_aps;
  cfg.antennas_per_ap = antennas_per_ap;
  refill(cfg.ap_power_max, num_aps);
  return cfg;
}

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double to_double(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    double v = std::stod(text, &used);
    if (trim(text.substr(used)).empty()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError("config key '" + key + "': cannot parse number '" + text + "'");
}

long long to_integer(const std::string& key, const std::string& text) {
  long long v = 0;
  auto t = trim(text);
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size())
    throw ConfigError("config key '" + key + "': cannot parse integer '" + text + "'");
  return v;
}

std::vector<double> to_list(const std::string& key, const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_double(key, trim(item)));
  if (out.empty()) throw ConfigError("config key '" + key + "': empty list");
  return out;
}

void broadcast(std::vector<double>& v, int n, const char* name) {
  if (v.size() == 1) v.assign(static_cast<std::size_t>(n), v.front());
  if (static_cast<int>(v.size()) != n)
    throw ConfigError(std::string(name) + ": list length " + std::to_string(v.size()) +
                      " does not match " + std::to_string(n));
}

}  // namespace

SystemConfig parse_config(std::istream& in) {
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    auto body = trim(line);
    if (body.empty()) continue;
    auto eq = body.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    auto key = trim(body.substr(0, eq));
    auto value = trim(body.substr(eq + 1));
    if (!kv.emplace(key, value).second)
      throw ConfigError("config key '" + key + "' given twice");
  }

  auto cfg = SystemConfig::defaults(16, 9, 10);
  std::vector<double> dep{1e-7}, rate_req{0.5}, weights{1.0}, pilot{0.1}, ap_power{1.0};
  std::optional<long long> blocklength;
  for (const auto& [key, value] : kv) {
    if (key == "carrier_freq") cfg.carrier_freq = to_double(key, value);
    else if (key == "bandwidth") cfg.bandwidth = to_double(key, value);
    else if (key == "frame_duration") cfg.frame_duration = to_double(key, value);
    else if (key == "blocklength") blocklength = to_integer(key, value);
    else if (key == "ap_height") cfg.ap_height = to_double(key, value);
    else if (key == "device_height") cfg.device_height = to_double(key, value);
    else if (key == "noise_figure") cfg.noise_figure = to_double(key, value);
    else if (key == "area_side") cfg.area_side = to_double(key, value);
    else if (key == "d0") cfg.d0 = to_double(key, value);
    else if (key == "d1") cfg.d1 = to_double(key, value);
    else if (key == "num_aps") cfg.num_aps = static_cast<int>(to_integer(key, value));
    else if (key == "antennas_per_ap") cfg.antennas_per_ap = static_cast<int>(to_integer(key, value));
    else if (key == "num_devices") cfg.num_devices = static_cast<int>(to_integer(key, value));
    else if (key == "selection_threshold") cfg.selection_threshold = to_double(key, value);
    else if (key == "dep") dep = to_list(key, value);
    else if (key == "rate_req") rate_req = to_list(key, value);
    else if (key == "weights") weights = to_list(key, value);
    else if (key == "pilot_power_max") pilot = to_list(key, value);
    else if (key == "ap_power_max") ap_power = to_list(key, value);
    else if (key == "scheme") cfg.scheme = parse_scheme(value);
    else if (key == "sca_tolerance") cfg.sca_tolerance = to_double(key, value);
    else if (key == "rng_seed") cfg.rng_seed = static_cast<std::uint64_t>(to_integer(key, value));
    else throw ConfigError("unknown config key '" + key + "'");
  }
  if (cfg.num_devices < 1 || cfg.num_aps < 1) throw ConfigError("num_aps and num_devices must be >= 1");
  broadcast(dep, cfg.num_devices, "dep");
  broadcast(rate_req, cfg.num_devices, "rate_req");
  broadcast(weights, cfg.num_devices, "weights");
  broadcast(pilot, cfg.num_devices, "pilot_power_max");
  broadcast(ap_power, cfg.num_aps, "ap_power_max");
  cfg.dep = std::move(dep);
  cfg.rate_req = std::move(rate_req);
  cfg.weights = std::move(weights);
  cfg.pilot_power_max = std::move(pilot);
  cfg.ap_power_max = std::move(ap_power);
  if (blocklength && *blocklength != cfg.blocklength())
    throw ConfigError("blocklength " + std::to_string(*blocklength) +
                      " disagrees with bandwidth * frame_duration = " +
                      std::to_string(cfg.blocklength()));
  validate(cfg);
  return cfg;
}

SystemConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse_config(in);
}

namespace {
// Shortest text that reads back to the same double.
std::string shortest(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_list(std::ostream& out, const char* key, const std::vector<double>& v) {
  out << key << " = ";
  for (std::size_t i = 0; i < v.size(); ++i) out << (i ? "," : "") << shortest(v[i]);
  out << '\n';
}
}  // namespace

void write_config(std::ostream& out, const SystemConfig& cfg) {
  out << "carrier_freq = " << shortest(cfg.carrier_freq) << '\n'
      << "bandwidth = " << shortest(cfg.bandwidth) << '\n'
      << "frame_duration = " << shortest(cfg.frame_duration) << '\n'
      << "blocklength = " << cfg.blocklength() << '\n'
      << "ap_height = " << shortest(cfg.ap_height) << '\n'
      << "device_height = " << shortest(cfg.device_height) << '\n'
      << "noise_figure = " << shortest(cfg.noise_figure) << '\n'
      << "area_side = " << shortest(cfg.area_side) << '\n'
      << "d0 = " << shortest(cfg.d0) << '\n'
      << "d1 = " << shortest(cfg.d1) << '\n'
      << "num_aps = " << cfg.num_aps << '\n'
      << "antennas_per_ap = " << cfg.antennas_per_ap << '\n'
      << "num_devices = " << cfg.num_devices << '\n'
      << "selection_threshold = " << shortest(cfg.selection_threshold) << '\n';
  write_list(out, "dep", cfg.dep);
  write_list(out, "rate_req", cfg.rate_req);
  write_list(out, "weights", cfg.weights);
  write_list(out, "pilot_power_max", cfg.pilot_power_max);
  write_list(out, "ap_power_max", cfg.ap_power_max);
  out << "scheme = " << to_string(cfg.scheme) << '\n'
      << "sca_tolerance = " << shortest(cfg.sca_tolerance) << '\n'
      << "rng_seed = " << cfg.rng_seed << '\n';
}

}  // namespace cfmimo
