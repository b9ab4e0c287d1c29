#include "cfmimo/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "cfmimo/errors.hpp"
#include "cfmimo/montecarlo.hpp"
#include "cfmimo/optimizer.hpp"
#include "cfmimo/rng.hpp"

namespace cfmimo {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool is_optimization(ExperimentKind k) {
  return k != ExperimentKind::Tightness && k != ExperimentKind::VerifyTheorems;
}

std::string fmt(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

double round12(double v) { return std::isfinite(v) ? std::strtod(fmt(v).c_str(), nullptr) : v; }

std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ';';
    s += fmt(v[i]);
  }
  return s;
}

int as_int(double v, const char* what) {
  const double r = std::round(v);
  if (std::abs(v - r) > 1e-9 || r < 1)
    throw ConfigError(std::string(what) + " grid values must be positive integers");
  return static_cast<int>(r);
}

SystemConfig cell_config(const ExperimentSpec& spec, double v, Scheme scheme) {
  SystemConfig cfg = spec.base;
  cfg.scheme = scheme;
  switch (spec.kind) {
    case ExperimentKind::Tightness:
      cfg = with_aps(cfg, cfg.num_aps, as_int(v, "tightness"));
      break;
    case ExperimentKind::Convergence:
      cfg.ap_power_max.assign(static_cast<std::size_t>(cfg.num_aps), v);
      break;
    case ExperimentKind::ThresholdSweep:
    case ExperimentKind::VerifyTheorems:
      cfg.selection_threshold = v;
      break;
    case ExperimentKind::PilotSweep:
      cfg.pilot_power_max.assign(static_cast<std::size_t>(cfg.num_devices), v);
      break;
    case ExperimentKind::ApCountSweep: {
      const int m = as_int(v, "ap_count_sweep");
      const int total = spec.base.num_aps * spec.base.antennas_per_ap;
      if (total % m != 0)
        throw ConfigError("ap_count_sweep: M = " + std::to_string(m) + " does not divide M*N = " +
                          std::to_string(total));
      cfg = with_aps(cfg, m, total / m);
      break;
    }
    case ExperimentKind::DeviceSweep:
      cfg = with_devices(cfg, as_int(v, "device_sweep"));
      break;
  }
  validate(cfg);
  return cfg;
}

double weighted(const SystemConfig& cfg, const Eigen::VectorXd& rates) {
  double s = 0.0;
  for (int k = 0; k < rates.size(); ++k) s += cfg.weights[static_cast<std::size_t>(k)] * rates(k);
  return s;
}

void evaluate_fixed(const ExperimentSpec& spec, const Scenario& sc, Scheme scheme,
                    std::uint64_t seed, RunRecord& rec) {
  const auto& cfg = sc.cfg;
  const int k_count = cfg.num_devices;
  check_dimensions(scheme, sc.sets, cfg.antennas_per_ap);
  PowerAllocation pa;
  pa.pilot = fix_pilot_power(cfg);
  pa.downlink = Eigen::MatrixXd::Zero(cfg.num_aps, k_count);
  for (int m = 0; m < cfg.num_aps; ++m)
    for (int k : sc.sets.served_devices[m])
      pa.downlink(m, k) = spec.kind == ExperimentKind::Tightness
                              ? spec.link_power
                              : cfg.ap_power_max[static_cast<std::size_t>(m)] / sc.sets.tau[m];
  const auto fbl = fbl_params(cfg);
  const auto stats = estimation_variance(sc.net.beta, pa.pilot, k_count);
  const auto closed = sinr_breakdown(scheme, sc.sets, stats, sc.net.beta, pa.downlink,
                                     cfg.antennas_per_ap);
  Eigen::VectorXd lb(k_count);
  rec.requirements_met = true;
  for (int k = 0; k < k_count; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    lb(k) = lb_rate(closed[ku].sinr, fbl[ku]).bits;
    if (lb(k) < cfg.rate_req[ku]) rec.requirements_met = false;
  }
  rec.rates.assign(lb.data(), lb.data() + k_count);
  rec.weighted_sum = weighted(cfg, lb);
  rec.status = "evaluated";

  const McResult mc = mc_ergodic_rate(sc, scheme, pa, fbl, spec.mc_draws, derive_seed(seed, 2));
  double mc_sum = 0.0;
  double max_z = 0.0;
  auto z = [](double sample, double se, double exact) {
    if (se > 0) return std::abs(sample - exact) / se;
    return sample == exact ? 0.0 : std::numeric_limits<double>::infinity();
  };
  for (int k = 0; k < k_count; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    const auto& d = mc.devices[ku];
    mc_sum += cfg.weights[ku] * d.ergodic_rate;
    max_z = std::max(max_z, z(d.ls_mean, d.ls_se, closed[ku].ls));
    for (int kp = 0; kp < k_count; ++kp)
      if (kp != k)
        max_z = std::max(max_z, z(d.ui_mean[static_cast<std::size_t>(kp)],
                                  d.ui_se[static_cast<std::size_t>(kp)],
                                  closed[ku].ui[static_cast<std::size_t>(kp)]));
  }
  rec.mc_sum = mc_sum;
  rec.max_z = max_z;
}

// Direct run, or round robin over two halves when the scheme cannot serve
// every device at once (device sweep only).
AllocationResult schedule(const Scenario& sc, Scheme scheme, bool allow_round_robin,
                          const std::function<AllocationResult(const Scenario&)>& solve) {
  if (allow_round_robin && sc.cfg.num_devices > 1) {
    try {
      check_dimensions(scheme, sc.sets, sc.cfg.antennas_per_ap);
    } catch (const ConfigError&) {
      const int k = sc.cfg.num_devices;
      return run_round_robin(sc, round_robin_partition(k, k / 2), solve);
    }
  }
  return solve(sc);
}

void optimize(const ExperimentSpec& spec, const Scenario& sc, Scheme scheme, RunRecord& rec) {
  const bool rr = spec.kind == ExperimentKind::DeviceSweep;
  auto alg = [scheme](const Scenario& s) { return algorithm1(s, scheme); };
  auto base = [scheme](const Scenario& s) { return baseline_equal_power(s, scheme); };

  const AllocationResult r = schedule(sc, scheme, rr, alg);
  rec.status = std::string(to_string(r.status));
  rec.requirements_met = r.requirements_met;
  rec.iterations = r.iterations;
  rec.weighted_sum = r.weighted_sum;
  rec.rates.assign(r.rates.data(), r.rates.data() + r.rates.size());
  rec.history = r.history;

  const AllocationResult b = schedule(sc, scheme, rr, base);
  rec.baseline_sum = b.weighted_sum;
  rec.baseline_met = b.requirements_met;

  if (spec.kind == ExperimentKind::DeviceSweep) {
    // Q^-1(0.5) = 0: same pipeline without the finite-blocklength penalty.
    Scenario shannon = sc;
    shannon.cfg.dep.assign(shannon.cfg.dep.size(), 0.5);
    try {
      rec.shannon_sum = schedule(shannon, scheme, rr, alg).weighted_sum;
    } catch (const SolverError&) {
      rec.shannon_sum = kNaN;
    }
  }
}

RunRecord run_task(const ExperimentSpec& spec, int cell, Scheme scheme, int trial) {
  const auto t0 = std::chrono::steady_clock::now();
  const double v = spec.grid[static_cast<std::size_t>(cell)];
  SystemConfig cfg = cell_config(spec, v, scheme);
  const std::uint64_t seed = derive_seed(spec.seed, static_cast<std::uint64_t>(trial));
  if (spec.random_weights) {
    Engine e(derive_seed(seed, 1));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& w : cfg.weights) w = u(e);
  }

  RunRecord rec;
  rec.experiment = std::string(to_string(spec.kind));
  rec.cell = cell;
  rec.grid_value = v;
  rec.trial = trial;
  rec.seed = seed;
  rec.scheme = std::string(to_string(scheme));
  rec.num_aps = cfg.num_aps;
  rec.antennas = cfg.antennas_per_ap;
  rec.num_devices = cfg.num_devices;
  rec.threshold = cfg.selection_threshold;
  rec.pilot_power = cfg.pilot_power_max.front();
  rec.ap_power = cfg.ap_power_max.front();
  rec.baseline_sum = rec.shannon_sum = rec.mc_sum = rec.max_z = kNaN;
  rec.weighted_sum = kNaN;

  try {
    const Scenario sc = make_scenario(cfg, seed);
    if (is_optimization(spec.kind))
      optimize(spec, sc, scheme, rec);
    else
      evaluate_fixed(spec, sc, scheme, seed, rec);
  } catch (const ConfigError&) {
    rec.status = "declined";
  } catch (const SolverError&) {
    rec.status = "solver_failure";
  } catch (const InfeasibleError&) {
    rec.status = "infeasible";
  }
  for (double* v : {&rec.weighted_sum, &rec.baseline_sum, &rec.shannon_sum, &rec.mc_sum,
                    &rec.max_z, &rec.grid_value, &rec.threshold, &rec.pilot_power, &rec.ap_power})
    *v = round12(*v);
  for (auto& v : rec.rates) v = round12(v);
  for (auto& v : rec.history) v = round12(v);
  rec.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

bool same(double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); }

bool same(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!same(a[i], b[i])) return false;
  return true;
}

nlohmann::json num(double v) { return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(round12(v)); }

double from_num(const nlohmann::json& j) {
  return j.is_null() ? kNaN : j.get<double>();
}

nlohmann::json nums(const std::vector<double>& v) {
  nlohmann::json a = nlohmann::json::array();
  for (double x : v) a.push_back(num(x));
  return a;
}

std::vector<double> from_nums(const nlohmann::json& j) {
  std::vector<double> v;
  for (const auto& x : j) v.push_back(from_num(x));
  return v;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << content;
  if (!f) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace

bool RunRecord::operator==(const RunRecord& o) const {
  return experiment == o.experiment && cell == o.cell && same(grid_value, o.grid_value) &&
         trial == o.trial && seed == o.seed && scheme == o.scheme && num_aps == o.num_aps &&
         antennas == o.antennas && num_devices == o.num_devices && same(threshold, o.threshold) &&
         same(pilot_power, o.pilot_power) && same(ap_power, o.ap_power) && status == o.status &&
         requirements_met == o.requirements_met && baseline_met == o.baseline_met &&
         iterations == o.iterations && same(weighted_sum, o.weighted_sum) &&
         same(baseline_sum, o.baseline_sum) && same(shannon_sum, o.shannon_sum) &&
         same(mc_sum, o.mc_sum) && same(max_z, o.max_z) && same(rates, o.rates) &&
         same(history, o.history);
}

std::string_view to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::Tightness: return "tightness";
    case ExperimentKind::Convergence: return "convergence";
    case ExperimentKind::ThresholdSweep: return "threshold_sweep";
    case ExperimentKind::PilotSweep: return "pilot_sweep";
    case ExperimentKind::ApCountSweep: return "ap_count_sweep";
    case ExperimentKind::DeviceSweep: return "device_sweep";
    case ExperimentKind::VerifyTheorems: return "verify_theorems";
  }
  return "unknown";
}

ExperimentKind parse_experiment(std::string_view text) {
  for (auto k : {ExperimentKind::Tightness, ExperimentKind::Convergence,
                 ExperimentKind::ThresholdSweep, ExperimentKind::PilotSweep,
                 ExperimentKind::ApCountSweep, ExperimentKind::DeviceSweep,
                 ExperimentKind::VerifyTheorems})
    if (to_string(k) == text) return k;
  throw ConfigError("unknown experiment kind '" + std::string(text) + "'");
}

void ExperimentSpec::validate() const {
  if (grid.empty()) throw ConfigError("experiment grid is empty");
  if (trials < 1) throw ConfigError("trials must be >= 1");
  if (schemes.empty()) throw ConfigError("no precoding scheme selected");
  if (!is_optimization(kind) && mc_draws < 1) throw ConfigError("mc_draws must be >= 1");
  if (!(link_power >= 0.0)) throw ConfigError("link_power must be >= 0");
  cfmimo::validate(base);
  for (double v : grid) cell_config(*this, v, schemes.front());
}

RunOutput run(const ExperimentSpec& spec) {
  spec.validate();
  const int cells = static_cast<int>(spec.grid.size());
  const int schemes = static_cast<int>(spec.schemes.size());
  const int tasks = cells * schemes * spec.trials;
  RunOutput out;
  out.records.resize(static_cast<std::size_t>(tasks));

#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < tasks; ++i) {
    const int trial = i % spec.trials;
    const int s = (i / spec.trials) % schemes;
    const int cell = i / (spec.trials * schemes);
    out.records[static_cast<std::size_t>(i)] =
        run_task(spec, cell, spec.schemes[static_cast<std::size_t>(s)], trial);
  }

  out.summary = summarize(out.records, spec.kind, spec.cell_budget_s);
  out.any_feasible = false;
  for (const auto& r : out.records)
    if (r.status == "evaluated" || (r.requirements_met && r.status != "declined" &&
                                    r.status != "solver_failure"))
      out.any_feasible = true;
  return out;
}

std::vector<SummaryRow> summarize(const std::vector<RunRecord>& records, ExperimentKind kind,
                                  double cell_budget_s) {
  std::vector<SummaryRow> rows;
  const bool zero_rule = is_optimization(kind);
  auto mean = [](double sum, int n) { return n > 0 ? sum / n : kNaN; };
  std::size_t i = 0;
  while (i < records.size()) {
    std::size_t j = i;
    while (j < records.size() && records[j].cell == records[i].cell &&
           records[j].scheme == records[i].scheme)
      ++j;
    SummaryRow row;
    row.experiment = records[i].experiment;
    row.cell = records[i].cell;
    row.grid_value = records[i].grid_value;
    row.scheme = records[i].scheme;
    row.trials = static_cast<int>(j - i);
    double ws = 0, bs = 0, ss = 0, ms = 0, it = 0;
    int n_ss = 0, n_ms = 0;
    for (std::size_t r = i; r < j; ++r) {
      const auto& rec = records[r];
      const bool ok = rec.requirements_met && rec.status != "declined" &&
                      rec.status != "solver_failure" && rec.status != "infeasible";
      if (ok) ++row.feasible;
      auto val = [](double v) { return std::isnan(v) ? 0.0 : v; };
      ws += (zero_rule && !ok) ? 0.0 : val(rec.weighted_sum);
      bs += (zero_rule && !rec.baseline_met) ? 0.0 : val(rec.baseline_sum);
      if (!std::isnan(rec.shannon_sum)) {
        ss += rec.shannon_sum;
        ++n_ss;
      }
      if (!std::isnan(rec.mc_sum)) {
        ms += rec.mc_sum;
        ++n_ms;
      }
      it += rec.iterations;
      row.wall_time_s += rec.wall_time_s;
    }
    row.mean_weighted_sum = mean(ws, row.trials);
    row.mean_baseline_sum = zero_rule ? mean(bs, row.trials) : kNaN;
    row.mean_shannon_sum = mean(ss, n_ss);
    row.mean_mc_sum = mean(ms, n_ms);
    row.mean_iterations = mean(it, row.trials);
    row.over_budget = row.wall_time_s > cell_budget_s;
    rows.push_back(row);
    i = j;
  }
  return rows;
}

const std::vector<std::string>& record_columns() {
  static const std::vector<std::string> cols{
      "experiment", "cell",        "grid_value",   "trial",         "seed",
      "scheme",     "M",           "N",            "K",             "threshold",
      "pilot_power", "ap_power",   "status",       "requirements_met", "baseline_met",
      "iterations", "weighted_sum", "baseline_sum", "shannon_sum",   "mc_sum",
      "max_z",      "rates",       "history"};
  return cols;
}

void write_records_csv(std::ostream& out, const std::vector<RunRecord>& records) {
  const auto& cols = record_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
  for (const auto& r : records) {
    out << r.experiment << ',' << r.cell << ',' << fmt(r.grid_value) << ',' << r.trial << ','
        << r.seed << ',' << r.scheme << ',' << r.num_aps << ',' << r.antennas << ','
        << r.num_devices << ',' << fmt(r.threshold) << ',' << fmt(r.pilot_power) << ','
        << fmt(r.ap_power) << ',' << r.status << ',' << (r.requirements_met ? 1 : 0) << ','
        << (r.baseline_met ? 1 : 0) << ',' << r.iterations << ',' << fmt(r.weighted_sum) << ','
        << fmt(r.baseline_sum) << ',' << fmt(r.shannon_sum) << ',' << fmt(r.mc_sum) << ','
        << fmt(r.max_z) << ',' << join(r.rates) << ',' << join(r.history) << '\n';
  }
}

void write_records_json(std::ostream& out, const std::vector<RunRecord>& records) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& r : records) {
    a.push_back({{"experiment", r.experiment},
                 {"cell", r.cell},
                 {"grid_value", num(r.grid_value)},
                 {"trial", r.trial},
                 {"seed", r.seed},
                 {"scheme", r.scheme},
                 {"M", r.num_aps},
                 {"N", r.antennas},
                 {"K", r.num_devices},
                 {"threshold", num(r.threshold)},
                 {"pilot_power", num(r.pilot_power)},
                 {"ap_power", num(r.ap_power)},
                 {"status", r.status},
                 {"requirements_met", r.requirements_met},
                 {"baseline_met", r.baseline_met},
                 {"iterations", r.iterations},
                 {"weighted_sum", num(r.weighted_sum)},
                 {"baseline_sum", num(r.baseline_sum)},
                 {"shannon_sum", num(r.shannon_sum)},
                 {"mc_sum", num(r.mc_sum)},
                 {"max_z", num(r.max_z)},
                 {"rates", nums(r.rates)},
                 {"history", nums(r.history)}});
  }
  out << a.dump(1) << '\n';
}

std::vector<RunRecord> read_records_json(std::istream& in) {
  const nlohmann::json a = nlohmann::json::parse(in);
  std::vector<RunRecord> out;
  for (const auto& j : a) {
    RunRecord r;
    r.experiment = j.at("experiment").get<std::string>();
    r.cell = j.at("cell").get<int>();
    r.grid_value = from_num(j.at("grid_value"));
    r.trial = j.at("trial").get<int>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.scheme = j.at("scheme").get<std::string>();
    r.num_aps = j.at("M").get<int>();
    r.antennas = j.at("N").get<int>();
    r.num_devices = j.at("K").get<int>();
    r.threshold = from_num(j.at("threshold"));
    r.pilot_power = from_num(j.at("pilot_power"));
    r.ap_power = from_num(j.at("ap_power"));
    r.status = j.at("status").get<std::string>();
    r.requirements_met = j.at("requirements_met").get<bool>();
    r.baseline_met = j.at("baseline_met").get<bool>();
    r.iterations = j.at("iterations").get<int>();
    r.weighted_sum = from_num(j.at("weighted_sum"));
    r.baseline_sum = from_num(j.at("baseline_sum"));
    r.shannon_sum = from_num(j.at("shannon_sum"));
    r.mc_sum = from_num(j.at("mc_sum"));
    r.max_z = from_num(j.at("max_z"));
    r.rates = from_nums(j.at("rates"));
    r.history = from_nums(j.at("history"));
    out.push_back(std::move(r));
  }
  return out;
}

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << "experiment,cell,grid_value,scheme,trials,feasible,mean_weighted_sum,"
         "mean_baseline_sum,mean_shannon_sum,mean_mc_sum,mean_iterations\n";
  for (const auto& r : rows)
    out << r.experiment << ',' << r.cell << ',' << fmt(r.grid_value) << ',' << r.scheme << ','
        << r.trials << ',' << r.feasible << ',' << fmt(r.mean_weighted_sum) << ','
        << fmt(r.mean_baseline_sum) << ',' << fmt(r.mean_shannon_sum) << ','
        << fmt(r.mean_mc_sum) << ',' << fmt(r.mean_iterations) << '\n';
}

void write_timings_csv(std::ostream& out, const RunOutput& result) {
  out << "cell,scheme,trial,wall_time_s\n";
  for (const auto& r : result.records)
    out << r.cell << ',' << r.scheme << ',' << r.trial << ',' << fmt(r.wall_time_s) << '\n';
  out << "\ncell,scheme,cell_wall_time_s,over_budget\n";
  for (const auto& s : result.summary)
    out << s.cell << ',' << s.scheme << ',' << fmt(s.wall_time_s) << ','
        << (s.over_budget ? 1 : 0) << '\n';
}

void ensure_writable(const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir))
    throw std::runtime_error("output directory '" + dir + "' cannot be created");
  const fs::path probe = fs::path(dir) / ".cfmimo_write_test";
  {
    std::ofstream f(probe);
    if (!f) throw std::runtime_error("output directory '" + dir + "' is not writable");
  }
  fs::remove(probe, ec);
}

void emit(const RunOutput& result, const std::string& dir) {
  ensure_writable(dir);
  const std::filesystem::path base(dir);
  std::ostringstream csv, json, summary, timings;
  write_records_csv(csv, result.records);
  write_records_json(json, result.records);
  write_summary_csv(summary, result.summary);
  write_timings_csv(timings, result);
  write_file(base / "records.csv", csv.str());
  write_file(base / "records.json", json.str());
  write_file(base / "summary.csv", summary.str());
  write_file(base / "timings.csv", timings.str());
}

}  // namespace cfmimo
