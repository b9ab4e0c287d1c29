// Command-line driver for the experiment harness.
#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "cfmimo/errors.hpp"
#include "cfmimo/harness.hpp"

namespace {

using cfmimo::ExperimentKind;

const std::map<ExperimentKind, std::pair<const char*, const char*>> kKinds{
    {ExperimentKind::Tightness,
     {"closed-form bound vs Monte Carlo ergodic rate at fixed link power; grid = N", "4,9,16"}},
    {ExperimentKind::Convergence, {"Algorithm 1 objective history; grid = P_m (W)", "0.2,1"}},
    {ExperimentKind::ThresholdSweep,
     {"average objective vs AP-selection threshold; grid = T_h", "0.85,0.9,0.95,1"}},
    {ExperimentKind::PilotSweep, {"average objective vs pilot power; grid = W", "0.01,0.05,0.1,0.2"}},
    {ExperimentKind::ApCountSweep,
     {"average objective vs M at fixed M*N; grid = M", "1,4,9,16,36"}},
    {ExperimentKind::DeviceSweep,
     {"average objective vs K with round robin, baseline and Shannon columns; grid = K",
      "4,8,12,16,20"}},
    {ExperimentKind::VerifyTheorems,
     {"closed-form SINR terms vs Monte Carlo at equal power; grid = T_h", "0.95"}},
};

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || item.find_first_not_of(" \t", used) != std::string::npos)
      throw cfmimo::ConfigError("bad grid value '" + item + "'");
    out.push_back(v);
  }
  return out;
}

void print_summary(const cfmimo::RunOutput& out) {
  std::printf("%-16s %5s %10s %-4s %6s %8s %12s %12s %12s %12s %6s\n", "experiment", "cell",
              "grid", "sch", "trials", "feasible", "mean_obj", "baseline", "shannon", "mc", "iters");
  auto f = [](double v) { return std::isnan(v) ? std::string("-") : std::to_string(v); };
  for (const auto& r : out.summary)
    std::printf("%-16s %5d %10g %-4s %6d %8d %12s %12s %12s %12s %6.2f%s\n", r.experiment.c_str(),
                r.cell, r.grid_value, r.scheme.c_str(), r.trials, r.feasible,
                f(r.mean_weighted_sum).c_str(), f(r.mean_baseline_sum).c_str(),
                f(r.mean_shannon_sum).c_str(), f(r.mean_mc_sum).c_str(), r.mean_iterations,
                r.over_budget ? "  (over budget)" : "");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cell-free massive-MIMO URLLC downlink power allocation experiments"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "results", scheme_text, grid_text;
  std::uint64_t seed = 1;
  int trials = 10, mc_draws = 1000;
  double link_power = 0.1;
  bool fixed_weights = false;

  auto* defaults = app.add_subcommand("defaults", "print the default configuration file");

  std::map<CLI::App*, ExperimentKind> subs;
  for (const auto& [kind, info] : kKinds) {
    auto* sub = app.add_subcommand(std::string(cfmimo::to_string(kind)), info.first);
    sub->add_option("--config", config_path, "key = value configuration file")
        ->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory")->capture_default_str();
    sub->add_option("--seed", seed, "master seed")->capture_default_str();
    sub->add_option("--trials", trials, "random device placements per cell")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    sub->add_option("--mc-draws", mc_draws, "Monte Carlo channel draws")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    sub->add_option("--scheme", scheme_text, "mrt, fzf or lzf (default: all three)");
    sub->add_option("--grid", grid_text, std::string("comma list (default ") + info.second + ")");
    sub->add_option("--link-power", link_power, "fixed per-link power in W (tightness)")
        ->capture_default_str();
    sub->add_flag("--fixed-weights", fixed_weights, "use config weights instead of U[0,1] draws");
    subs[sub] = kind;
  }

  CLI11_PARSE(app, argc, argv);

  try {
    if (defaults->parsed()) {
      cfmimo::write_config(std::cout, cfmimo::SystemConfig::defaults(16, 9, 10));
      return 0;
    }
    for (const auto& [sub, kind] : subs) {
      if (!sub->parsed()) continue;
      cfmimo::ExperimentSpec spec;
      spec.kind = kind;
      spec.base = config_path.empty() ? cfmimo::SystemConfig::defaults(16, 9, 10)
                                      : cfmimo::load_config(config_path);
      spec.grid = parse_grid(grid_text.empty() ? kKinds.at(kind).second : grid_text);
      spec.trials = trials;
      spec.mc_draws = mc_draws;
      spec.seed = seed;
      spec.random_weights = !fixed_weights;
      spec.link_power = link_power;
      spec.out_dir = out_dir;
      if (!scheme_text.empty()) spec.schemes = {cfmimo::parse_scheme(scheme_text)};
      spec.validate();
      cfmimo::ensure_writable(out_dir);

      const cfmimo::RunOutput out = cfmimo::run(spec);
      cfmimo::emit(out, out_dir);
      print_summary(out);
      std::printf("wrote %s/records.csv, records.json, summary.csv, timings.csv\n",
                  out_dir.c_str());
      if (!out.any_feasible) {
        std::fprintf(stderr, "no feasible run in any cell\n");
        return 2;
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
