#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "cfmimo/config.hpp"

namespace cfmimo {

/// What the grid sweeps, per kind:
///   tightness        N (antennas per AP), fixed power per serving link
///   convergence      P_m (W), Algorithm 1 history
///   threshold_sweep  T_h
///   pilot_sweep      pilot power (W)
///   ap_count_sweep   M, with N = (base M * N) / M
///   device_sweep     K, round robin when the scheme cannot serve all K
///   verify_theorems  T_h, closed form vs Monte Carlo at equal power
enum class ExperimentKind {
  Tightness,
  Convergence,
  ThresholdSweep,
  PilotSweep,
  ApCountSweep,
  DeviceSweep,
  VerifyTheorems
};

std::string_view to_string(ExperimentKind k);
ExperimentKind parse_experiment(std::string_view text);

struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::Convergence;
  std::vector<double> grid;
  int trials = 1;
  int mc_draws = 1000;
  SystemConfig base;
  std::vector<Scheme> schemes{Scheme::Mrt, Scheme::Fzf, Scheme::Lzf};
  std::uint64_t seed = 1;
  bool random_weights = true;  // w_k ~ U[0, 1] per trial
  double link_power = 0.1;     // tightness / verify fixed powers, W
  double cell_budget_s = 60.0;
  std::string out_dir;

  /// Throws ConfigError on an empty grid, trials < 1, or a grid value the
  /// kind cannot use.
  void validate() const;
};

/// One (grid cell, scheme, trial) run. Sums are NaN when not computed.
/// Numeric fields are stored at 12 significant digits, as emitted.
struct RunRecord {
  std::string experiment;
  int cell = 0;
  double grid_value = 0.0;
  int trial = 0;
  std::uint64_t seed = 0;
  std::string scheme;
  int num_aps = 0;
  int antennas = 0;
  int num_devices = 0;
  double threshold = 0.0;
  double pilot_power = 0.0;
  double ap_power = 0.0;
  std::string status;
  bool requirements_met = false;
  bool baseline_met = false;
  int iterations = 0;
  double weighted_sum = 0.0;
  double baseline_sum = 0.0;
  double shannon_sum = 0.0;
  double mc_sum = 0.0;
  double max_z = 0.0;
  std::vector<double> rates;
  std::vector<double> history;
  double wall_time_s = 0.0;  // emitted to timings.csv only

  /// Field-wise, with NaN equal to NaN; wall time is not compared.
  bool operator==(const RunRecord& other) const;
};

/// Per (cell, scheme) means over trials. Optimization sums count as zero
/// for trials whose requirements are not all met.
struct SummaryRow {
  std::string experiment;
  int cell = 0;
  double grid_value = 0.0;
  std::string scheme;
  int trials = 0;
  int feasible = 0;
  double mean_weighted_sum = 0.0;
  double mean_baseline_sum = 0.0;
  double mean_shannon_sum = 0.0;
  double mean_mc_sum = 0.0;
  double mean_iterations = 0.0;
  double wall_time_s = 0.0;
  bool over_budget = false;
};

struct RunOutput {
  std::vector<RunRecord> records;  // ordered by (cell, scheme, trial)
  std::vector<SummaryRow> summary;
  /// True if some optimization run met all requirements (always true for
  /// evaluation-only kinds).
  bool any_feasible = false;
};

/// Runs grid x schemes x trials in parallel; results do not depend on the
/// thread count.
RunOutput run(const ExperimentSpec& spec);

/// Aggregates records into summary rows (zero-on-violation for
/// optimization kinds).
std::vector<SummaryRow> summarize(const std::vector<RunRecord>& records, ExperimentKind kind,
                                  double cell_budget_s);

/// Creates `dir` if needed and checks that files can be written there.
/// Throws std::runtime_error otherwise.
void ensure_writable(const std::string& dir);

void write_records_csv(std::ostream& out, const std::vector<RunRecord>& records);
void write_records_json(std::ostream& out, const std::vector<RunRecord>& records);
std::vector<RunRecord> read_records_json(std::istream& in);
void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows);
void write_timings_csv(std::ostream& out, const RunOutput& result);

/// records.csv, records.json, summary.csv, timings.csv under `dir`.
void emit(const RunOutput& result, const std::string& dir);

/// Header of records.csv, in column order.
const std::vector<std::string>& record_columns();

}  // namespace cfmimo
