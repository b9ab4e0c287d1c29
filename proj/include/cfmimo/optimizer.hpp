#pragma once

#include <functional>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cfmimo/channel.hpp"
#include "cfmimo/fbl.hpp"
#include "cfmimo/gp.hpp"
#include "cfmimo/sinr.hpp"
#include "cfmimo/sysmodel.hpp"

namespace cfmimo {

/// Smallest expansion point for which the dispersion upper bound holds,
/// (sqrt(17) - 3) / 4.
inline constexpr double kLemma4Threshold = 0.28077640640441513745;

/// Coefficients of a bound of the form rho ln x + delta.
struct LogBound {
  double rho = 0.0;
  double delta = 0.0;
};

/// ln(1 + x) >= rho ln x + delta, tight at x_hat > 0.
LogBound lemma3_coeffs(double x_hat);
/// G(x) <= rho ln x + delta, tight at x_hat >= kLemma4Threshold, where G is
/// dispersion_root.
LogBound lemma4_coeffs(double x_hat);

/// theta_k >= c prod_m v_m^{a_m} with v_m = (N - t_m) p_{m,k} lambda_{m,k},
/// for the APs in M_k (same order as serving_aps[k]).
struct MonomialBound {
  int device = 0;
  std::vector<int> aps;
  std::vector<double> a;
  double c = 1.0;
  double log_c = 0.0;
  double theta_hat = 0.0;

  /// Right-hand side of the bound at power matrix p.
  double eval(const Eigen::MatrixXd& p, const Eigen::MatrixXd& lambda, const ServingSets& sets,
              int antennas, Scheme scheme) const;
};

/// Expansion of every device's coherent gain at the power matrix p_hat.
/// Throws DomainError when a serving link has nonpositive power.
std::vector<MonomialBound> theorem4_coeffs(const Eigen::MatrixXd& p_hat,
                                           const Eigen::MatrixXd& lambda_hat,
                                           const ServingSets& sets, int antennas, Scheme scheme);

/// Pilot powers used by the optimizer: every device at its maximum.
Eigen::VectorXd fix_pilot_power(const SystemConfig& cfg);

/// One FblParams per device (pilot length K, blocklength from cfg).
std::vector<FblParams> fbl_params(const SystemConfig& cfg);

/// GP variable numbering: one variable per serving link (m, k), ordered by
/// AP then device, followed by one extra variable per device or per problem.
class LinkIndex {
 public:
  explicit LinkIndex(const ServingSets& sets);

  int links() const { return static_cast<int>(pairs_.size()); }
  /// Variable of link (m, k), or -1 when m does not serve k.
  int var(int m, int k) const { return map_(m, k); }
  const std::pair<int, int>& link(int v) const { return pairs_[static_cast<std::size_t>(v)]; }

  Eigen::MatrixXd to_powers(const Eigen::VectorXd& x) const;
  Eigen::VectorXd from_powers(const Eigen::MatrixXd& p) const;

 private:
  Eigen::MatrixXi map_;
  std::vector<std::pair<int, int>> pairs_;
};

/// Everything about a scenario that stays fixed during optimization.
struct Instance {
  Scenario sc;
  Scheme scheme = Scheme::Mrt;
  std::vector<FblParams> fbl;
  Eigen::VectorXd pilot;
  EstimationStats stats;     // at the fixed pilot powers
  Eigen::VectorXd gamma_req; // SINR each device needs for its rate target
  LinkIndex index;

  /// Checks antenna dimensions (ConfigError) and fixes pilot powers.
  Instance(const Scenario& scenario, Scheme scheme);

  int num_devices() const { return sc.cfg.num_devices; }
  int antennas() const { return sc.cfg.antennas_per_ap; }
};

/// Closed-form SINR, per-device bound rate and weighted sum at powers p.
struct Evaluation {
  Eigen::VectorXd sinr;
  Eigen::VectorXd rates;
  double weighted_sum = 0.0;
  bool requirements_met = false;
};
Evaluation evaluate(const Instance& inst, const Eigen::MatrixXd& downlink);

/// SCA state at iteration i.
struct ScaState {
  int iteration = 0;
  Eigen::VectorXd chi;
  Eigen::MatrixXd powers;
  Eigen::VectorXd rho, delta, rho_hat, delta_hat, w_hat;
  std::vector<MonomialBound> theta;
  int lemma4_clamps = 0;
  std::vector<int> dropped;  // devices with w_hat <= 0
};

/// Expands every bound at (powers, chi).
ScaState expand(const Instance& inst, const Eigen::MatrixXd& powers, const Eigen::VectorXd& chi,
                int iteration);

/// Surrogate weighted sum at chi; equals the true objective at state.chi.
double surrogate_objective(const Instance& inst, const ScaState& state, const Eigen::VectorXd& chi);

/// Power/SINR subproblem at the current expansion. Variables: links then
/// chi_k (index links() + k).
gp::Problem build_subproblem(const Instance& inst, const ScaState& state);

/// Max-min requirement scaling: variables links then phi (index links()).
/// `bounds` are the coherent-gain expansions to use.
gp::Problem build_feasibility(const Instance& inst, const std::vector<MonomialBound>& bounds);

struct FeasibleStart {
  double phi = 0.0;
  Eigen::MatrixXd powers;
  int rounds = 0;
};

/// Iterates build_feasibility, re-expanding at each solution, from equal
/// power splitting. Stops once phi >= 1 or phi stops improving.
FeasibleStart find_feasible_start(const Instance& inst, const gp::Options& gp_opts = {},
                                  int max_rounds = 20, double min_gain = 1e-3);

enum class AllocStatus { Converged, InfeasibleRequirements, IterationCap };
std::string_view to_string(AllocStatus s);

struct AlgorithmOptions {
  double zeta = 0.01;
  int max_iterations = 50;
  gp::Options gp;
};

struct AllocationResult {
  PowerAllocation powers;
  Eigen::VectorXd sinr;
  Eigen::VectorXd rates;
  double weighted_sum = 0.0;
  bool requirements_met = false;
  int iterations = 0;  // subproblems solved
  AllocStatus status = AllocStatus::Converged;
  std::vector<double> history;  // true objective, one entry per iterate
  double phi = 0.0;
  int lemma4_clamps = 0;
  int dropped_weights = 0;
  double carryover_violation = 0.0;  // max over iterations, <= 0 when it holds
  double surrogate_gap = 0.0;        // max |surrogate - true| at expansion points
};

/// SCA weighted-sum-rate maximization. Throws ConfigError when the scheme
/// cannot run on the antenna counts and SolverError when a GP fails.
AllocationResult algorithm1(const Scenario& sc, Scheme scheme, const AlgorithmOptions& opts = {});

/// Equal split of each AP's budget over the devices it serves, full pilots.
AllocationResult baseline_equal_power(const Scenario& sc, Scheme scheme);

/// Two alternating device groups; every device is active in one of two slots.
struct RoundRobinPlan {
  std::vector<std::vector<int>> groups;
  std::vector<double> time_share;
};
RoundRobinPlan round_robin_partition(int num_devices, int first_group);

/// Runs `solve` on each group's sub-scenario and merges per-device rates
/// scaled by the group's time share. Powers are left empty.
AllocationResult run_round_robin(
    const Scenario& sc, const RoundRobinPlan& plan,
    const std::function<AllocationResult(const Scenario&)>& solve);

}  // namespace cfmimo
