#include "cfmimo/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "cfmimo/errors.hpp"

namespace cfmimo {

namespace {

double v_term(Scheme scheme, const ServingSets& sets, int antennas, double p, double lambda, int m) {
  const int t = dof_loss(scheme, sets.tau[m], sets.num_devices());
  return (antennas - t) * p * lambda;
}

// ln of 1 / (c^2 prod_m ((N - t_m) lambda_{m,k})^{2 a_m}): the power-free
// part of the coherent-gain monomial, inverted.
double inverse_gain_log_coeff(const Instance& inst, const MonomialBound& b, int k) {
  double v = -2.0 * b.log_c;
  for (std::size_t j = 0; j < b.aps.size(); ++j) {
    const int m = b.aps[j];
    v -= 2.0 * b.a[j] * std::log(v_term(inst.scheme, inst.sc.sets, inst.antennas(), 1.0,
                                        inst.stats.lambda(m, k), m));
  }
  return v;
}

// chi-free part of device k's SINR constraint: varpi_k(p) / gain monomial,
// with extra variable `extra_var` (chi_k or phi) and coefficient scale.
gp::Posynomial sinr_constraint(const Instance& inst, const MonomialBound& b, int k, int extra_var,
                               double scale) {
  const auto& sets = inst.sc.sets;
  const double base = inverse_gain_log_coeff(inst, b, k) + std::log(scale);
  std::vector<std::pair<int, double>> gain_exp;
  for (std::size_t j = 0; j < b.aps.size(); ++j)
    gain_exp.emplace_back(inst.index.var(b.aps[j], k), -2.0 * b.a[j]);
  gain_exp.emplace_back(extra_var, 1.0);

  gp::Posynomial out;
  out += gp::Monomial{std::exp(base), gain_exp};  // noise
  for (int v = 0; v < inst.index.links(); ++v) {
    const auto [m, kp] = inst.index.link(v);
    const double leak =
        leak_coefficient(inst.scheme, sets, inst.stats, inst.sc.net.beta, m, k);
    if (!(leak > 0.0)) continue;
    auto exps = gain_exp;
    exps.emplace_back(v, 1.0);
    out += gp::Monomial{std::exp(base + std::log(leak)), std::move(exps)};
  }
  // Merge duplicate indices (own link appears in both parts).
  for (auto& t : out.terms) t = t * gp::Monomial{1.0, {}};
  return out;
}

void add_budgets(const Instance& inst, gp::Problem& prob) {
  const auto& sets = inst.sc.sets;
  for (int m = 0; m < sets.num_aps(); ++m) {
    if (sets.tau[m] == 0) continue;
    gp::Posynomial budget;
    const double inv = 1.0 / inst.sc.cfg.ap_power_max[static_cast<std::size_t>(m)];
    for (int k : sets.served_devices[m]) budget += gp::Monomial{inv, {{inst.index.var(m, k), 1.0}}};
    prob.constraints.push_back(std::move(budget));
  }
}

Eigen::MatrixXd equal_power(const Instance& inst) {
  const auto& sets = inst.sc.sets;
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(sets.num_aps(), sets.num_devices());
  for (int m = 0; m < sets.num_aps(); ++m)
    for (int k : sets.served_devices[m])
      p(m, k) = inst.sc.cfg.ap_power_max[static_cast<std::size_t>(m)] / sets.tau[m];
  return p;
}

double min_requirement_ratio(const Instance& inst, const Eigen::VectorXd& sinr) {
  return (sinr.array() / inst.gamma_req.array()).minCoeff();
}

AllocationResult from_evaluation(const Instance& inst, const Eigen::MatrixXd& p,
                                 const Evaluation& e) {
  AllocationResult r;
  r.powers.pilot = inst.pilot;
  r.powers.downlink = p;
  r.sinr = e.sinr;
  r.rates = e.rates;
  r.weighted_sum = e.weighted_sum;
  r.requirements_met = e.requirements_met;
  return r;
}

}  // namespace

LogBound lemma3_coeffs(double x_hat) {
  if (!(x_hat > 0.0) || !std::isfinite(x_hat))
    throw DomainError("lemma3_coeffs: expansion point must be positive");
  LogBound b;
  b.rho = x_hat / (1.0 + x_hat);
  b.delta = std::log1p(x_hat) - b.rho * std::log(x_hat);
  return b;
}

LogBound lemma4_coeffs(double x_hat) {
  if (!(x_hat >= kLemma4Threshold) || !std::isfinite(x_hat))
    throw DomainError("lemma4_coeffs: expansion point below (sqrt(17) - 3) / 4");
  const double r = std::sqrt(x_hat * x_hat + 2.0 * x_hat);
  const double q = 1.0 + x_hat;
  LogBound b;
  b.rho = x_hat / r - x_hat * r / (q * q);
  b.delta = r / q - b.rho * std::log(x_hat);
  return b;
}

double MonomialBound::eval(const Eigen::MatrixXd& p, const Eigen::MatrixXd& lambda,
                           const ServingSets& sets, int antennas, Scheme scheme) const {
  double log_v = log_c;
  for (std::size_t j = 0; j < aps.size(); ++j) {
    const int m = aps[j];
    log_v += a[j] * std::log(v_term(scheme, sets, antennas, p(m, device), lambda(m, device), m));
  }
  return std::exp(log_v);
}

std::vector<MonomialBound> theorem4_coeffs(const Eigen::MatrixXd& p_hat,
                                           const Eigen::MatrixXd& lambda_hat,
                                           const ServingSets& sets, int antennas, Scheme scheme) {
  std::vector<MonomialBound> out(static_cast<std::size_t>(sets.num_devices()));
  for (int k = 0; k < sets.num_devices(); ++k) {
    auto& b = out[static_cast<std::size_t>(k)];
    b.device = k;
    b.aps = sets.serving_aps[k];
    std::vector<double> v(b.aps.size());
    double theta = 0.0;
    for (std::size_t j = 0; j < b.aps.size(); ++j) {
      const int m = b.aps[j];
      v[j] = v_term(scheme, sets, antennas, p_hat(m, k), lambda_hat(m, k), m);
      if (!(v[j] > 0.0))
        throw DomainError("theorem4_coeffs: serving link (" + std::to_string(m) + ", " +
                          std::to_string(k) + ") has no power or no estimate");
      theta += std::sqrt(v[j]);
    }
    b.theta_hat = theta;
    b.a.resize(v.size());
    b.log_c = std::log(theta);
    for (std::size_t j = 0; j < v.size(); ++j) {
      b.a[j] = std::sqrt(v[j]) / (2.0 * theta);
      b.log_c -= b.a[j] * std::log(v[j]);
    }
    b.c = std::exp(b.log_c);
  }
  return out;
}

Eigen::VectorXd fix_pilot_power(const SystemConfig& cfg) {
  return Eigen::Map<const Eigen::VectorXd>(cfg.pilot_power_max.data(),
                                           static_cast<Eigen::Index>(cfg.pilot_power_max.size()));
}

std::vector<FblParams> fbl_params(const SystemConfig& cfg) {
  std::vector<FblParams> out;
  out.reserve(cfg.dep.size());
  for (double eps : cfg.dep) out.push_back(FblParams::make(cfg.blocklength(), cfg.num_devices, eps));
  return out;
}

LinkIndex::LinkIndex(const ServingSets& sets)
    : map_(Eigen::MatrixXi::Constant(sets.num_aps(), sets.num_devices(), -1)) {
  for (int m = 0; m < sets.num_aps(); ++m)
    for (int k : sets.served_devices[m]) {
      map_(m, k) = static_cast<int>(pairs_.size());
      pairs_.emplace_back(m, k);
    }
}

Eigen::MatrixXd LinkIndex::to_powers(const Eigen::VectorXd& x) const {
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(map_.rows(), map_.cols());
  for (int v = 0; v < links(); ++v) p(pairs_[v].first, pairs_[v].second) = x(v);
  return p;
}

Eigen::VectorXd LinkIndex::from_powers(const Eigen::MatrixXd& p) const {
  Eigen::VectorXd x(links());
  for (int v = 0; v < links(); ++v) x(v) = p(pairs_[v].first, pairs_[v].second);
  return x;
}

Instance::Instance(const Scenario& scenario, Scheme s)
    : sc(scenario), scheme(s), index(scenario.sets) {
  check_dimensions(scheme, sc.sets, sc.cfg.antennas_per_ap);
  fbl = fbl_params(sc.cfg);
  pilot = fix_pilot_power(sc.cfg);
  stats = estimation_variance(sc.net.beta, pilot, sc.cfg.num_devices);
  gamma_req.resize(sc.cfg.num_devices);
  for (int k = 0; k < sc.cfg.num_devices; ++k)
    gamma_req(k) = required_sinr(sc.cfg.rate_req[static_cast<std::size_t>(k)],
                                 fbl[static_cast<std::size_t>(k)]);
}

Evaluation evaluate(const Instance& inst, const Eigen::MatrixXd& downlink) {
  Evaluation e;
  e.sinr = sinr_lb(inst.scheme, inst.sc.sets, inst.stats, inst.sc.net.beta, downlink,
                   inst.antennas());
  const int k_count = inst.num_devices();
  e.rates.resize(k_count);
  e.requirements_met = true;
  for (int k = 0; k < k_count; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    e.rates(k) = e.sinr(k) > 0.0 ? lb_rate(e.sinr(k), inst.fbl[ku]).bits : 0.0;
    e.weighted_sum += inst.sc.cfg.weights[ku] * e.rates(k);
    if (e.rates(k) < inst.sc.cfg.rate_req[ku] - 1e-9) e.requirements_met = false;
  }
  return e;
}

ScaState expand(const Instance& inst, const Eigen::MatrixXd& powers, const Eigen::VectorXd& chi,
                int iteration) {
  const int k_count = inst.num_devices();
  ScaState st;
  st.iteration = iteration;
  st.chi = chi;
  st.powers = powers;
  st.theta = theorem4_coeffs(powers, inst.stats.lambda, inst.sc.sets, inst.antennas(),
                             inst.scheme);
  st.rho.resize(k_count);
  st.delta.resize(k_count);
  st.rho_hat.resize(k_count);
  st.delta_hat.resize(k_count);
  st.w_hat.resize(k_count);
  for (int k = 0; k < k_count; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    const LogBound l3 = lemma3_coeffs(chi(k));
    double x4 = chi(k);
    if (x4 < kLemma4Threshold) {
      x4 = kLemma4Threshold;
      ++st.lemma4_clamps;
    }
    const LogBound l4 = lemma4_coeffs(x4);
    st.rho(k) = l3.rho;
    st.delta(k) = l3.delta;
    st.rho_hat(k) = l4.rho;
    st.delta_hat(k) = l4.delta;
    const auto& f = inst.fbl[ku];
    st.w_hat(k) = inst.sc.cfg.weights[ku] * f.prefactor() * (l3.rho - f.alpha * l4.rho);
    if (!(st.w_hat(k) > 0.0)) st.dropped.push_back(k);
  }
  return st;
}

double surrogate_objective(const Instance& inst, const ScaState& st, const Eigen::VectorXd& chi) {
  double total = 0.0;
  for (int k = 0; k < inst.num_devices(); ++k) {
    const auto ku = static_cast<std::size_t>(k);
    const auto& f = inst.fbl[ku];
    const double lx = std::log(chi(k));
    const double nats = st.rho(k) * lx + st.delta(k) - f.alpha * (st.rho_hat(k) * lx + st.delta_hat(k));
    total += inst.sc.cfg.weights[ku] * f.prefactor() * nats;
  }
  return total;
}

gp::Problem build_subproblem(const Instance& inst, const ScaState& st) {
  const int k_count = inst.num_devices();
  const int links = inst.index.links();
  gp::Problem prob;
  prob.num_vars = links + k_count;
  gp::Monomial obj{1.0, {}};
  for (int k = 0; k < k_count; ++k)
    if (st.w_hat(k) > 0.0) obj.exponents.emplace_back(links + k, -st.w_hat(k));
  prob.objective = obj;
  for (int k = 0; k < k_count; ++k)
    prob.constraints.push_back(
        sinr_constraint(inst, st.theta[static_cast<std::size_t>(k)], k, links + k, 1.0));
  for (int k = 0; k < k_count; ++k)
    prob.constraints.push_back(gp::Monomial{inst.gamma_req(k), {{links + k, -1.0}}});
  add_budgets(inst, prob);
  return prob;
}

gp::Problem build_feasibility(const Instance& inst, const std::vector<MonomialBound>& bounds) {
  const int k_count = inst.num_devices();
  const int phi = inst.index.links();
  gp::Problem prob;
  prob.num_vars = phi + 1;
  prob.objective = gp::Monomial{1.0, {{phi, -1.0}}};
  for (int k = 0; k < k_count; ++k)
    prob.constraints.push_back(
        sinr_constraint(inst, bounds[static_cast<std::size_t>(k)], k, phi, inst.gamma_req(k)));
  add_budgets(inst, prob);
  return prob;
}

FeasibleStart find_feasible_start(const Instance& inst, const gp::Options& gp_opts,
                                  int max_rounds, double min_gain) {
  FeasibleStart out;
  out.powers = equal_power(inst);
  out.phi = min_requirement_ratio(inst, evaluate(inst, out.powers).sinr);
  double prev = out.phi;
  for (int round = 1; round <= max_rounds; ++round) {
    const auto bounds = theorem4_coeffs(out.powers, inst.stats.lambda, inst.sc.sets,
                                        inst.antennas(), inst.scheme);
    const gp::Problem prob = build_feasibility(inst, bounds);
    Eigen::VectorXd warm(prob.num_vars);
    warm.head(inst.index.links()) = inst.index.from_powers(out.powers) * (1.0 - 1e-6);
    warm(inst.index.links()) = 0.5 * prev;
    const gp::Solution sol = gp::solve(prob, gp_opts, warm);
    if (sol.status != gp::Status::Optimal)
      throw SolverError("feasibility GP: " + std::string(gp::to_string(sol.status)), 0);
    out.rounds = round;
    const Eigen::MatrixXd p = inst.index.to_powers(sol.values);
    const double phi = min_requirement_ratio(inst, evaluate(inst, p).sinr);
    if (phi > out.phi) {
      out.phi = phi;
      out.powers = p;
    }
    if (out.phi >= 1.0 || out.phi - prev < min_gain * prev) break;
    prev = out.phi;
  }
  return out;
}

std::string_view to_string(AllocStatus s) {
  switch (s) {
    case AllocStatus::Converged: return "converged";
    case AllocStatus::InfeasibleRequirements: return "infeasible_requirements";
    case AllocStatus::IterationCap: return "iteration_cap";
  }
  return "unknown";
}

AllocationResult algorithm1(const Scenario& sc, Scheme scheme, const AlgorithmOptions& opts) {
  const Instance inst(sc, scheme);
  const FeasibleStart start = find_feasible_start(inst, opts.gp);
  Evaluation ev = evaluate(inst, start.powers);
  AllocationResult res = from_evaluation(inst, start.powers, ev);
  res.phi = start.phi;
  res.history = {ev.weighted_sum};
  if (start.phi < 1.0) {
    res.status = AllocStatus::InfeasibleRequirements;
    return res;
  }

  const int links = inst.index.links();
  Eigen::MatrixXd p = start.powers;
  double obj = ev.weighted_sum;
  double obj_prev = opts.zeta * obj;
  Eigen::VectorXd prev_solution;
  res.status = AllocStatus::Converged;

  while (obj_prev > 0.0 && (obj - obj_prev) / obj_prev >= opts.zeta) {
    if (res.iterations >= opts.max_iterations) {
      res.status = AllocStatus::IterationCap;
      break;
    }
    const ScaState st = expand(inst, p, ev.sinr, res.iterations + 1);
    res.lemma4_clamps += st.lemma4_clamps;
    res.dropped_weights += static_cast<int>(st.dropped.size());
    if (st.lemma4_clamps == 0)
      res.surrogate_gap = std::max(res.surrogate_gap,
                                   std::abs(surrogate_objective(inst, st, st.chi) - obj));
    const gp::Problem prob = build_subproblem(inst, st);
    if (prev_solution.size() == prob.num_vars) {
      for (const auto& c : prob.constraints)
        res.carryover_violation = std::max(res.carryover_violation, c.eval(prev_solution) - 1.0);
    }

    Eigen::VectorXd warm(prob.num_vars);
    warm.head(links) = inst.index.from_powers(p);
    for (int k = 0; k < inst.num_devices(); ++k) {
      const double g = ev.sinr(k);
      warm(links + k) = g > inst.gamma_req(k) ? std::sqrt(g * inst.gamma_req(k)) : g;
    }
    const gp::Solution sol = gp::solve(prob, opts.gp, warm);
    if (sol.status != gp::Status::Optimal)
      throw SolverError("SCA subproblem " + std::to_string(st.iteration) + ": " +
                            std::string(gp::to_string(sol.status)),
                        st.iteration);
    ++res.iterations;
    prev_solution = sol.values;

    const Eigen::MatrixXd p_new = inst.index.to_powers(sol.values);
    const Evaluation ev_new = evaluate(inst, p_new);
    res.history.push_back(ev_new.weighted_sum);
    obj_prev = obj;
    obj = ev_new.weighted_sum;
    if (obj >= obj_prev) {  // keep the best iterate
      p = p_new;
      ev = ev_new;
    }
  }

  const AllocationResult best = from_evaluation(inst, p, ev);
  res.powers = best.powers;
  res.sinr = best.sinr;
  res.rates = best.rates;
  res.weighted_sum = best.weighted_sum;
  res.requirements_met = best.requirements_met;
  return res;
}

AllocationResult baseline_equal_power(const Scenario& sc, Scheme scheme) {
  const Instance inst(sc, scheme);
  const Eigen::MatrixXd p = equal_power(inst);
  AllocationResult res = from_evaluation(inst, p, evaluate(inst, p));
  res.status = res.requirements_met ? AllocStatus::Converged : AllocStatus::InfeasibleRequirements;
  res.phi = min_requirement_ratio(inst, res.sinr);
  res.history = {res.weighted_sum};
  return res;
}

RoundRobinPlan round_robin_partition(int num_devices, int first_group) {
  if (first_group < 1 || first_group >= num_devices)
    throw DomainError("round_robin_partition: need 1 <= K1 < K");
  RoundRobinPlan plan;
  plan.groups.resize(2);
  for (int k = 0; k < num_devices; ++k) plan.groups[k < first_group ? 0 : 1].push_back(k);
  plan.time_share = {0.5, 0.5};
  return plan;
}

AllocationResult run_round_robin(const Scenario& sc,
                                 const RoundRobinPlan& plan,
                                 const std::function<AllocationResult(const Scenario&)>& solve) {
  const int k_count = sc.cfg.num_devices;
  AllocationResult out;
  out.sinr = Eigen::VectorXd::Zero(k_count);
  out.rates = Eigen::VectorXd::Zero(k_count);
  out.requirements_met = true;
  out.status = AllocStatus::Converged;
  out.phi = std::numeric_limits<double>::infinity();
  for (std::size_t g = 0; g < plan.groups.size(); ++g) {
    const auto& group = plan.groups[g];
    const AllocationResult r = solve(subset_devices(sc, group));
    const double share = plan.time_share[g];
    for (std::size_t j = 0; j < group.size(); ++j) {
      const int k = group[j];
      out.sinr(k) = r.sinr(static_cast<Eigen::Index>(j));
      out.rates(k) = share * r.rates(static_cast<Eigen::Index>(j));
    }
    out.weighted_sum += share * r.weighted_sum;
    out.requirements_met = out.requirements_met && r.requirements_met;
    out.iterations = std::max(out.iterations, r.iterations);
    out.phi = std::min(out.phi, r.phi);
    out.lemma4_clamps += r.lemma4_clamps;
    out.dropped_weights += r.dropped_weights;
    out.carryover_violation = std::max(out.carryover_violation, r.carryover_violation);
    out.surrogate_gap = std::max(out.surrogate_gap, r.surrogate_gap);
    if (r.status == AllocStatus::InfeasibleRequirements)
      out.status = AllocStatus::InfeasibleRequirements;
    else if (r.status == AllocStatus::IterationCap && out.status == AllocStatus::Converged)
      out.status = AllocStatus::IterationCap;
  }
  return out;
}

}  // namespace cfmimo
