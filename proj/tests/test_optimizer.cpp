#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"

#include "cfmimo/errors.hpp"
#include "cfmimo/optimizer.hpp"
#include "support.hpp"

using namespace cfmimo;
using namespace cfmimo::testing;
using doctest::Approx;

namespace {

Scenario table_scale(std::uint64_t seed, double threshold = 0.95) {
  auto cfg = SystemConfig::defaults(16, 9, 10);
  cfg.selection_threshold = threshold;
  return make_scenario(cfg, seed);
}

Scenario with_random_weights(Scenario sc, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto& w : sc.cfg.weights) w = u(rng);
  return sc;
}

}  // namespace

TEST_SUITE("optimizer") {

TEST_CASE("Lemma 3 coefficients") {
  auto b = lemma3_coeffs(1.0);
  CHECK(b.rho == Approx(0.5).epsilon(1e-15));
  CHECK(b.delta == Approx(std::log(2.0)).epsilon(1e-15));
  CHECK_THROWS_AS(lemma3_coeffs(0.0), DomainError);
  CHECK_THROWS_AS(lemma3_coeffs(-1.0), DomainError);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int i = 0; i < 10; ++i) {
    const double xh = std::pow(10.0, u(rng));
    auto c = lemma3_coeffs(xh);
    CHECK(std::abs(c.rho * std::log(xh) + c.delta - std::log1p(xh)) <= 1e-12);
    for (int j = 0; j < 1000; ++j) {
      const double x = 1e3 * std::pow(10.0, -6.0 * (j + 0.5) / 1000);
      CHECK(c.rho * std::log(x) + c.delta <= std::log1p(x) + 1e-12);
    }
  }
}

TEST_CASE("Lemma 4 coefficients") {
  CHECK(kLemma4Threshold == Approx((std::sqrt(17.0) - 3) / 4).epsilon(1e-15));
  auto b = lemma4_coeffs(1.0);
  CHECK(b.rho == Approx(1 / std::sqrt(3.0) - std::sqrt(3.0) / 4).epsilon(1e-14));
  CHECK(b.rho == Approx(0.14433756729740644).epsilon(1e-12));
  CHECK(b.delta == Approx(std::sqrt(3.0) / 2).epsilon(1e-14));
  CHECK_THROWS_AS(lemma4_coeffs(0.28), DomainError);
  CHECK_NOTHROW(lemma4_coeffs(kLemma4Threshold));
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(std::log(kLemma4Threshold), std::log(1e3));
  for (int i = 0; i < 10; ++i) {
    const double xh = std::exp(u(rng));
    auto c = lemma4_coeffs(xh);
    CHECK(std::abs(c.rho * std::log(xh) + c.delta - dispersion_root(xh)) <= 1e-12);
    for (int j = 0; j < 1000; ++j) {
      const double x = std::exp(u(rng));
      CHECK(dispersion_root(x) <= c.rho * std::log(x) + c.delta + 1e-12);
    }
  }
}

TEST_CASE("Theorem 4 monomial bound") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> lu(-4, 0);
  for (int aps = 1; aps <= 4; ++aps) {
    std::vector<int> serving(static_cast<std::size_t>(aps));
    std::iota(serving.begin(), serving.end(), 0);
    auto sets = ServingSets::from_membership({serving}, aps);
    Eigen::MatrixXd lambda(aps, 1), p_hat(aps, 1);
    for (int m = 0; m < aps; ++m) {
      lambda(m, 0) = std::pow(10.0, 3 * lu(rng) + 6);
      p_hat(m, 0) = std::pow(10.0, lu(rng));
    }
    for (auto scheme : {Scheme::Mrt, Scheme::Lzf}) {
      auto b = theorem4_coeffs(p_hat, lambda, sets, 8, scheme)[0];
      CHECK(std::accumulate(b.a.begin(), b.a.end(), 0.0) == Approx(0.5).epsilon(1e-14));
      CHECK(std::abs(b.eval(p_hat, lambda, sets, 8, scheme) - b.theta_hat) <= 1e-12 * b.theta_hat);
      if (aps == 1) {
        CHECK(b.a[0] == Approx(0.5));
        CHECK(b.c == Approx(1.0).epsilon(1e-14));
      }
      const int t = scheme == Scheme::Mrt ? 0 : 1;
      for (int j = 0; j < 1000; ++j) {
        Eigen::MatrixXd p(aps, 1);
        for (int m = 0; m < aps; ++m) p(m, 0) = std::pow(10.0, lu(rng));
        double theta = 0;
        for (int m = 0; m < aps; ++m) theta += std::sqrt((8 - t) * p(m, 0) * lambda(m, 0));
        const double bound = b.eval(p, lambda, sets, 8, scheme);
        CHECK(bound <= theta * (1 + 1e-12));
        if (aps == 1) CHECK(bound == Approx(theta).epsilon(1e-12));
      }
    }
  }
  auto sets = ServingSets::from_membership({{0, 1}}, 2);
  Eigen::MatrixXd lambda = Eigen::MatrixXd::Ones(2, 1);
  Eigen::MatrixXd p = Eigen::MatrixXd::Ones(2, 1);
  p(1, 0) = 0;
  CHECK_THROWS_AS(theorem4_coeffs(p, lambda, sets, 4, Scheme::Mrt), DomainError);
}

TEST_CASE("pilot power and Lemma 2 monotonicity") {
  auto sc = table_scale(21);
  auto pilot = fix_pilot_power(sc.cfg);
  for (int k = 0; k < 10; ++k) CHECK(pilot(k) == sc.cfg.pilot_power_max[k]);
  auto p = fixed_link_power(sc, 0.05);
  auto fbl = fbl_params(sc.cfg);
  auto full = estimation_variance(sc.net.beta, pilot, 10);
  auto half = estimation_variance(sc.net.beta, 0.5 * pilot, 10);
  // lambda-hat matches the closed form at full pilot power.
  const double b = sc.net.beta(3, 2);
  CHECK(full.lambda(3, 2) == Approx(10 * 0.1 * b * b / (10 * 0.1 * b + 1)).epsilon(1e-14));
  for (auto s : {Scheme::Mrt, Scheme::Lzf}) {
    auto g_full = sinr_lb(s, sc.sets, full, sc.net.beta, p.downlink, 9);
    auto g_half = sinr_lb(s, sc.sets, half, sc.net.beta, p.downlink, 9);
    for (int k = 0; k < 10; ++k)
      CHECK(lb_rate(g_full(k), fbl[k]).bits > lb_rate(g_half(k), fbl[k]).bits);
  }
}

TEST_CASE("link index") {
  auto sets = ServingSets::from_membership({{1}, {0, 1}, {0}}, 2);
  LinkIndex idx(sets);
  CHECK(idx.links() == 4);
  CHECK(idx.var(0, 1) == 0);
  CHECK(idx.var(0, 2) == 1);
  CHECK(idx.var(1, 0) == 2);
  CHECK(idx.var(1, 1) == 3);
  CHECK(idx.var(1, 2) == -1);
  Eigen::VectorXd x(4);
  x << 0.1, 0.2, 0.3, 0.4;
  auto p = idx.to_powers(x);
  CHECK(p(1, 2) == 0.0);
  CHECK(p(0, 2) == 0.2);
  CHECK(idx.from_powers(p) == x);
}

TEST_CASE("single-link subproblem") {
  auto cfg = SystemConfig::defaults(1, 4, 1);
  auto sc = make_scenario(cfg, 3);
  sc.net.device_positions[0] = {600, 500};  // 100 m from the AP
  sc.net.beta = large_scale_gains(sc.net.ap_positions, sc.net.device_positions, cfg);
  Instance inst(sc, Scheme::Mrt);
  Eigen::MatrixXd p = Eigen::MatrixXd::Constant(1, 1, 0.3);
  auto ev = evaluate(inst, p);
  auto st = expand(inst, p, ev.sinr, 1);
  auto prob = build_subproblem(inst, st);
  CHECK(prob.num_vars == 2);
  CHECK(prob.constraints.size() == 3);
  CHECK_NOTHROW(prob.validate());
  auto sol = gp::solve(prob);
  REQUIRE(sol.status == gp::Status::Optimal);
  CHECK(sol.values(0) == Approx(1.0).epsilon(1e-6));
  auto res = algorithm1(sc, Scheme::Mrt);
  CHECK(res.powers.downlink(0, 0) == Approx(1.0).epsilon(1e-6));
}

TEST_CASE("subproblem structure on a full scenario") {
  auto sc = with_random_weights(table_scale(31), 31);
  for (auto scheme : {Scheme::Mrt, Scheme::Lzf}) {
    Instance inst(sc, scheme);
    auto start = find_feasible_start(inst);
    REQUIRE(start.phi >= 1.0);
    auto ev = evaluate(inst, start.powers);
    auto st = expand(inst, start.powers, ev.sinr, 1);
    auto prob = build_subproblem(inst, st);
    CHECK_NOTHROW(prob.validate());
    CHECK(prob.num_vars == inst.index.links() + 10);
    for (const auto& c : prob.constraints)
      for (const auto& t : c.terms) CHECK(t.coefficient > 0);
    // The expansion point itself satisfies the SINR constraints with
    // chi = SINR (the bound is tight there).
    Eigen::VectorXd x(prob.num_vars);
    x.head(inst.index.links()) = inst.index.from_powers(start.powers);
    x.tail(10) = ev.sinr;
    for (int k = 0; k < 10; ++k) CHECK(prob.constraints[k].eval(x) == Approx(1.0).epsilon(1e-10));
    // Surrogate equals the true objective at the expansion point.
    if (st.lemma4_clamps == 0)
      CHECK(surrogate_objective(inst, st, ev.sinr) == Approx(ev.weighted_sum).epsilon(1e-10));
    // Monotone Lemma 3/4 sandwich: the surrogate never exceeds the truth.
    Eigen::VectorXd chi = ev.sinr;
    for (double s : {0.5, 0.9, 1.1, 2.0}) {
      Eigen::VectorXd c2 = s * chi;
      double truth = 0;
      for (int k = 0; k < 10; ++k) truth += sc.cfg.weights[k] * lb_rate(c2(k), inst.fbl[k]).bits;
      if ((c2.array() >= kLemma4Threshold).all())
        CHECK(surrogate_objective(inst, st, c2) <= truth + 1e-10);
    }
  }
}

TEST_CASE("feasibility problem") {
  SUBCASE("device near its AP is feasible") {
    auto cfg = SystemConfig::defaults(4, 8, 1);
    auto sc = make_scenario(cfg, 1);
    sc.net.device_positions[0] = {260, 240};
    sc.net.beta = large_scale_gains(sc.net.ap_positions, sc.net.device_positions, cfg);
    sc.sets = select_aps(sc.net.beta, cfg.selection_threshold);
    Instance inst(sc, Scheme::Mrt);
    CHECK(find_feasible_start(inst).phi > 1.0);
  }
  SUBCASE("huge requirement is infeasible") {
    auto sc = table_scale(4);
    Instance inst(sc, Scheme::Mrt);
    inst.gamma_req *= 1e6;
    CHECK(find_feasible_start(inst).phi < 1.0);
    auto cfg = sc.cfg;
    for (auto& r : cfg.rate_req) r = 30.0;
    auto sc2 = make_scenario(cfg, 4);
    auto res = algorithm1(sc2, Scheme::Mrt);
    CHECK(res.status == AllocStatus::InfeasibleRequirements);
    CHECK_FALSE(res.requirements_met);
  }
  SUBCASE("phi scales linearly with the requirements") {
    auto sc = table_scale(6);
    Instance inst(sc, Scheme::Lzf);
    auto p0 = find_feasible_start(inst).powers;
    auto bounds = theorem4_coeffs(p0, inst.stats.lambda, sc.sets, 9, Scheme::Lzf);
    auto a = gp::solve(build_feasibility(inst, bounds));
    inst.gamma_req *= 0.5;
    auto b = gp::solve(build_feasibility(inst, bounds));
    REQUIRE(a.status == gp::Status::Optimal);
    REQUIRE(b.status == gp::Status::Optimal);
    const int phi = inst.index.links();
    CHECK(b.values(phi) == Approx(2 * a.values(phi)).epsilon(1e-6));
  }
}

TEST_CASE("Algorithm 1 on Table-I-scale scenarios") {
  int ran = 0;
  for (std::uint64_t seed : {101u, 102u, 103u}) {
    auto sc = with_random_weights(table_scale(seed), seed);
    for (auto scheme : {Scheme::Mrt, Scheme::Lzf}) {
      auto res = algorithm1(sc, scheme);
      auto base = baseline_equal_power(sc, scheme);
      CAPTURE(seed);
      CAPTURE(to_string(scheme));
      if (res.status == AllocStatus::InfeasibleRequirements) continue;
      ++ran;
      CHECK(res.status == AllocStatus::Converged);
      CHECK(res.requirements_met);
      CHECK(res.iterations <= 5);
      for (std::size_t i = 1; i < res.history.size(); ++i)
        CHECK(res.history[i] >= res.history[i - 1] - 1e-9);
      CHECK(res.carryover_violation <= 1e-9);
      CHECK(res.surrogate_gap <= 1e-10);
      for (int m = 0; m < 16; ++m)
        CHECK(res.powers.downlink.row(m).sum() <= sc.cfg.ap_power_max[m] + 1e-9);
      CHECK(res.weighted_sum >= base.weighted_sum - 1e-9);
      CHECK(res.weighted_sum == Approx(res.history.back()).epsilon(1e-12));
      double ws = 0;
      for (int k = 0; k < 10; ++k) ws += sc.cfg.weights[k] * res.rates(k);
      CHECK(ws == Approx(res.weighted_sum).epsilon(1e-12));
    }
  }
  CHECK(ran >= 4);
}

TEST_CASE("zero weights are dropped from the objective") {
  auto sc = table_scale(7);
  sc.cfg.weights[2] = 0.0;
  sc.cfg.weights[5] = 0.0;
  auto res = algorithm1(sc, Scheme::Mrt);
  REQUIRE(res.status == AllocStatus::Converged);
  CHECK(res.dropped_weights >= 2);
  CHECK(res.requirements_met);
}

TEST_CASE("FZF refuses too few antennas") {
  auto sc = table_scale(8);  // N = 9 < K = 10
  CHECK_THROWS_AS(algorithm1(sc, Scheme::Fzf), ConfigError);
  CHECK_THROWS_AS(baseline_equal_power(sc, Scheme::Fzf), ConfigError);
}

TEST_CASE("GP failures surface as SolverError") {
  auto sc = table_scale(9);
  AlgorithmOptions o;
  o.gp.max_outer = 1;
  CHECK_THROWS_AS(algorithm1(sc, Scheme::Mrt, o), SolverError);
}

TEST_CASE("equal-power baseline") {
  auto sets = ServingSets::from_membership({{0}, {0}, {1}}, 2);
  auto cfg = SystemConfig::defaults(2, 4, 3);
  Scenario sc{cfg, deploy(cfg, 1), sets};
  auto base = baseline_equal_power(sc, Scheme::Mrt);
  CHECK(base.powers.downlink(0, 0) == 0.5);
  CHECK(base.powers.downlink(0, 1) == 0.5);
  CHECK(base.powers.downlink(1, 2) == 1.0);
  CHECK(base.powers.downlink(1, 0) == 0.0);
  auto full = table_scale(10);
  auto b2 = baseline_equal_power(full, Scheme::Lzf);
  for (int m = 0; m < 16; ++m)
    if (full.sets.tau[m] > 0) CHECK(b2.powers.downlink.row(m).sum() == Approx(1.0).epsilon(1e-15));
}

TEST_CASE("round robin") {
  auto plan = round_robin_partition(16, 8);
  REQUIRE(plan.groups.size() == 2);
  CHECK(plan.groups[0].size() == 8);
  CHECK(plan.groups[1].size() == 8);
  CHECK(plan.groups[1].front() == 8);
  CHECK(plan.time_share == std::vector<double>{0.5, 0.5});
  auto edge = round_robin_partition(10, 9);
  CHECK(edge.groups[0].size() == 9);
  CHECK(edge.groups[1] == std::vector<int>{9});
  CHECK_THROWS_AS(round_robin_partition(4, 0), DomainError);
  CHECK_THROWS_AS(round_robin_partition(4, 4), DomainError);

  auto cfg = SystemConfig::defaults(16, 9, 16);
  auto sc = with_random_weights(make_scenario(cfg, 12), 12);
  std::vector<double> group_sums;
  auto solve = [&](const Scenario& s) {
    auto r = algorithm1(s, Scheme::Fzf);
    group_sums.push_back(r.weighted_sum);
    return r;
  };
  auto rr = run_round_robin(sc, round_robin_partition(16, 8), solve);
  REQUIRE(group_sums.size() == 2);
  CHECK(rr.weighted_sum == Approx(0.5 * group_sums[0] + 0.5 * group_sums[1]).epsilon(1e-12));
  double ws = 0;
  for (int k = 0; k < 16; ++k) ws += sc.cfg.weights[k] * rr.rates(k);
  CHECK(ws == Approx(rr.weighted_sum).epsilon(1e-12));
}

}
