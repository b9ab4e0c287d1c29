#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"

#include "cfmimo/errors.hpp"
#include "cfmimo/gp.hpp"
#include "gp_bruteforce.hpp"

using namespace cfmimo;
using namespace cfmimo::gp;
using doctest::Approx;

namespace {

Monomial mono(double c, std::vector<std::pair<int, double>> e) { return Monomial{c, std::move(e)}; }

Posynomial sum(std::initializer_list<Monomial> terms) {
  Posynomial p;
  for (const auto& t : terms) p += t;
  return p;
}

}  // namespace

TEST_SUITE("gp") {

TEST_CASE("monomial and posynomial algebra") {
  auto a = mono(2.0, {{0, 1.0}, {1, -1.0}});
  auto b = mono(3.0, {{1, 2.0}});
  Eigen::VectorXd x(2);
  x << 1.5, 0.7;
  CHECK((a * b).eval(x) == Approx(a.eval(x) * b.eval(x)));
  CHECK((a * b).exponents.size() == 2);
  CHECK(pow(a, -0.5).eval(x) == Approx(std::pow(a.eval(x), -0.5)));
  auto q = sum({a, b});
  CHECK(q.eval(x) == Approx(a.eval(x) + b.eval(x)));
  CHECK((q / b).eval(x) == Approx(q.eval(x) / b.eval(x)));
  CHECK(Posynomial(a).is_monomial());
  CHECK_FALSE(q.is_monomial());
}

TEST_CASE("problem validation") {
  Problem p;
  p.num_vars = 2;
  p.objective = mono(1, {{0, 1}});
  p.constraints = {mono(1, {{1, -1}})};
  CHECK_NOTHROW(p.validate());
  auto bad = p;
  bad.constraints[0].terms[0].coefficient = -1;
  CHECK_THROWS_AS(bad.validate(), DomainError);
  bad = p;
  bad.constraints = {mono(1, {{5, 1}})};
  CHECK_THROWS_AS(bad.validate(), DomainError);
  bad = p;
  bad.constraints = {mono(1, {{0, -1}})};  // variable 1 unused
  CHECK_THROWS_AS(bad.validate(), DomainError);
  bad = p;
  bad.constraints.push_back(Posynomial{});
  CHECK_THROWS_AS(bad.validate(), DomainError);
}

TEST_CASE("log transform") {
  Problem p;
  p.num_vars = 2;
  p.objective = mono(1, {{0, 1}});
  p.constraints = {mono(2, {{0, 1}, {1, -1}}), sum({mono(1, {{0, 1}}), mono(1, {{0, -1}})})};
  auto lp = to_log_convex(p);
  REQUIRE(lp.constraints.size() == 2);
  REQUIRE(lp.constraints[0].terms.size() == 1);
  CHECK(lp.constraints[0].terms[0].offset == Approx(std::log(2.0)));
  CHECK(lp.constraints[0].terms[0].coeffs ==
        std::vector<std::pair<int, double>>{{0, 1.0}, {1, -1.0}});
  Eigen::VectorXd y(2);
  y << 0.3, -1.2;
  const Eigen::VectorXd x = y.array().exp();
  CHECK(lp.constraints[0].value(y) == Approx(std::log(2.0) + 0.3 + 1.2));
  for (std::size_t i = 0; i < 2; ++i)
    CHECK(lp.constraints[i].value(y) == Approx(std::log(p.constraints[i].eval(x))));
  // x + 1/x has minimum log value ln 2 at y = 0.
  CHECK(lp.constraints[1].value(Eigen::VectorXd::Zero(2)) == Approx(std::log(2.0)));
  // Large arguments do not overflow.
  Eigen::VectorXd big = Eigen::VectorXd::Constant(2, 800.0);
  CHECK(std::isfinite(lp.constraints[1].value(big)));
  CHECK(lp.constraints[1].value(big) == Approx(800.0));
  // Gradient matches finite differences.
  auto g = lp.constraints[1].gradient(y);
  const double h = 1e-6;
  Eigen::VectorXd yp = y, ym = y;
  yp(0) += h;
  ym(0) -= h;
  CHECK(g(0) == Approx((lp.constraints[1].value(yp) - lp.constraints[1].value(ym)) / (2 * h)).epsilon(1e-7));
  CHECK(g(1) == 0.0);
}

TEST_CASE("analytic optima") {
  SUBCASE("minimize x s.t. 2/x <= 1") {
    Problem p{1, mono(1, {{0, 1}}), {mono(2, {{0, -1}})}};
    auto s = solve(p);
    CHECK(s.status == Status::Optimal);
    CHECK(s.values(0) == Approx(2.0).epsilon(1e-6));
    CHECK(s.kkt_residual <= 1e-6);
  }
  SUBCASE("minimize x + y s.t. 1/(xy) <= 1") {
    Problem p{2, sum({mono(1, {{0, 1}}), mono(1, {{1, 1}})}), {mono(1, {{0, -1}, {1, -1}})}};
    auto s = solve(p);
    CHECK(s.status == Status::Optimal);
    CHECK(s.values(0) == Approx(1.0).epsilon(1e-6));
    CHECK(s.values(1) == Approx(1.0).epsilon(1e-6));
    CHECK(s.objective == Approx(2.0).epsilon(1e-6));
    CHECK(s.kkt_residual <= 1e-6);
  }
  SUBCASE("minimize 1/x s.t. 1 <= x <= 5") {
    Problem p{1, mono(1, {{0, -1}}), {mono(0.2, {{0, 1}}), mono(1, {{0, -1}})}};
    auto s = solve(p);
    CHECK(s.status == Status::Optimal);
    CHECK(s.values(0) == Approx(5.0).epsilon(1e-6));
  }
}

TEST_CASE("failure statuses") {
  SUBCASE("infeasible carries the Phase-I value") {
    Problem p{1, mono(1, {{0, 1}}), {sum({mono(1, {{0, 1}}), mono(1, {{0, -1}})})}};
    auto s = solve(p);
    CHECK(s.status == Status::Infeasible);
    CHECK(s.phase1_slack == Approx(std::log(2.0)).epsilon(1e-6));
  }
  SUBCASE("unbounded") {
    Problem p{1, mono(1, {{0, 1}}), {mono(0.2, {{0, 1}})}};
    CHECK(solve(p).status == Status::Unbounded);
  }
  SUBCASE("iteration cap") {
    Problem p{2, sum({mono(1, {{0, 1}}), mono(1, {{1, 1}})}), {mono(1, {{0, -1}, {1, -1}})}};
    Options o;
    o.max_outer = 2;
    CHECK(solve(p, o).status == Status::MaxIterations);
  }
  CHECK(to_string(Status::Unbounded) == "unbounded");
}

TEST_CASE("warm start") {
  Problem p{2, sum({mono(1, {{0, 1}}), mono(1, {{1, 1}})}), {mono(1, {{0, -1}, {1, -1}})}};
  Eigen::VectorXd w(2);
  w << 3.0, 4.0;
  auto warm = solve(p, {}, w);
  CHECK(warm.status == Status::Optimal);
  CHECK(warm.objective == Approx(2.0).epsilon(1e-6));
  w << 0.1, 0.1;  // infeasible warm start
  auto cold = solve(p, {}, w);
  CHECK(cold.status == Status::Optimal);
  CHECK(cold.objective == Approx(2.0).epsilon(1e-6));
}

TEST_CASE("random small problems agree with brute force") {
  std::mt19937_64 rng(2718);
  int checked = 0;
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 1 + trial % 3;
    auto p = testing::random_gp(rng, n);
    auto s = solve(p);
    REQUIRE(s.status == Status::Optimal);
    CHECK(s.kkt_residual <= 1e-6);
    CHECK(testing::feasible(p, s.values, 1e-8));
    Eigen::VectorXd bx;
    const double brute = testing::brute_force_gp(p, bx);
    CHECK_MESSAGE(std::abs(s.objective - brute) <= 1e-3 * std::abs(brute),
                  "trial " << trial << " solver " << s.objective << " brute " << brute);
    ++checked;
  }
  CHECK(checked == 30);
}

TEST_CASE("objective scaling leaves the argmin unchanged") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    auto p = testing::random_gp(rng, 2);
    auto a = solve(p);
    for (double c : {1e-3, 7.0, 1e4}) {
      auto q = p;
      for (auto& t : q.objective.terms) t.coefficient *= c;
      auto b = solve(q);
      REQUIRE(b.status == Status::Optimal);
      CHECK((a.values.array().log() - b.values.array().log()).abs().maxCoeff() <= 1e-5);
    }
  }
}

TEST_CASE("solving is deterministic") {
  std::mt19937_64 rng(8);
  auto p = testing::random_gp(rng, 3);
  auto a = solve(p);
  auto b = solve(p);
  CHECK(a.values == b.values);
  CHECK(a.objective == b.objective);
  CHECK(a.newton_steps == b.newton_steps);
}

TEST_CASE("text dump") {
  Problem p{2, sum({mono(1, {{0, 1}}), mono(1.5, {{1, 1}})}), {mono(1, {{0, -1}, {1, -1}})}};
  std::ostringstream out;
  write_problem(out, p);
  CHECK(out.str() == "variables 2\nobjective\n1 0:1\n1.5 1:1\nconstraint 0\n1 0:-1 1:-1\n");
}

}
