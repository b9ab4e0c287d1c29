#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "doctest.h"

#include "cfmimo/errors.hpp"
#include "cfmimo/sysmodel.hpp"

using namespace cfmimo;
using doctest::Approx;

TEST_SUITE("sysmodel") {

TEST_CASE("path loss oracle values") {
  auto cfg = SystemConfig::defaults(16, 9, 10);
  CHECK(path_loss_constant_db(cfg) == Approx(142.325209032384).epsilon(1e-12));
  CHECK(path_loss_db(100.0, cfg) == Approx(107.325209032384).epsilon(1e-12));
  CHECK(path_loss_db(10.0, cfg) == Approx(82.8097590974238).epsilon(1e-12));
  CHECK(path_loss_db(30.0, cfg) == Approx(92.3521841918171).epsilon(1e-12));
  CHECK(path_loss_db(1.0, cfg) == path_loss_db(10.0, cfg));
  CHECK_THROWS_AS(path_loss_db(0.0, cfg), DomainError);
  CHECK_THROWS_AS(path_loss_db(-5.0, cfg), DomainError);
}

TEST_CASE("path loss grows with distance across all three segments") {
  // Loss (dB) never decreases with distance, so the linear gain never increases.
  auto cfg = SystemConfig::defaults(16, 9, 10);
  double prev = path_loss_db(0.01, cfg);
  for (int i = 1; i <= 20000; ++i) {
    const double d = 0.01 + i * (2 * cfg.area_side) / 20000.0;
    const double pl = path_loss_db(d, cfg);
    CHECK_MESSAGE(pl >= prev - 1e-12, "d = " << d);
    prev = pl;
  }
  // Boundaries are evaluated on their own sides.
  CHECK(path_loss_db(50.0, cfg) == Approx(path_loss_constant_db(cfg) + 15 * std::log10(0.05) +
                                          20 * std::log10(0.05)));
  CHECK(path_loss_db(50.0001, cfg) == Approx(path_loss_constant_db(cfg) + 35 * std::log10(0.0500001)));
}

TEST_CASE("noise power") {
  auto cfg = SystemConfig::defaults(16, 9, 10);
  CHECK(noise_power_w(cfg) == Approx(3.181205147247275e-13).epsilon(1e-12));
  CHECK(10 * std::log10(noise_power_w(cfg) / 1e-3) == Approx(-94.97).epsilon(1e-3));
  auto unit = cfg;
  unit.noise_figure = 0;
  unit.bandwidth = 1;
  CHECK(noise_power_w(unit) == Approx(1.381e-23 * 290).epsilon(1e-14));
  auto twice = cfg;
  twice.bandwidth *= 2;
  CHECK(noise_power_w(twice) == Approx(2 * noise_power_w(cfg)).epsilon(1e-14));
  auto zero = cfg;
  zero.bandwidth = 0;
  CHECK_THROWS_AS(noise_power_w(zero), DomainError);
}

TEST_CASE("AP grid") {
  auto g4 = ap_grid(4, 1000);
  REQUIRE(g4.size() == 4);
  std::set<std::pair<double, double>> pts;
  for (auto p : g4) pts.insert({p.x, p.y});
  CHECK(pts == std::set<std::pair<double, double>>{{250, 250}, {750, 250}, {250, 750}, {750, 750}});
  auto g1 = ap_grid(1, 1000);
  CHECK(g1[0].x == 500);
  CHECK(g1[0].y == 500);
  auto g16 = ap_grid(16, 1000);
  CHECK(g16[5].x == 375);
  CHECK(g16[5].y == 375);
  // Non-square counts use the enclosing grid, row-major, truncated.
  auto g5 = ap_grid(5, 900);
  REQUIRE(g5.size() == 5);
  CHECK(g5[0].x == 150);
  CHECK(g5[2].x == 750);
  CHECK(g5[3].x == 150);
  CHECK(g5[3].y == 450);
  CHECK(g5[4].x == 450);
}

TEST_CASE("deploy is deterministic and stays in the square") {
  auto cfg = SystemConfig::defaults(9, 16, 20);
  auto a = deploy(cfg, 42);
  auto b = deploy(cfg, 42);
  auto c = deploy(cfg, 43);
  CHECK(a.beta == b.beta);
  CHECK(a.beta != c.beta);
  REQUIRE(a.device_positions.size() == 20);
  for (auto p : a.device_positions) {
    CHECK(p.x >= 0);
    CHECK(p.x <= 1000);
    CHECK(p.y >= 0);
    CHECK(p.y <= 1000);
  }
  CHECK((a.beta.array() > 0).all());
  // beta is the noise-normalized gain of the path loss.
  const auto& ap = a.ap_positions[2];
  const auto& dev = a.device_positions[7];
  const double d = std::max(std::hypot(ap.x - dev.x, ap.y - dev.y), cfg.d0);
  CHECK(a.beta(2, 7) ==
        Approx(std::pow(10.0, -path_loss_db(d, cfg) / 10) / noise_power_w(cfg)).epsilon(1e-13));
}

TEST_CASE("a device at an AP sees that AP strongest") {
  auto cfg = SystemConfig::defaults(9, 4, 1);
  auto aps = ap_grid(9, cfg.area_side);
  for (int m = 0; m < 9; ++m) {
    auto beta = large_scale_gains(aps, {aps[m]}, cfg);
    for (int other = 0; other < 9; ++other)
      if (other != m) CHECK(beta(m, 0) > beta(other, 0));
  }
}

TEST_CASE("reflection about the centre permutes AP rows") {
  auto cfg = SystemConfig::defaults(16, 9, 12);
  auto net = deploy(cfg, 7);
  std::vector<Point> mirrored;
  for (auto p : net.device_positions) mirrored.push_back({cfg.area_side - p.x, cfg.area_side - p.y});
  auto beta2 = large_scale_gains(net.ap_positions, mirrored, cfg);
  // AP m at (x, y) maps to AP 15 - m at (D - x, D - y) on a 4x4 grid.
  for (int m = 0; m < 16; ++m)
    for (int k = 0; k < 12; ++k) CHECK(beta2(15 - m, k) == Approx(net.beta(m, k)).epsilon(1e-12));
}

TEST_CASE("select_aps examples") {
  Eigen::MatrixXd beta(3, 2);
  beta << 2.0, 1.0,
          7.0, 1.0,
          1.0, 8.0;
  auto all = select_aps(beta, 1.0);
  for (int k = 0; k < 2; ++k) CHECK(all.serving_aps[k] == std::vector<int>{0, 1, 2});
  CHECK(all.tau == std::vector<int>{2, 2, 2});

  auto s = select_aps(beta, 0.7);
  CHECK(s.serving_aps[0] == std::vector<int>{1});        // 7/10
  CHECK(s.serving_aps[1] == std::vector<int>{2});        // 8/10
  CHECK(s.served_devices[0].empty());
  CHECK(s.tau == std::vector<int>{0, 1, 1});

  auto s2 = select_aps(beta, 0.85);
  CHECK(s2.serving_aps[0] == std::vector<int>{0, 1});

  Eigen::MatrixXd two(2, 1);
  two << 0.9, 0.1;
  CHECK(select_aps(two, 0.9).serving_aps[0] == std::vector<int>{0});

  // Ties go to the lower index.
  Eigen::MatrixXd tie(3, 1);
  tie << 1.0, 1.0, 1.0;
  CHECK(select_aps(tie, 0.3).serving_aps[0] == std::vector<int>{0});
  CHECK(select_aps(tie, 0.5).serving_aps[0] == std::vector<int>{0, 1});

  CHECK_THROWS_AS(select_aps(beta, 0.0), DomainError);
  CHECK_THROWS_AS(select_aps(beta, 1.5), DomainError);
  Eigen::MatrixXd neg = beta;
  neg(0, 0) = 0.0;
  CHECK_THROWS_AS(select_aps(neg, 0.5), DomainError);
}

TEST_CASE("select_aps membership and nesting on random gains") {
  std::mt19937_64 rng(3);
  std::lognormal_distribution<double> gain(0.0, 2.0);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::MatrixXd beta(6, 4);
    for (int m = 0; m < 6; ++m)
      for (int k = 0; k < 4; ++k) beta(m, k) = gain(rng);
    ServingSets prev;
    for (double th : {0.3, 0.5, 0.7, 0.9, 0.95, 1.0}) {
      auto s = select_aps(beta, th);
      for (int m = 0; m < 6; ++m)
        for (int k = 0; k < 4; ++k) {
          const auto& mk = s.serving_aps[k];
          const auto& um = s.served_devices[m];
          const bool in_mk = std::find(mk.begin(), mk.end(), m) != mk.end();
          const bool in_um = std::find(um.begin(), um.end(), k) != um.end();
          CHECK(in_mk == in_um);
          CHECK(in_mk == s.serves(m, k));
        }
      for (int m = 0; m < 6; ++m) CHECK(s.tau[m] == static_cast<int>(s.served_devices[m].size()));
      for (int k = 0; k < 4; ++k) {
        CHECK_FALSE(s.serving_aps[k].empty());
        double share = 0;
        for (int m : s.serving_aps[k]) share += beta(m, k);
        CHECK(share / beta.col(k).sum() >= th - 1e-12);
        if (!prev.serving_aps.empty())
          CHECK(std::includes(s.serving_aps[k].begin(), s.serving_aps[k].end(),
                              prev.serving_aps[k].begin(), prev.serving_aps[k].end()));
      }
      prev = s;
    }
  }
}

TEST_CASE("make_scenario and subset_devices") {
  auto cfg = SystemConfig::defaults(9, 16, 6);
  for (int k = 0; k < 6; ++k) cfg.weights[k] = 0.1 * (k + 1);
  auto sc = make_scenario(cfg, 11);
  auto sub = subset_devices(sc, {4, 1});
  CHECK(sub.cfg.num_devices == 2);
  CHECK(sub.cfg.weights[0] == Approx(0.5));
  CHECK(sub.cfg.weights[1] == Approx(0.2));
  CHECK(sub.net.beta.col(0) == sc.net.beta.col(4));
  CHECK(sub.sets.serving_aps[1] == sc.sets.serving_aps[1]);
  CHECK(sub.sets.num_aps() == 9);
  auto bad = cfg;
  bad.dep[0] = 2.0;
  CHECK_THROWS_AS(make_scenario(bad, 1), ConfigError);
}

}
