#include "cfmimo/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cfmimo/errors.hpp"

namespace cfmimo {

namespace {

constexpr int kChunk = 64;

struct Sums {
  Eigen::VectorXd rate, rate_sq, signal, ls, ls_sq, inv_sinr;
  Eigen::MatrixXd ui, ui_sq;  // (k, k')
  int rejected = 0;

  explicit Sums(int k = 0)
      : rate(Eigen::VectorXd::Zero(k)),
        rate_sq(Eigen::VectorXd::Zero(k)),
        signal(Eigen::VectorXd::Zero(k)),
        ls(Eigen::VectorXd::Zero(k)),
        ls_sq(Eigen::VectorXd::Zero(k)),
        inv_sinr(Eigen::VectorXd::Zero(k)),
        ui(Eigen::MatrixXd::Zero(k, k)),
        ui_sq(Eigen::MatrixXd::Zero(k, k)) {}

  void add(const Sums& o) {
    rate += o.rate;
    rate_sq += o.rate_sq;
    signal += o.signal;
    ls += o.ls;
    ls_sq += o.ls_sq;
    inv_sinr += o.inv_sinr;
    ui += o.ui;
    ui_sq += o.ui_sq;
    rejected += o.rejected;
  }
};

struct Context {
  const Scenario& sc;
  Scheme scheme;
  const PowerAllocation& powers;
  const std::vector<FblParams>& fbl;
  EstimationStats stats;
  std::vector<SinrBreakdown> closed_form;
};

Context make_context(const Scenario& sc, Scheme scheme, const PowerAllocation& powers,
                     const std::vector<FblParams>& fbl, int n_draws) {
  if (n_draws < 1) throw DomainError("mc_ergodic_rate: need at least one draw");
  const int k_count = sc.cfg.num_devices;
  if (static_cast<int>(fbl.size()) != k_count)
    throw DomainError("mc_ergodic_rate: one FblParams per device required");
  auto stats = estimation_variance(sc.net.beta, powers.pilot, k_count);
  auto closed = sinr_breakdown(scheme, sc.sets, stats, sc.net.beta, powers.downlink,
                               sc.cfg.antennas_per_ap);
  return Context{sc, scheme, powers, fbl, std::move(stats), std::move(closed)};
}

void accumulate(const Context& ctx, const DrawTerms& terms, Sums& s) {
  const int k_count = static_cast<int>(terms.gains.rows());
  for (int k = 0; k < k_count; ++k) {
    const double ds = ctx.closed_form[k].ds;
    const std::complex<double> own = terms.gains(k, k);
    const double ls = std::norm(own - std::sqrt(ds));
    double ui_total = 0.0;
    for (int kp = 0; kp < k_count; ++kp) {
      if (kp == k) continue;
      const double ui = std::norm(terms.gains(kp, k));
      s.ui(k, kp) += ui;
      s.ui_sq(k, kp) += ui * ui;
      ui_total += ui;
    }
    const double denom = ls + ui_total + 1.0;
    const double sinr = ds / denom;
    const double rate = sinr > 0 ? rate_fbl(sinr, ctx.fbl[k]) : 0.0;
    s.rate(k) += rate;
    s.rate_sq(k) += rate * rate;
    s.signal(k) += own.real();
    s.ls(k) += ls;
    s.ls_sq(k) += ls * ls;
    s.inv_sinr(k) += ds > 0 ? denom / ds : std::numeric_limits<double>::infinity();
  }
  s.rejected += terms.rejected;
}

McResult finish(const Context& ctx, const Sums& s, int n) {
  const int k_count = static_cast<int>(s.rate.size());
  McResult r;
  r.draws = n;
  r.rejected_draws = s.rejected;
  r.devices.resize(static_cast<std::size_t>(k_count));
  auto se = [n](double sum, double sum_sq) {
    const double mean = sum / n;
    const double var = n > 1 ? std::max(0.0, (sum_sq - n * mean * mean) / (n - 1)) : 0.0;
    return std::sqrt(var / n);
  };
  for (int k = 0; k < k_count; ++k) {
    auto& d = r.devices[k];
    d.ergodic_rate = s.rate(k) / n;
    d.ergodic_rate_se = se(s.rate(k), s.rate_sq(k));
    d.ds = ctx.closed_form[k].ds;
    d.signal_mean = s.signal(k) / n;
    d.ls_mean = s.ls(k) / n;
    d.ls_se = se(s.ls(k), s.ls_sq(k));
    d.ui_mean.assign(static_cast<std::size_t>(k_count), 0.0);
    d.ui_se.assign(static_cast<std::size_t>(k_count), 0.0);
    for (int kp = 0; kp < k_count; ++kp) {
      d.ui_mean[kp] = s.ui(k, kp) / n;
      d.ui_se[kp] = se(s.ui(k, kp), s.ui_sq(k, kp));
    }
    d.inv_sinr_mean = s.inv_sinr(k) / n;
  }
  return r;
}

// Pairwise reduction in index order; fixed tree for a fixed chunk count.
Sums reduce_pairwise(std::vector<Sums>& parts, std::size_t lo, std::size_t hi) {
  if (hi - lo == 1) return parts[lo];
  const std::size_t mid = lo + (hi - lo) / 2;
  Sums left = reduce_pairwise(parts, lo, mid);
  left.add(reduce_pairwise(parts, mid, hi));
  return left;
}

}  // namespace

DrawTerms simulate_draw(const Scenario& sc, Scheme scheme, const PowerAllocation& powers,
                        const EstimationStats& stats, Engine& rng) {
  const int n_ant = sc.cfg.antennas_per_ap;
  const int k_count = sc.cfg.num_devices;
  DrawTerms terms;
  for (;;) {
    ChannelDraw draw = sample_channel(sc.net.beta, n_ant, rng);
    estimate_channels(draw, sc.net.beta, powers.pilot, k_count, rng);
    auto precoders = build_precoders(draw, scheme, sc.sets, stats, n_ant);
    if (!precoders) {
      ++terms.rejected;
      continue;
    }
    terms.gains = Eigen::MatrixXcd::Zero(k_count, k_count);
    for (int m = 0; m < sc.sets.num_aps(); ++m) {
      if (sc.sets.tau[m] == 0) continue;
      Eigen::MatrixXcd a = (*precoders)[static_cast<std::size_t>(m)];
      for (int k = 0; k < k_count; ++k) a.col(k) *= std::sqrt(powers.downlink(m, k));
      // (a^H g)(k', k) = sqrt(p_{m,k'}) g_{m,k}^T a*_{m,k'}
      terms.gains.noalias() += a.adjoint() * draw.true_channels[static_cast<std::size_t>(m)];
    }
    return terms;
  }
}

McResult mc_ergodic_rate(const Scenario& sc, Scheme scheme, const PowerAllocation& powers,
                         const std::vector<FblParams>& fbl, int n_draws, std::uint64_t seed) {
  const Context ctx = make_context(sc, scheme, powers, fbl, n_draws);
  const int k_count = sc.cfg.num_devices;
  const int n_chunks = (n_draws + kChunk - 1) / kChunk;
  std::vector<Sums> parts(static_cast<std::size_t>(n_chunks), Sums(k_count));

#pragma omp parallel for schedule(dynamic)
  for (int c = 0; c < n_chunks; ++c) {
    Sums& s = parts[static_cast<std::size_t>(c)];
    const int end = std::min(n_draws, (c + 1) * kChunk);
    for (int i = c * kChunk; i < end; ++i) {
      Engine rng = substream(seed, static_cast<std::uint64_t>(i));
      accumulate(ctx, simulate_draw(sc, scheme, powers, ctx.stats, rng), s);
    }
  }
  return finish(ctx, reduce_pairwise(parts, 0, parts.size()), n_draws);
}

McResult mc_ergodic_rate_reference(const Scenario& sc, Scheme scheme,
                                   const PowerAllocation& powers,
                                   const std::vector<FblParams>& fbl, int n_draws,
                                   std::uint64_t seed) {
  const Context ctx = make_context(sc, scheme, powers, fbl, n_draws);
  Sums s(sc.cfg.num_devices);
  for (int i = 0; i < n_draws; ++i) {
    Engine rng = substream(seed, static_cast<std::uint64_t>(i));
    accumulate(ctx, simulate_draw(sc, scheme, powers, ctx.stats, rng), s);
  }
  return finish(ctx, s, n_draws);
}

}  // namespace cfmimo
