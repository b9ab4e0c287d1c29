#include "cfmimo/sinr.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "cfmimo/errors.hpp"

namespace cfmimo {

int dof_loss(Scheme scheme, int tau_m, int num_devices) {
  switch (scheme) {
    case Scheme::Mrt: return 0;
    case Scheme::Fzf: return num_devices;
    case Scheme::Lzf: return tau_m;
  }
  return 0;
}

void check_dimensions(Scheme scheme, const ServingSets& sets, int antennas) {
  const int k_count = sets.num_devices();
  for (int m = 0; m < sets.num_aps(); ++m) {
    if (sets.tau[m] == 0) continue;
    const int loss = dof_loss(scheme, sets.tau[m], k_count);
    if (scheme != Scheme::Mrt && antennas <= loss) {
      throw ConfigError(std::string(to_string(scheme)) + " precoding at AP " + std::to_string(m) +
                        " needs more than " + std::to_string(loss) + " antennas, has " +
                        std::to_string(antennas));
    }
  }
}

double leak_coefficient(Scheme scheme, const ServingSets& sets, const EstimationStats& stats,
                        const Eigen::MatrixXd& beta, int m, int k) {
  switch (scheme) {
    case Scheme::Mrt: return beta(m, k);
    case Scheme::Fzf: return stats.error_var(m, k);
    case Scheme::Lzf: return sets.serves(m, k) ? stats.error_var(m, k) : beta(m, k);
  }
  return 0.0;
}

double SinrBreakdown::interference() const {
  return ls + std::accumulate(ui.begin(), ui.end(), 0.0) + noise;
}

std::vector<SinrBreakdown> sinr_breakdown(Scheme scheme, const ServingSets& sets,
                                          const EstimationStats& stats,
                                          const Eigen::MatrixXd& beta,
                                          const Eigen::MatrixXd& downlink, int antennas) {
  check_dimensions(scheme, sets, antennas);
  const int k_count = sets.num_devices();
  const int m_count = sets.num_aps();
  for (int m = 0; m < m_count; ++m)
    for (int k = 0; k < k_count; ++k) {
      if (downlink(m, k) < 0) throw DomainError("sinr_breakdown: negative downlink power");
      if (downlink(m, k) != 0 && !sets.serves(m, k))
        throw DomainError("sinr_breakdown: power on link (" + std::to_string(m) + ", " +
                          std::to_string(k) + ") outside the serving sets");
    }

  const auto& lambda = stats.lambda;
  std::vector<SinrBreakdown> out(static_cast<std::size_t>(k_count));
  for (int k = 0; k < k_count; ++k) {
    auto& b = out[k];
    double theta = 0.0;
    for (int m : sets.serving_aps[k]) {
      const int t = dof_loss(scheme, sets.tau[m], k_count);
      theta += std::sqrt((antennas - t) * downlink(m, k) * lambda(m, k));
    }
    b.ds = theta * theta;

    auto leak = [&](int m, int kp) {
      return downlink(m, kp) * leak_coefficient(scheme, sets, stats, beta, m, k);
    };
    b.ls = 0.0;
    for (int m : sets.serving_aps[k]) b.ls += leak(m, k);
    b.ui.assign(static_cast<std::size_t>(k_count), 0.0);
    for (int kp = 0; kp < k_count; ++kp) {
      if (kp == k) continue;
      for (int m : sets.serving_aps[kp]) b.ui[kp] += leak(m, kp);
    }
    b.sinr = b.ds / b.interference();
  }
  return out;
}

Eigen::VectorXd sinr_lb(Scheme scheme, const ServingSets& sets, const EstimationStats& stats,
                        const Eigen::MatrixXd& beta, const Eigen::MatrixXd& downlink,
                        int antennas) {
  const auto parts = sinr_breakdown(scheme, sets, stats, beta, downlink, antennas);
  Eigen::VectorXd out(static_cast<Eigen::Index>(parts.size()));
  for (std::size_t k = 0; k < parts.size(); ++k) out(static_cast<Eigen::Index>(k)) = parts[k].sinr;
  return out;
}

namespace {

// Columns of G (G^H G)^{-1}, or nullopt if G^H G is numerically singular.
std::optional<Eigen::MatrixXcd> zero_forcing_directions(const Eigen::MatrixXcd& g) {
  const Eigen::MatrixXcd gram = g.adjoint() * g;
  Eigen::LLT<Eigen::MatrixXcd> llt(gram);
  if (llt.info() != Eigen::Success || !(llt.rcond() > kMinGramRcond)) return std::nullopt;
  Eigen::MatrixXcd inv = llt.solve(Eigen::MatrixXcd::Identity(gram.rows(), gram.cols()));
  return g * inv;
}

}  // namespace

std::optional<std::vector<Eigen::MatrixXcd>> build_precoders(const ChannelDraw& draw,
                                                             Scheme scheme,
                                                             const ServingSets& sets,
                                                             const EstimationStats& stats,
                                                             int antennas) {
  const int k_count = sets.num_devices();
  const int m_count = sets.num_aps();
  std::vector<Eigen::MatrixXcd> out(static_cast<std::size_t>(m_count));
  for (int m = 0; m < m_count; ++m) {
    const auto& g_hat = draw.estimates[static_cast<std::size_t>(m)];
    auto& a = out[static_cast<std::size_t>(m)];
    a = Eigen::MatrixXcd::Zero(antennas, k_count);
    const auto& served = sets.served_devices[m];
    if (served.empty()) continue;
    switch (scheme) {
      case Scheme::Mrt:
        for (int k : served) {
          const double lam = stats.lambda(m, k);
          if (lam > 0) a.col(k) = g_hat.col(k) / std::sqrt(antennas * lam);
        }
        break;
      case Scheme::Fzf: {
        auto dirs = zero_forcing_directions(g_hat);
        if (!dirs) return std::nullopt;
        for (int k : served)
          a.col(k) = dirs->col(k) * std::sqrt((antennas - k_count) * stats.lambda(m, k));
        break;
      }
      case Scheme::Lzf: {
        const int tau = static_cast<int>(served.size());
        Eigen::MatrixXcd g_sub(antennas, tau);
        for (int j = 0; j < tau; ++j) g_sub.col(j) = g_hat.col(served[j]);
        auto dirs = zero_forcing_directions(g_sub);
        if (!dirs) return std::nullopt;
        for (int j = 0; j < tau; ++j) {
          const int k = served[j];
          a.col(k) = dirs->col(j) * std::sqrt((antennas - tau) * stats.lambda(m, k));
        }
        break;
      }
    }
  }
  return out;
}

}  // namespace cfmimo
