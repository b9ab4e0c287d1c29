#include "cfmimo/channel.hpp"

#include <cmath>

#include "cfmimo/errors.hpp"

namespace cfmimo {

EstimationStats estimation_variance(const Eigen::MatrixXd& beta,
                                    const Eigen::VectorXd& pilot_powers, int pilot_length) {
  if (pilot_powers.size() != beta.cols())
    throw DomainError("estimation_variance: one pilot power per device required");
  if ((pilot_powers.array() < 0).any())
    throw DomainError("estimation_variance: pilot power must be nonnegative");
  EstimationStats s;
  s.lambda.resizeLike(beta);
  for (Eigen::Index k = 0; k < beta.cols(); ++k) {
    const double kp = pilot_length * pilot_powers(k);
    for (Eigen::Index m = 0; m < beta.rows(); ++m) {
      const double b = beta(m, k);
      s.lambda(m, k) = kp * b * b / (kp * b + 1.0);
    }
  }
  s.error_var = beta - s.lambda;
  return s;
}

void fill_complex_normal(Eigen::MatrixXcd& out, Engine& rng) {
  std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
  for (Eigen::Index j = 0; j < out.cols(); ++j)
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
      const double re = normal(rng);
      const double im = normal(rng);
      out(i, j) = {re, im};
    }
}

ChannelDraw sample_channel(const Eigen::MatrixXd& beta, int antennas, Engine& rng) {
  ChannelDraw draw;
  const auto m_count = beta.rows();
  draw.true_channels.resize(static_cast<std::size_t>(m_count));
  for (Eigen::Index m = 0; m < m_count; ++m) {
    auto& g = draw.true_channels[static_cast<std::size_t>(m)];
    g.resize(antennas, beta.cols());
    fill_complex_normal(g, rng);
    for (Eigen::Index k = 0; k < beta.cols(); ++k) g.col(k) *= std::sqrt(beta(m, k));
  }
  return draw;
}

ChannelDraw sample_channel(const Eigen::MatrixXd& beta, int antennas, std::uint64_t seed) {
  Engine rng(seed);
  return sample_channel(beta, antennas, rng);
}

void estimate_channels(ChannelDraw& draw, const Eigen::MatrixXd& beta,
                       const Eigen::VectorXd& pilot_powers, int pilot_length, Engine& rng) {
  if ((pilot_powers.array() < 0).any())
    throw DomainError("estimate_channels: pilot power must be nonnegative");
  const auto m_count = static_cast<std::size_t>(beta.rows());
  draw.observations.resize(m_count);
  draw.estimates.resize(m_count);
  draw.errors.resize(m_count);
  for (std::size_t m = 0; m < m_count; ++m) {
    const auto& g = draw.true_channels[m];
    auto& y = draw.observations[m];
    auto& g_hat = draw.estimates[m];
    y.resize(g.rows(), g.cols());
    fill_complex_normal(y, rng);
    g_hat.resize(g.rows(), g.cols());
    for (Eigen::Index k = 0; k < g.cols(); ++k) {
      const double kp = pilot_length * pilot_powers(k);
      if (kp <= 0) {
        // No pilot energy: nothing observed, the estimate is the prior mean.
        y.col(k).setZero();
        g_hat.col(k).setZero();
        continue;
      }
      y.col(k) = g.col(k) + y.col(k) / std::sqrt(kp);
      const double kpb = kp * beta(static_cast<Eigen::Index>(m), k);
      g_hat.col(k) = (kpb / (kpb + 1.0)) * y.col(k);
    }
    draw.errors[m] = g - g_hat;
  }
}

void estimate_channels(ChannelDraw& draw, const Eigen::MatrixXd& beta,
                       const Eigen::VectorXd& pilot_powers, int pilot_length,
                       std::uint64_t seed) {
  Engine rng(seed);
  estimate_channels(draw, beta, pilot_powers, pilot_length, rng);
}

}  // namespace cfmimo
