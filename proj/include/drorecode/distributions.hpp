#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "drorecode/error.hpp"
#include "drorecode/rank_distribution.hpp"

namespace drorecode {

/// Observed batch ranks r_1..r_N, each in [0, M].
class RankSamples {
 public:
  RankSamples(std::vector<int> ranks, int max_rank) : ranks_(std::move(ranks)), max_rank_(max_rank) {
    detail::require(max_rank_ >= 0, "max rank must be nonnegative");
    detail::require(!ranks_.empty(), "at least one rank sample is required");
    for (int r : ranks_) detail::require(r >= 0 && r <= max_rank_, "rank sample out of range [0, M]");
  }

  std::size_t size() const { return ranks_.size(); }
  int max_rank() const { return max_rank_; }
  int operator[](std::size_t j) const { return ranks_[j]; }
  std::span<const int> ranks() const { return ranks_; }

  /// Occurrence count per rank 0..M.
  std::vector<int> counts() const {
    std::vector<int> c(static_cast<std::size_t>(max_rank_) + 1, 0);
    for (int r : ranks_) ++c[static_cast<std::size_t>(r)];
    return c;
  }

 private:
  std::vector<int> ranks_;
  int max_rank_;
};

inline RankDistribution empirical(const RankSamples& samples) {
  const auto counts = samples.counts();
  const auto n = static_cast<double>(samples.size());
  std::vector<double> h(counts.size());
  for (std::size_t r = 0; r < counts.size(); ++r) h[r] = static_cast<double>(counts[r]) / n;
  return RankDistribution(std::move(h), 1e-10);
}

/// 1-Wasserstein distance on the unit-spaced support 0..M: sum of |F1(k) - F2(k)|.
inline double wasserstein(const RankDistribution& a, const RankDistribution& b) {
  detail::require(a.size() == b.size(), "wasserstein: support sizes differ");
  double fa = 0.0;
  double fb = 0.0;
  double w = 0.0;
  for (int k = 0; k + 1 < static_cast<int>(a.size()); ++k) {
    fa += a[k];
    fb += b[k];
    w += std::abs(fa - fb);
  }
  return w;
}

/// Sigma(h): h_r(1 - h_r) on the diagonal, -h_r h_r' elsewhere.
inline Eigen::MatrixXd multinomial_covariance(const RankDistribution& h) {
  const auto n = static_cast<Eigen::Index>(h.size());
  Eigen::VectorXd v(n);
  for (Eigen::Index r = 0; r < n; ++r) v(r) = h[static_cast<int>(r)];
  Eigen::MatrixXd sigma = -v * v.transpose();
  sigma.diagonal() += v;
  return sigma;
}

/// max over 1-Lipschitz u of G^T u, for G whose coordinates sum to zero:
/// sum over k < M of |G_0 + ... + G_k|.
inline double limit_statistic(std::span<const double> g) {
  double prefix = 0.0;
  double x = 0.0;
  for (std::size_t k = 0; k + 1 < g.size(); ++k) {
    prefix += g[k];
    x += std::abs(prefix);
  }
  return x;
}

/// Square-root factor S with S S^T = Sigma(h); eigenvalues at round-off level are clamped to 0.
class CovarianceFactor {
 public:
  explicit CovarianceFactor(const RankDistribution& h) {
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(multinomial_covariance(h));
    // Round-off on the null direction (all ones) would otherwise leak ~1e-8 into G.
    const double floor = 1e-12 * std::max(eig.eigenvalues().maxCoeff(), 0.0);
    const Eigen::VectorXd roots =
        eig.eigenvalues().unaryExpr([floor](double v) { return v > floor ? std::sqrt(v) : 0.0; });
    factor_ = eig.eigenvectors() * roots.asDiagonal();
  }

  Eigen::Index dimension() const { return factor_.rows(); }
  const Eigen::MatrixXd& matrix() const { return factor_; }

  /// One draw of G ~ N(0, Sigma(h)).
  template <class Rng>
  Eigen::VectorXd draw(Rng& rng) const {
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd z(factor_.cols());
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal(rng);
    return factor_ * z;
  }

 private:
  Eigen::MatrixXd factor_;
};

template <class Rng>
double limit_statistic_sample(const CovarianceFactor& factor, Rng& rng) {
  const Eigen::VectorXd g = factor.draw(rng);
  return limit_statistic(std::span<const double>(g.data(), static_cast<std::size_t>(g.size())));
}

template <class Rng>
double limit_statistic_sample(const RankDistribution& h, Rng& rng) {
  return limit_statistic_sample(CovarianceFactor(h), rng);
}

/// Empirical q-quantile as the ceil(L q)-th order statistic (1-based).
inline double order_statistic_quantile(std::vector<double> draws, double q) {
  detail::require(!draws.empty(), "quantile of an empty sample");
  detail::require(q > 0.0 && q < 1.0, "quantile level must lie in (0, 1)");
  const auto n = draws.size();
  auto k = static_cast<std::size_t>(std::ceil(static_cast<double>(n) * q));
  k = std::clamp<std::size_t>(k, 1, n);
  std::nth_element(draws.begin(), draws.begin() + static_cast<std::ptrdiff_t>(k - 1), draws.end());
  return draws[k - 1];
}

struct RadiusCalibration {
  double eta = 0.95;
  double quantile_level = 0.95;  // max(eta, 1 - eta)
  int sample_count = 10000;      // L
  double quantile = 0.0;         // sqrt(N) * rho
  double rho = 0.0;
  std::vector<double> draws;     // filled only when retention is requested
};

/// rho = q / sqrt(N), q the max(eta, 1-eta) empirical quantile of L limit-statistic
/// draws under Sigma(h_emp).
template <class Rng>
RadiusCalibration calibrate_radius(const RankDistribution& h_emp, std::size_t sample_size, double eta,
                                   int draws, Rng& rng, bool keep_draws = false) {
  detail::require(eta > 0.0 && eta < 1.0, "eta must lie in (0, 1)");
  detail::require(draws >= 1, "calibration needs at least one Monte Carlo draw");
  detail::require(sample_size >= 1, "sample size must be positive");

  RadiusCalibration out;
  out.eta = eta;
  out.quantile_level = std::max(eta, 1.0 - eta);
  out.sample_count = draws;

  const CovarianceFactor factor(h_emp);
  std::vector<double> x(static_cast<std::size_t>(draws));
  for (auto& v : x) v = limit_statistic_sample(factor, rng);
  out.quantile = order_statistic_quantile(x, out.quantile_level);
  out.rho = out.quantile / std::sqrt(static_cast<double>(sample_size));
  if (keep_draws) out.draws = std::move(x);
  return out;
}

}  // namespace drorecode
