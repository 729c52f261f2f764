#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <sstream>
#include <vector>

#include "drorecode/error.hpp"

namespace drorecode {

/// Probability vector over batch ranks 0..M.
class RankDistribution {
 public:
  static constexpr double kSumTolerance = 1e-12;

  RankDistribution() = default;

  /// Validates nonnegativity and unit mass (within kSumTolerance, or `tolerance` if given).
  explicit RankDistribution(std::vector<double> probabilities, double tolerance = kSumTolerance)
      : probs_(std::move(probabilities)) {
    detail::require(!probs_.empty(), "rank distribution needs at least one rank");
    double total = 0.0;
    for (double p : probs_) {
      detail::require(std::isfinite(p) && p >= 0.0, "rank probabilities must be finite and nonnegative");
      total += p;
    }
    if (std::abs(total - 1.0) > tolerance) {
      std::ostringstream msg;
      msg << "rank probabilities sum to " << total << ", expected 1";
      throw InvalidArgument(msg.str());
    }
  }

  static RankDistribution point_mass(int rank, int max_rank) {
    detail::require(rank >= 0 && rank <= max_rank, "point mass rank out of range");
    std::vector<double> p(static_cast<std::size_t>(max_rank) + 1, 0.0);
    p[static_cast<std::size_t>(rank)] = 1.0;
    return RankDistribution(std::move(p));
  }

  static RankDistribution uniform(int max_rank) {
    detail::require(max_rank >= 0, "max rank must be nonnegative");
    const auto n = static_cast<std::size_t>(max_rank) + 1;
    return RankDistribution(std::vector<double>(n, 1.0 / static_cast<double>(n)));
  }

  int max_rank() const { return static_cast<int>(probs_.size()) - 1; }
  std::size_t size() const { return probs_.size(); }
  double operator[](int r) const { return probs_[static_cast<std::size_t>(r)]; }
  std::span<const double> probabilities() const { return probs_; }

  double mean() const {
    double m = 0.0;
    for (std::size_t r = 0; r < probs_.size(); ++r) m += static_cast<double>(r) * probs_[r];
    return m;
  }

  /// Ranks with strictly positive probability.
  std::vector<int> support() const {
    std::vector<int> s;
    for (std::size_t r = 0; r < probs_.size(); ++r)
      if (probs_[r] > 0.0) s.push_back(static_cast<int>(r));
    return s;
  }

 private:
  std::vector<double> probs_;
};

}  // namespace drorecode
