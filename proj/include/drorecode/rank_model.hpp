#pragma once

// Expected-rank model for a batch crossing an independent packet-loss link.
//
// A rank-r batch whose node sends k packets delivers min(r, K) dimensions,
// K ~ Binom(k, 1-p) (large-field approximation). Fractional packet counts t
// mean "send floor(t)+1 packets with probability t - floor(t)".

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iomanip>
#include <limits>
#include <ostream>
#include <vector>

#include "drorecode/error.hpp"
#include "drorecode/rank_distribution.hpp"

namespace drorecode {

struct ChannelModel {
  double loss_rate = 0.2;
  int batch_size = 16;

  ChannelModel() = default;
  ChannelModel(double p, int m) : loss_rate(p), batch_size(m) { validate(); }

  void validate() const {
    detail::require(std::isfinite(loss_rate) && loss_rate >= 0.0 && loss_rate < 1.0,
                    "loss rate must lie in [0, 1)");
    detail::require(batch_size >= 1 && batch_size <= 256, "batch size must lie in [1, 256]");
  }
};

namespace detail {

/// pmf of Binom(n, 1-p) by repeated convolution with a Bernoulli; rows 0..n_max.
class BinomialLadder {
 public:
  BinomialLadder(double loss_rate, int n_max) : rows_(static_cast<std::size_t>(n_max) + 1) {
    const double q = 1.0 - loss_rate;
    rows_[0] = {1.0};
    for (int n = 1; n <= n_max; ++n) {
      const auto& prev = rows_[static_cast<std::size_t>(n) - 1];
      auto& cur = rows_[static_cast<std::size_t>(n)];
      cur.assign(static_cast<std::size_t>(n) + 1, 0.0);
      for (int k = 0; k < n; ++k) {
        cur[static_cast<std::size_t>(k)] += prev[static_cast<std::size_t>(k)] * loss_rate;
        cur[static_cast<std::size_t>(k) + 1] += prev[static_cast<std::size_t>(k)] * q;
      }
    }
  }

  const std::vector<double>& pmf(int n) const { return rows_[static_cast<std::size_t>(n)]; }

  /// E[min(r, K)] for K ~ Binom(n, 1-p).
  double truncated_mean(int n, int r) const {
    const auto& row = pmf(n);
    double e = 0.0;
    for (int k = 0; k <= n; ++k) e += row[static_cast<std::size_t>(k)] * static_cast<double>(std::min(r, k));
    return e;
  }

 private:
  std::vector<std::vector<double>> rows_;
};

inline void check_rank(const ChannelModel& model, int r) {
  require(r >= 0 && r <= model.batch_size, "rank must lie in [0, M]");
}

inline void check_packets(double t) {
  require(std::isfinite(t) && t >= 0.0, "packet count must be finite and nonnegative");
}

}  // namespace detail

/// E_r(t) for an integer number of transmitted packets.
inline double expected_rank_integer(const ChannelModel& model, int r, int t) {
  model.validate();
  detail::check_rank(model, r);
  detail::require(t >= 0, "packet count must be nonnegative");
  return detail::BinomialLadder(model.loss_rate, t).truncated_mean(t, r);
}

/// E_r(t) for fractional t, linear interpolation between neighbouring integers.
inline double expected_rank(const ChannelModel& model, int r, double t) {
  model.validate();
  detail::check_rank(model, r);
  detail::check_packets(t);
  const double lower = std::floor(t);
  const double frac = t - lower;
  const int n = static_cast<int>(lower);
  const detail::BinomialLadder ladder(model.loss_rate, n + 1);
  return frac * ladder.truncated_mean(n + 1, r) + (1.0 - frac) * ladder.truncated_mean(n, r);
}

/// Integer values E_r(i) together with the slopes and intercepts of the
/// piecewise-linear form E_r(t) = min_i (delta(r,i) t + zeta(r,i)) on [0, i_max(r)].
///
/// Indices i beyond i_max(r) return the flat padding piece (slope 0,
/// intercept E_r(i_max)), so a common segment count can be used for every rank.
class ExpectedRankTable {
 public:
  static constexpr double kDefaultEpsilon = 1e-9;
  static constexpr int kDefaultHardCap = 128;

  ExpectedRankTable(const ChannelModel& model, double epsilon = kDefaultEpsilon,
                    int hard_cap = kDefaultHardCap)
      : model_(model) {
    model.validate();
    detail::require(epsilon > 0.0, "epsilon must be positive");
    detail::require(hard_cap >= model.batch_size, "hard cap must be at least M");

    const int m = model.batch_size;
    const detail::BinomialLadder ladder(model.loss_rate, hard_cap + 1);
    i_max_.assign(static_cast<std::size_t>(m) + 1, hard_cap);
    values_.resize(static_cast<std::size_t>(m) + 1);
    for (int r = 0; r <= m; ++r) {
      auto& e = values_[static_cast<std::size_t>(r)];
      e.reserve(static_cast<std::size_t>(hard_cap) + 2);
      e.push_back(ladder.truncated_mean(0, r));
      for (int i = 0; i <= hard_cap; ++i) {
        // Below the rank every received packet is innovative, so E_r(t) = t (1 - p)
        // exactly; using it keeps equal first slopes bit-identical across ranks.
        e.push_back(i + 1 <= r ? (i + 1) * (1.0 - model.loss_rate) : ladder.truncated_mean(i + 1, r));
        if (e[static_cast<std::size_t>(i) + 1] - e[static_cast<std::size_t>(i)] < epsilon) {
          i_max_[static_cast<std::size_t>(r)] = i;
          break;
        }
      }
    }
  }

  const ChannelModel& model() const { return model_; }
  int max_rank() const { return model_.batch_size; }
  int i_max(int r) const { return i_max_[idx(r)]; }

  /// Largest i_max over all ranks; the uniform segment count of the LP matrix form.
  int uniform_segments() const { return *std::max_element(i_max_.begin(), i_max_.end()); }

  /// E_r(i) for integer i in [0, i_max(r) + 1].
  double value(int r, int i) const {
    const auto& e = values_[idx(r)];
    detail::require(i >= 0 && static_cast<std::size_t>(i) < e.size(), "table index out of range");
    return e[static_cast<std::size_t>(i)];
  }

  double delta(int r, int i) const {
    detail::require(i >= 0, "segment index must be nonnegative");
    if (i > i_max(r)) return 0.0;
    const auto& e = values_[idx(r)];
    return e[static_cast<std::size_t>(i) + 1] - e[static_cast<std::size_t>(i)];
  }

  double zeta(int r, int i) const {
    detail::require(i >= 0, "segment index must be nonnegative");
    const auto& e = values_[idx(r)];
    if (i > i_max(r)) return e[static_cast<std::size_t>(i_max(r))];
    return e[static_cast<std::size_t>(i)] - static_cast<double>(i) * delta(r, i);
  }

  /// Interpolated E_r(t) for t in [0, i_max(r)].
  double evaluate(int r, double t) const {
    detail::check_packets(t);
    detail::require(t <= static_cast<double>(i_max(r)), "packet count exceeds i_max for this rank");
    const double lower = std::floor(t);
    const auto n = static_cast<std::size_t>(lower);
    const auto& e = values_[idx(r)];
    if (n + 1 >= e.size()) return e.back();
    const double frac = t - lower;
    return frac * e[n + 1] + (1.0 - frac) * e[n];
  }

 private:
  std::size_t idx(int r) const {
    detail::require(r >= 0 && r <= model_.batch_size, "rank must lie in [0, M]");
    return static_cast<std::size_t>(r);
  }

  ChannelModel model_;
  std::vector<int> i_max_;
  std::vector<std::vector<double>> values_;  // E_r(0..i_max_r+1)
};

inline ExpectedRankTable build_table(const ChannelModel& model,
                                     double epsilon = ExpectedRankTable::kDefaultEpsilon,
                                     int hard_cap = ExpectedRankTable::kDefaultHardCap) {
  return ExpectedRankTable(model, epsilon, hard_cap);
}

/// min_i (delta(r,i) t + zeta(r,i)) over i in [0, i_max(r)].
inline double eval_piecewise(const ExpectedRankTable& table, int r, double t) {
  const int i_max = table.i_max(r);
  detail::require(std::isfinite(t) && t >= 0.0 && t <= static_cast<double>(i_max),
                  "piecewise evaluation needs t in [0, i_max]");
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= i_max; ++i) best = std::min(best, table.delta(r, i) * t + table.zeta(r, i));
  return best;
}

/// Law of the next-hop rank of a rank-r batch when t packets are sent.
inline RankDistribution rank_transition(const ChannelModel& model, int r, double t) {
  model.validate();
  detail::check_rank(model, r);
  detail::check_packets(t);
  const double lower = std::floor(t);
  const double frac = t - lower;
  const int n = static_cast<int>(lower);
  const detail::BinomialLadder ladder(model.loss_rate, n + 1);

  std::vector<double> out(static_cast<std::size_t>(model.batch_size) + 1, 0.0);
  auto accumulate = [&](int packets, double weight) {
    if (weight == 0.0) return;
    const auto& row = ladder.pmf(packets);
    for (int k = 0; k <= packets; ++k)
      out[static_cast<std::size_t>(std::min(r, k))] += weight * row[static_cast<std::size_t>(k)];
  };
  accumulate(n, 1.0 - frac);
  accumulate(n + 1, frac);
  return RankDistribution(std::move(out), 1e-10);
}

/// CSV dump with columns r,i,E,delta,zeta for i in [0, i_max(r)].
inline void write_table_csv(std::ostream& os, const ExpectedRankTable& table) {
  const auto old_precision = os.precision(std::numeric_limits<double>::max_digits10);
  os << "r,i,E,delta,zeta\n";
  for (int r = 0; r <= table.max_rank(); ++r)
    for (int i = 0; i <= table.i_max(r); ++i)
      os << r << ',' << i << ',' << table.value(r, i) << ',' << table.delta(r, i) << ','
         << table.zeta(r, i) << '\n';
  os.precision(old_precision);
}

}  // namespace drorecode
