#pragma once

// Sample-average approximation: maximize sum_r h_r E_r(t_r) subject to
// sum_r h_r t_r = t_avg with h the (empirical) rank distribution.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <tuple>
#include <vector>

#include "drorecode/error.hpp"
#include "drorecode/lp_solver.hpp"
#include "drorecode/rank_distribution.hpp"
#include "drorecode/rank_model.hpp"

namespace drorecode {

/// Expected number of packets sent per batch, indexed by batch rank.
class RecodingVector {
 public:
  RecodingVector() = default;
  explicit RecodingVector(std::vector<double> packets) : t_(std::move(packets)) {
    for (double v : t_) detail::require(std::isfinite(v) && v >= 0.0, "recoding vector entries must be >= 0");
  }
  static RecodingVector zeros(int max_rank) {
    return RecodingVector(std::vector<double>(static_cast<std::size_t>(max_rank) + 1, 0.0));
  }

  int max_rank() const { return static_cast<int>(t_.size()) - 1; }
  std::size_t size() const { return t_.size(); }
  double operator[](int r) const { return t_[static_cast<std::size_t>(r)]; }
  double& operator[](int r) { return t_[static_cast<std::size_t>(r)]; }
  std::span<const double> values() const { return t_; }

  /// sum_r h_r t_r
  double mean(const RankDistribution& h) const {
    detail::require(h.size() == t_.size(), "recoding vector and distribution sizes differ");
    double s = 0.0;
    for (std::size_t r = 0; r < t_.size(); ++r) s += h[static_cast<int>(r)] * t_[r];
    return s;
  }

 private:
  std::vector<double> t_;
};

struct Budget {
  double t_avg = 16.0;

  Budget() = default;
  explicit Budget(double value) : t_avg(value) {
    detail::require(std::isfinite(value) && value > 0.0, "budget t_avg must be positive");
  }
};

/// sum_r h_r E_r(t_r) with the fractional-t expected rank.
inline double objective(const RankDistribution& h, const ExpectedRankTable& table, const RecodingVector& t) {
  detail::require(static_cast<int>(h.size()) == table.max_rank() + 1, "distribution does not match table");
  detail::require(t.size() == h.size(), "recoding vector does not match table");
  double total = 0.0;
  for (int r = 0; r <= table.max_rank(); ++r) {
    const double e = table.evaluate(r, t[r]);
    total += h[r] * e;
  }
  return total;
}

/// Clamp every t_r into [0, i_max(r)]; returns the largest amount removed.
inline double clip_to_table(RecodingVector& t, const ExpectedRankTable& table) {
  double worst = 0.0;
  for (int r = 0; r <= table.max_rank(); ++r) {
    const double hi = static_cast<double>(table.i_max(r));
    const double clipped = std::clamp(t[r], 0.0, hi);
    worst = std::max(worst, std::abs(clipped - t[r]));
    t[r] = clipped;
  }
  return worst;
}

struct GreedyAllocation {
  RecodingVector t;
  bool saturated = false;
  double threshold_slope = 0.0;  // slope of the last (possibly partial) segment taken
};

/// Marginal-gain allocation over unit segments (r, i), i < i_max(r), taken in
/// order of nonincreasing slope (ties: lower r, then lower i). Each segment of
/// rank r costs h_r; the last one is taken fractionally. Ranks with h_r = 0
/// stay at 0.
inline GreedyAllocation solve_saa_greedy(const RankDistribution& h, const ExpectedRankTable& table,
                                         const Budget& budget) {
  detail::require(static_cast<int>(h.size()) == table.max_rank() + 1, "distribution does not match table");

  struct Segment {
    double slope;
    int r;
    int i;
  };
  std::vector<Segment> segments;
  for (int r = 0; r <= table.max_rank(); ++r) {
    if (h[r] <= 0.0) continue;
    for (int i = 0; i < table.i_max(r); ++i) segments.push_back({table.delta(r, i), r, i});
  }
  std::sort(segments.begin(), segments.end(), [](const Segment& a, const Segment& b) {
    return std::tie(b.slope, a.r, a.i) < std::tie(a.slope, b.r, b.i);
  });

  GreedyAllocation out{RecodingVector::zeros(table.max_rank()), false, 0.0};
  double remaining = budget.t_avg;
  for (const auto& s : segments) {
    const double cost = h[s.r];
    out.threshold_slope = s.slope;
    if (remaining >= cost) {
      out.t[s.r] += 1.0;
      remaining -= cost;
    } else {
      out.t[s.r] += remaining / cost;
      remaining = 0.0;
    }
    if (remaining <= 0.0) break;
  }
  out.saturated = remaining > 0.0;
  return out;
}

/// Robustness tuning for the SAA-primal method: ranks unseen in h (h_r = 0)
/// receive every segment whose slope strictly exceeds the greedy threshold,
/// i.e. the allocation they would get at the same Lagrange level. Seen ranks
/// are unchanged.
inline RecodingVector tune_unseen_ranks(const RankDistribution& h, const ExpectedRankTable& table,
                                        const GreedyAllocation& alloc) {
  RecodingVector t = alloc.t;
  for (int r = 0; r <= table.max_rank(); ++r) {
    if (h[r] > 0.0) continue;
    double v = 0.0;
    for (int i = 0; i < table.i_max(r) && table.delta(r, i) > alloc.threshold_slope + 1e-12; ++i) v += 1.0;
    t[r] = v;
  }
  return t;
}

namespace detail {

/// Epigraph LP restricted to the listed ranks; columns are (t_k, lambda_k) in list order.
/// With `budget_rows`, rank r keeps only the segments i <= t_avg / h_r: the budget
/// row already caps t_r there, so the dropped rows can never bind.
inline LpProblem build_saa_lp_on(const RankDistribution& h, const ExpectedRankTable& table, const Budget& budget,
                                 std::span<const int> ranks, double min_slope = 0.0) {
  const std::size_t n = ranks.size();
  LpProblem lp;
  lp.matrix = CsrMatrix(2 * n);
  lp.cost.assign(2 * n, 0.0);
  lp.sign.assign(2 * n, VarSign::NonNegative);
  for (std::size_t k = 0; k < n; ++k) {
    lp.cost[n + k] = -h[ranks[k]];
    lp.sign[n + k] = VarSign::Free;
  }

  std::vector<CsrMatrix::Entry> row;
  for (std::size_t k = 0; k < n; ++k) row.push_back({k, h[ranks[k]]});
  lp.matrix.append_row(row);
  lp.rhs.push_back(budget.t_avg);

  for (std::size_t k = 0; k < n; ++k) {
    const int r = ranks[k];
    for (int i = 0; i <= table.i_max(r); ++i) {
      const double d = table.delta(r, i);
      if (d > 0.0 && d < min_slope) continue;
      lp.matrix.append_row({{k, -d}, {n + k, 1.0}});
      lp.rhs.push_back(table.zeta(r, i));
    }
  }
  return lp;
}

}  // namespace detail

/// Epigraph LP over x = (t_0..t_M, lambda_0..lambda_M):
///   min -sum_r h_r lambda_r  s.t.  lambda_r - delta(r,i) t_r <= zeta(r,i)  for i in [0, i_max(r)],
///                                  sum_r h_r t_r <= t_avg,  t >= 0.
inline LpProblem build_saa_lp(const RankDistribution& h, const ExpectedRankTable& table, const Budget& budget) {
  detail::require(static_cast<int>(h.size()) == table.max_rank() + 1, "distribution does not match table");
  std::vector<int> ranks(h.size());
  for (std::size_t r = 0; r < ranks.size(); ++r) ranks[r] = static_cast<int>(r);
  return detail::build_saa_lp_on(h, table, budget, ranks);
}

struct SaaLpResult {
  RecodingVector t;
  double lp_objective = 0.0;  // sum_r h_r lambda_r at the LP solution
  double objective = 0.0;     // sum_r h_r E_r(t_r) after clipping into the table range
  double max_clip = 0.0;
  SolverReport report;
};

struct SaaLpSettings {
  /// Segments with 0 < delta < min_slope are left out of the LP. Their slopes
  /// span many decades below the solver tolerance and stall PDHG on the
  /// scaled problem. Dropping them relaxes the envelope by at most the gain
  /// left past the first dropped segment, which the final objective (computed
  /// from the exact table) does not see.
  double min_slope = 1e-6;
  /// The epigraph LP has a long slow tail on near-parallel segments, so its
  /// solve runs for at least this many iterations whatever the PDHG options say.
  long iteration_floor = 1000000;
};

/// Solves the SAA epigraph LP with the preconditioned PDHG solver. Ranks with
/// h_r = 0 carry no weight and ranks with i_max(r) = 0 have no gain, so both
/// are left out of the solve and get t_r = 0.
/// Throws NonConvergence when the solver stops short of its tolerance.
inline SaaLpResult solve_saa_lp(const RankDistribution& h, const ExpectedRankTable& table, const Budget& budget,
                                const PdhgOptions& opts = {}, const SaaLpSettings& settings = {}) {
  detail::require(static_cast<int>(h.size()) == table.max_rank() + 1, "distribution does not match table");
  std::vector<int> ranks;
  for (int r : h.support())
    if (table.i_max(r) > 0) ranks.push_back(r);
  if (ranks.empty()) {
    SaaLpResult none;
    none.t = RecodingVector::zeros(table.max_rank());
    none.report.converged = true;
    return none;
  }
  const LpProblem lp = detail::build_saa_lp_on(h, table, budget, ranks, settings.min_slope);
  PdhgOptions run = opts;
  run.max_iter = std::max(run.max_iter, settings.iteration_floor);
  LpSolution sol = solve_lp(lp, run);
  if (!sol.report.converged)
    throw NonConvergence("SAA-LP solve did not converge", sol.report.diagnostics());

  SaaLpResult out;
  out.t = RecodingVector::zeros(table.max_rank());
  for (std::size_t k = 0; k < ranks.size(); ++k) out.t[ranks[k]] = std::max(sol.x[k], 0.0);
  out.max_clip = clip_to_table(out.t, table);
  out.lp_objective = -sol.objective;
  out.objective = objective(h, table, out.t);
  out.report = std::move(sol.report);
  return out;
}

}  // namespace drorecode
