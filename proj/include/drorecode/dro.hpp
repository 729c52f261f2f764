#pragma once

// Wasserstein distributionally robust recoding.
//
//   max_t  inf_{W(h, h_N) <= rho1} E_h[E_r(t_r)]
//   s.t.   sup_{W(h, h_N) <= rho2} E_h[t_r] <= t_avg
//
// written as one LP over x = (t, lambda_1, lambda_2) with
// lambda_i = (lambda_{0,i}, lambda_{1,i}, ..., lambda_{N,i}).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <span>
#include <vector>

#include "drorecode/distributions.hpp"
#include "drorecode/error.hpp"
#include "drorecode/lp_solver.hpp"
#include "drorecode/rank_model.hpp"
#include "drorecode/saa.hpp"

namespace drorecode {

struct DroInstance {
  RankSamples samples;
  ExpectedRankTable table;
  double rho1 = 0.0;
  double rho2 = 0.0;
  Budget budget;
  int segments = 0;  // uniform I, at least every i_max(r)

  DroInstance(RankSamples s, ExpectedRankTable tab, double r1, double r2, Budget b, int uniform_segments = -1)
      : samples(std::move(s)), table(std::move(tab)), rho1(r1), rho2(r2), budget(b),
        segments(uniform_segments < 0 ? table.uniform_segments() : uniform_segments) {
    validate();
  }

  void validate() const {
    detail::require(samples.max_rank() == table.max_rank(), "samples and table disagree on M");
    detail::require(std::isfinite(rho1) && rho1 >= 0.0, "rho1 must be nonnegative");
    detail::require(std::isfinite(rho2) && rho2 >= 0.0, "rho2 must be nonnegative");
    detail::require(segments >= table.uniform_segments(), "uniform segment count must cover every i_max");
  }
};

/// Column layout of the DRO LP for G sample groups.
struct DroLayout {
  int max_rank = 0;
  std::size_t groups = 0;

  std::size_t t(int r) const { return static_cast<std::size_t>(r); }
  std::size_t lambda01() const { return static_cast<std::size_t>(max_rank) + 1; }
  std::size_t lambda1(std::size_t j) const { return lambda01() + 1 + j; }
  std::size_t lambda02() const { return lambda01() + 1 + groups; }
  std::size_t lambda2(std::size_t j) const { return lambda02() + 1 + j; }
  std::size_t variables() const { return static_cast<std::size_t>(max_rank) + 2 * groups + 3; }
};

namespace detail {

/// LP with sample groups (center rank, weight); with one group per sample and
/// weight 1/N this is exactly the compact matrix form:
///   row 0:                 rho2 lambda02 + sum_j w_j lambda_j2 <= t_avg
///   rows (j, r, i):        -delta(r,i) t_r - |r - c_j| lambda01 + lambda_j1 <= zeta(r,i)
///   rows (j, r):           t_r - |r - c_j| lambda02 - lambda_j2 <= 0
/// cost: rho1 on lambda01, -w_j on lambda_j1. Sign constraints: t, lambda01, lambda02 >= 0.
/// Segments past i_max(r) are identical flat rows; `one_padding_row` keeps only the first.
inline LpProblem build_grouped_dro_lp(const ExpectedRankTable& table, std::span<const int> centers,
                                      std::span<const double> weights, double rho1, double rho2, double t_avg,
                                      int segments, bool one_padding_row = false, double min_slope = 0.0) {
  require(centers.size() == weights.size() && !centers.empty(), "DRO LP: bad sample groups");
  require(segments >= table.uniform_segments(), "DRO LP: uniform segment count too small");
  const int m = table.max_rank();
  const DroLayout at{m, centers.size()};
  const std::size_t n = at.variables();

  LpProblem lp;
  lp.matrix = CsrMatrix(n);
  lp.cost.assign(n, 0.0);
  lp.sign.assign(n, VarSign::Free);
  for (int r = 0; r <= m; ++r) lp.sign[at.t(r)] = VarSign::NonNegative;
  lp.sign[at.lambda01()] = VarSign::NonNegative;
  lp.sign[at.lambda02()] = VarSign::NonNegative;
  lp.cost[at.lambda01()] = rho1;
  for (std::size_t j = 0; j < centers.size(); ++j) lp.cost[at.lambda1(j)] = -weights[j];

  std::vector<CsrMatrix::Entry> row;
  row.push_back({at.lambda02(), rho2});
  for (std::size_t j = 0; j < centers.size(); ++j) row.push_back({at.lambda2(j), weights[j]});
  lp.matrix.append_row(row);
  lp.rhs.push_back(t_avg);

  for (std::size_t j = 0; j < centers.size(); ++j) {
    for (int r = 0; r <= m; ++r) {
      const double dist = std::abs(r - centers[j]);
      const int last = one_padding_row ? std::min(segments, table.i_max(r) + 1) : segments;
      for (int i = 0; i <= last; ++i) {
        const double d = table.delta(r, i);
        if (d > 0.0 && d < min_slope) continue;
        lp.matrix.append_row({{at.t(r), -d}, {at.lambda01(), -dist}, {at.lambda1(j), 1.0}});
        lp.rhs.push_back(table.zeta(r, i));
      }
    }
  }
  for (std::size_t j = 0; j < centers.size(); ++j) {
    for (int r = 0; r <= m; ++r) {
      const double dist = std::abs(r - centers[j]);
      lp.matrix.append_row({{at.t(r), 1.0}, {at.lambda02(), -dist}, {at.lambda2(j), -1.0}});
      lp.rhs.push_back(0.0);
    }
  }
  return lp;
}

struct SampleGroups {
  std::vector<int> centers;
  std::vector<double> weights;
  std::vector<std::size_t> group_of_sample;
};

inline SampleGroups group_samples(const RankSamples& samples, bool merge) {
  SampleGroups g;
  const auto n = static_cast<double>(samples.size());
  if (!merge) {
    for (std::size_t j = 0; j < samples.size(); ++j) {
      g.centers.push_back(samples[j]);
      g.weights.push_back(1.0 / n);
      g.group_of_sample.push_back(j);
    }
    return g;
  }
  const auto counts = samples.counts();
  std::vector<std::size_t> index(counts.size(), 0);
  for (std::size_t r = 0; r < counts.size(); ++r) {
    if (counts[r] == 0) continue;
    index[r] = g.centers.size();
    g.centers.push_back(static_cast<int>(r));
    g.weights.push_back(static_cast<double>(counts[r]) / n);
  }
  for (std::size_t j = 0; j < samples.size(); ++j) g.group_of_sample.push_back(index[static_cast<std::size_t>(samples[j])]);
  return g;
}

}  // namespace detail

/// The LP in compact matrix form: M + 2N + 3 columns,
/// 1 + N(M+1)(I+1) + N(M+1) rows.
inline LpProblem build_dro_lp(const DroInstance& inst) {
  inst.validate();
  const auto groups = detail::group_samples(inst.samples, false);
  return detail::build_grouped_dro_lp(inst.table, groups.centers, groups.weights, inst.rho1, inst.rho2,
                                      inst.budget.t_avg, inst.segments);
}

struct DroOptions {
  PdhgOptions pdhg{};
  int precondition_passes = 10;
  /// Identical samples share one block of rows; the LP value is unchanged.
  bool merge_duplicate_samples = true;
  /// Drop repeated flat segments past i_max(r); also leaves the LP unchanged.
  bool drop_padding_rows = true;
  /// Segments flatter than this are dropped. Same cut as the SAA-LP: the
  /// value moves by about 1e-6 and PDHG needs far fewer iterations.
  double min_slope = 1e-6;
  double clip_warning = 1e-5;
};

struct DroSolution {
  RecodingVector t;
  double lambda01 = 0.0;
  double lambda02 = 0.0;
  std::vector<double> lambda1;  // lambda_{j,1}, j = 1..N
  std::vector<double> lambda2;  // lambda_{j,2}
  double objective = 0.0;       // -f^T x of the recovered LP solution
  double max_clip = 0.0;        // largest clamp applied to bring t into [0, i_max]
  bool clip_exceeded = false;
  SolverReport report;
};

/// Builds, preconditions and solves the DRO LP, then recovers x = D_R y.
/// Throws NonConvergence (with residual diagnostics) if PDHG stops short.
inline DroSolution solve_dro(const DroInstance& inst, const DroOptions& opts = {}) {
  inst.validate();
  const auto groups = detail::group_samples(inst.samples, opts.merge_duplicate_samples);
  const LpProblem lp = detail::build_grouped_dro_lp(inst.table, groups.centers, groups.weights, inst.rho1,
                                                    inst.rho2, inst.budget.t_avg, inst.segments,
                                                    opts.drop_padding_rows, opts.min_slope);
  LpSolution sol = solve_lp(lp, opts.pdhg, opts.precondition_passes);
  if (!sol.report.converged) throw NonConvergence("DRO solve did not converge", sol.report.diagnostics());

  const int m = inst.table.max_rank();
  const DroLayout at{m, groups.centers.size()};
  DroSolution out;
  std::vector<double> t(static_cast<std::size_t>(m) + 1);
  for (int r = 0; r <= m; ++r) t[static_cast<std::size_t>(r)] = std::max(sol.x[at.t(r)], 0.0);
  double neg = 0.0;
  for (int r = 0; r <= m; ++r) neg = std::max(neg, -sol.x[at.t(r)]);
  out.t = RecodingVector(std::move(t));
  out.max_clip = std::max(neg, clip_to_table(out.t, inst.table));
  out.clip_exceeded = out.max_clip > opts.clip_warning;
  out.lambda01 = sol.x[at.lambda01()];
  out.lambda02 = sol.x[at.lambda02()];
  for (std::size_t j = 0; j < inst.samples.size(); ++j) {
    const std::size_t g = groups.group_of_sample[j];
    out.lambda1.push_back(sol.x[at.lambda1(g)]);
    out.lambda2.push_back(sol.x[at.lambda2(g)]);
  }
  out.objective = -sol.objective;
  out.report = std::move(sol.report);
  return out;
}

namespace detail {

struct WeightedCenters {
  std::vector<int> centers;
  std::vector<double> weights;
};

inline WeightedCenters distinct_centers(const RankSamples& samples) {
  auto g = group_samples(samples, true);
  return {std::move(g.centers), std::move(g.weights)};
}

/// Every lambda > 0 at which two ranks swap order in a_r + lambda |r - c| for some center c.
/// These contain all kinks of the piecewise-linear dual functions below.
inline std::vector<double> dual_breakpoints(std::span<const double> values, std::span<const int> centers) {
  std::vector<double> out{0.0};
  const int m = static_cast<int>(values.size()) - 1;
  for (int c : centers) {
    for (int r = 0; r <= m; ++r) {
      for (int s = r + 1; s <= m; ++s) {
        const double dd = std::abs(s - c) - std::abs(r - c);
        if (dd == 0.0) continue;
        const double lam = (values[static_cast<std::size_t>(r)] - values[static_cast<std::size_t>(s)]) / dd;
        if (lam > 0.0 && std::isfinite(lam)) out.push_back(lam);
      }
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  out.push_back(out.back() + 1.0);
  return out;
}

}  // namespace detail

/// sup_{lambda >= 0} -lambda rho1 + (1/N) sum_j min_r (E_r(t_r) + lambda |r - r_j|),
/// maximized exactly over the kinks of this concave piecewise-linear function.
inline double worst_case_utility(const RecodingVector& t, const RankSamples& samples,
                                 const ExpectedRankTable& table, double rho1) {
  detail::require(rho1 >= 0.0, "rho1 must be nonnegative");
  detail::require(static_cast<int>(t.size()) == table.max_rank() + 1, "recoding vector does not match table");
  detail::require(samples.max_rank() == table.max_rank(), "samples do not match table");
  std::vector<double> e(t.size());
  for (int r = 0; r <= table.max_rank(); ++r) e[static_cast<std::size_t>(r)] = table.evaluate(r, t[r]);

  const auto wc = detail::distinct_centers(samples);
  auto dual = [&](double lam) {
    double v = -lam * rho1;
    for (std::size_t j = 0; j < wc.centers.size(); ++j) {
      double best = std::numeric_limits<double>::infinity();
      for (int r = 0; r <= table.max_rank(); ++r)
        best = std::min(best, e[static_cast<std::size_t>(r)] + lam * std::abs(r - wc.centers[j]));
      v += wc.weights[j] * best;
    }
    return v;
  };
  double best = -std::numeric_limits<double>::infinity();
  for (double lam : detail::dual_breakpoints(e, wc.centers)) best = std::max(best, dual(lam));
  return best;
}

/// inf_{lambda >= 0} lambda rho2 + (1/N) sum_j max_r (t_r - lambda |r - r_j|).
inline double worst_case_expectation(const RecodingVector& t, const RankSamples& samples, double rho2) {
  detail::require(rho2 >= 0.0, "rho2 must be nonnegative");
  detail::require(static_cast<int>(t.size()) == samples.max_rank() + 1, "recoding vector does not match samples");
  const auto wc = detail::distinct_centers(samples);
  const int m = samples.max_rank();
  auto dual = [&](double lam) {
    double v = lam * rho2;
    for (std::size_t j = 0; j < wc.centers.size(); ++j) {
      double best = -std::numeric_limits<double>::infinity();
      for (int r = 0; r <= m; ++r) best = std::max(best, t[r] - lam * std::abs(r - wc.centers[j]));
      v += wc.weights[j] * best;
    }
    return v;
  };
  std::vector<double> neg(t.size());
  for (std::size_t r = 0; r < t.size(); ++r) neg[r] = -t[static_cast<int>(r)];
  double best = std::numeric_limits<double>::infinity();
  for (double lam : detail::dual_breakpoints(neg, wc.centers)) best = std::min(best, dual(lam));
  return best;
}

/// max over r in supp(h), r' != r of |f(r') - f(r)| / |r' - r|.
inline double lipschitz_norm(std::span<const double> values, const RankDistribution& h) {
  detail::require(values.size() == h.size(), "lipschitz_norm: size mismatch");
  const auto supp = h.support();
  detail::require(!supp.empty(), "lipschitz_norm: empty support");
  double best = 0.0;
  const int m = static_cast<int>(values.size()) - 1;
  for (int r : supp)
    for (int s = 0; s <= m; ++s)
      if (s != r)
        best = std::max(best, std::abs(values[static_cast<std::size_t>(s)] - values[static_cast<std::size_t>(r)]) /
                                  std::abs(s - r));
  return best;
}

}  // namespace drorecode
