#pragma once

// Linear programs  min f^T x  s.t.  A x <= b,  x_i >= 0 for sign-constrained i,
// solved with an adaptive primal-dual hybrid gradient (PDHG) iteration on the
// saddle function f^T y + z^T (A y - b), z >= 0.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iomanip>
#include <iostream>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <vector>

#include "drorecode/error.hpp"
#include "drorecode/sparse_matrix.hpp"

namespace drorecode {

enum class VarSign { NonNegative, Free };

struct LpProblem {
  std::vector<double> cost;  // f
  CsrMatrix matrix;          // A
  std::vector<double> rhs;   // b
  std::vector<VarSign> sign;

  std::size_t variables() const { return cost.size(); }
  std::size_t constraints() const { return rhs.size(); }

  void validate() const {
    detail::require(matrix.cols() == cost.size(), "LP: matrix columns must match cost length");
    detail::require(matrix.rows() == rhs.size(), "LP: matrix rows must match rhs length");
    detail::require(sign.size() == cost.size(), "LP: sign mask must match cost length");
    for (double v : cost) detail::require(std::isfinite(v), "LP: cost must be finite");
    for (double v : rhs) detail::require(std::isfinite(v), "LP: rhs must be finite");
  }

  double objective(std::span<const double> x) const {
    return std::inner_product(cost.begin(), cost.end(), x.begin(), 0.0);
  }
};

namespace detail {

inline double norm_inf(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Preconditioning

/// Diagonal scalings with A' = D_L A D_R, f' = D_R f, b' = D_L b.
struct Preconditioner {
  std::vector<double> left;               // D_L, one entry per kept row
  std::vector<double> right;              // D_R
  std::vector<std::size_t> kept_rows;     // original index of each scaled row
  std::size_t original_rows = 0;

  /// x = D_R y
  std::vector<double> recover_primal(std::span<const double> y) const {
    std::vector<double> x(y.size());
    for (std::size_t j = 0; j < y.size(); ++j) x[j] = right[j] * y[j];
    return x;
  }

  /// Multipliers of the original rows (dropped rows get 0).
  std::vector<double> recover_dual(std::span<const double> z) const {
    std::vector<double> out(original_rows, 0.0);
    for (std::size_t i = 0; i < z.size(); ++i) out[kept_rows[i]] = left[i] * z[i];
    return out;
  }
};

struct ScaledProblem {
  LpProblem problem;
  Preconditioner scaling;
};

/// Variance of |a_ij| over the stored nonzeros.
inline double nonzero_magnitude_variance(const CsrMatrix& a) {
  const auto vals = a.values();
  if (vals.empty()) return 0.0;
  double mean = 0.0;
  for (double v : vals) mean += std::abs(v);
  mean /= static_cast<double>(vals.size());
  double var = 0.0;
  for (double v : vals) var += (std::abs(v) - mean) * (std::abs(v) - mean);
  return var / static_cast<double>(vals.size());
}

/// Arithmetic-mean scaling: each pass divides every row, then every column, by
/// the mean absolute value of its nonzeros. A closing row pass leaves every
/// row with mean absolute nonzero 1. All-zero rows are dropped with a warning.
inline ScaledProblem precondition(const LpProblem& p, int passes = 10, std::ostream* warnings = &std::cerr) {
  p.validate();
  detail::require(passes >= 0, "precondition: pass count must be nonnegative");

  const CsrMatrix& a0 = p.matrix;
  std::vector<std::size_t> keep;
  keep.reserve(a0.rows());
  for (std::size_t i = 0; i < a0.rows(); ++i) {
    if (a0.row_end(i) > a0.row_begin(i)) {
      keep.push_back(i);
    } else if (warnings != nullptr) {
      *warnings << "warning: dropping all-zero constraint row " << i << " (rhs " << p.rhs[i] << ")\n";
    }
  }

  ScaledProblem out;
  LpProblem& s = out.problem;
  s.matrix = keep.size() == a0.rows() ? a0 : a0.select_rows(keep);
  CsrMatrix& a = s.matrix;
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();

  std::vector<double> dl(m, 1.0);
  std::vector<double> dr(n, 1.0);

  auto row_pass = [&] {
    for (std::size_t i = 0; i < m; ++i) {
      double sum = 0.0;
      for (std::size_t k = a.row_begin(i); k < a.row_end(i); ++k) sum += std::abs(a.value(k));
      const auto count = static_cast<double>(a.row_end(i) - a.row_begin(i));
      const double factor = count / sum;
      dl[i] *= factor;
      for (std::size_t k = a.row_begin(i); k < a.row_end(i); ++k) a.value(k) *= factor;
    }
  };
  auto col_pass = [&] {
    std::vector<double> sum(n, 0.0);
    std::vector<double> count(n, 0.0);
    for (std::size_t k = 0; k < a.nonzeros(); ++k) {
      sum[a.col(k)] += std::abs(a.value(k));
      count[a.col(k)] += 1.0;
    }
    std::vector<double> factor(n, 1.0);
    for (std::size_t j = 0; j < n; ++j)
      if (count[j] > 0.0) factor[j] = count[j] / sum[j];
    for (std::size_t k = 0; k < a.nonzeros(); ++k) a.value(k) *= factor[a.col(k)];
    for (std::size_t j = 0; j < n; ++j) dr[j] *= factor[j];
  };

  for (int pass = 0; pass < passes; ++pass) {
    row_pass();
    col_pass();
  }
  row_pass();

  s.cost.resize(n);
  for (std::size_t j = 0; j < n; ++j) s.cost[j] = dr[j] * p.cost[j];
  s.rhs.resize(m);
  for (std::size_t i = 0; i < m; ++i) s.rhs[i] = dl[i] * p.rhs[keep[i]];
  s.sign = p.sign;

  out.scaling.left = std::move(dl);
  out.scaling.right = std::move(dr);
  out.scaling.kept_rows = std::move(keep);
  out.scaling.original_rows = a0.rows();
  return out;
}

// ---------------------------------------------------------------------------
// Spectral norm

/// Power iteration on A^T A from a fixed pseudo-random start.
inline double spectral_norm_estimate(const CsrMatrix& a, double rel_tol = 1e-6, int max_iter = 200) {
  detail::require(a.nonzeros() > 0, "spectral norm of an all-zero matrix");
  std::mt19937_64 gen(0x5eed);
  std::uniform_real_distribution<double> unif(0.5, 1.5);
  std::vector<double> v(a.cols());
  for (auto& x : v) x = unif(gen);
  std::vector<double> av(a.rows());
  std::vector<double> w(a.cols());

  auto normalize = [](std::vector<double>& x) {
    const double nrm = std::sqrt(detail::dot(x, x));
    if (nrm > 0.0)
      for (auto& e : x) e /= nrm;
    return nrm;
  };
  normalize(v);

  double estimate = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    a.multiply(v, av);
    a.multiply_transpose(av, w);
    const double next = std::sqrt(normalize(w));
    std::swap(v, w);
    const bool done = it > 0 && std::abs(next - estimate) <= rel_tol * next;
    estimate = next;
    if (done || estimate == 0.0) break;
  }
  return estimate;
}

// ---------------------------------------------------------------------------
// Step-size control

/// Constants of the backtracking guard and residual balancing.
struct StepRules {
  double backtrack_c = 0.9;        // stability margin in the backtracking test
  double backtrack_shrink = 0.5;   // both steps multiplied by this on violation
  double balance_ratio = 1.5;      // Delta: width of the no-change band
  double alpha0 = 0.95;            // initial adaptivity level
  double alpha_decay = 0.95;       // eta_alpha
  double step_floor = 1e-12;
};

struct StepSizeState {
  double tau = 0.0;
  double sigma = 0.0;
  double alpha = 0.95;
  bool floor_hit = false;
};

/// Quantities measured on a tentative iterate (y, z) -> (y+, z+).
struct IterationResiduals {
  double dy_sq = 0.0;    // ||y+ - y||^2
  double dz_sq = 0.0;    // ||z+ - z||^2
  double cross = 0.0;    // (z+ - z)^T A (y+ - y)
  double primal = 0.0;   // ||(y - y+)/tau - A^T (z - z+)||
  double dual = 0.0;     // ||(z - z+)/sigma - A (y - y+)||
};

struct StepDecision {
  double tau = 0.0;
  double sigma = 0.0;
  bool retry = false;    // backtracking rejected the iterate
};

/// Backtracking guard, then residual balancing. Updates `state` in place.
inline StepDecision adapt_step_sizes(StepSizeState& state, const IterationResiduals& r,
                                     const StepRules& rules = {}) {
  StepDecision out;
  const double energy = rules.backtrack_c * (r.dy_sq / (2.0 * state.tau) + r.dz_sq / (2.0 * state.sigma));
  if (energy < 2.0 * r.cross) {
    state.tau *= rules.backtrack_shrink;
    state.sigma *= rules.backtrack_shrink;
    out.retry = true;
  } else if (r.primal > rules.balance_ratio * r.dual) {
    state.tau /= (1.0 - state.alpha);
    state.sigma *= (1.0 - state.alpha);
    state.alpha *= rules.alpha_decay;
  } else if (r.dual > rules.balance_ratio * r.primal) {
    state.tau *= (1.0 - state.alpha);
    state.sigma /= (1.0 - state.alpha);
    state.alpha *= rules.alpha_decay;
  }
  if (state.tau < rules.step_floor) {
    state.tau = rules.step_floor;
    state.floor_hit = true;
  }
  if (state.sigma < rules.step_floor) {
    state.sigma = rules.step_floor;
    state.floor_hit = true;
  }
  out.tau = state.tau;
  out.sigma = state.sigma;
  return out;
}

// ---------------------------------------------------------------------------
// PDHG

struct PdhgOptions {
  double tol = 1e-6;
  long max_iter = 200000;
  int check_every = 10;       // KKT check and trace cadence
  double initial_step = 0.95; // tau_0 = sigma_0 = initial_step / ||A||
  StepRules rules{};
  /// Restart from the running average (or the current iterate, whichever has the
  /// smaller KKT error) when the error has dropped enough since the last restart.
  bool restart = true;
  double restart_sufficient = 0.2;
  double restart_necessary = 0.8;
  double restart_artificial = 0.36;
  /// Smoothing of the tau/sigma ratio update at restarts (0 disables it). The
  /// product tau*sigma is left unchanged.
  double restart_weight_smoothing = 0.5;
  /// Largest factor by which one restart may move the tau/sigma ratio. A
  /// restart right after a stall sees almost no primal movement and would
  /// otherwise freeze the primal step.
  double restart_weight_max_change = 4.0;
};

struct TracePoint {
  long iteration = 0;
  double primal_res = 0.0;
  double dual_res = 0.0;
  double gap = 0.0;
  double tau = 0.0;
  double sigma = 0.0;

  double kkt() const { return std::max({primal_res, dual_res, gap}); }
};

/// Relative KKT errors of a primal-dual pair.
///   primal: ||(Ay - b)_+||_inf / (1 + ||b||_inf)
///   dual:   reduced-cost violation ||.||_inf / (1 + ||f||_inf)
///   gap:    |f^T y + b^T z| / (1 + |f^T y| + |b^T z|)
struct KktErrors {
  double primal = 0.0;
  double dual = 0.0;
  double gap = 0.0;

  double combined() const { return std::max({primal, dual, gap}); }
};

struct SolverReport {
  std::vector<double> y;   // primal iterate
  std::vector<double> z;   // dual iterate, z >= 0
  long iterations = 0;
  long backtracks = 0;
  long restarts = 0;
  bool converged = false;
  bool step_floor_hit = false;
  double objective = 0.0;  // f^T y
  double tau = 0.0;
  double sigma = 0.0;
  double norm_estimate = 0.0;
  KktErrors final_errors{};
  std::vector<TracePoint> trace;

  std::string diagnostics() const {
    std::ostringstream os;
    os << "iterations=" << iterations << " primal_res=" << final_errors.primal
       << " dual_res=" << final_errors.dual << " gap=" << final_errors.gap << " tau=" << tau
       << " sigma=" << sigma << " backtracks=" << backtracks << " restarts=" << restarts << (step_floor_hit ? " step_floor_hit" : "");
    return os.str();
  }
};

namespace detail {

/// With `row_scale`/`col_scale` (D_L, D_R) given, the errors are those of the
/// unscaled problem: rows divide by D_L, reduced costs by D_R. The gap is
/// invariant under the scaling.
inline KktErrors kkt_errors(const LpProblem& p, std::span<const double> y, std::span<const double> z,
                            std::span<const double> ay, std::span<const double> atz,
                            std::span<const double> row_scale = {}, std::span<const double> col_scale = {}) {
  KktErrors e;
  double viol = 0.0;
  double bnorm = 0.0;
  for (std::size_t i = 0; i < p.rhs.size(); ++i) {
    const double d = row_scale.empty() ? 1.0 : row_scale[i];
    viol = std::max(viol, (ay[i] - p.rhs[i]) / d);
    bnorm = std::max(bnorm, std::abs(p.rhs[i] / d));
  }
  e.primal = viol / (1.0 + bnorm);

  double red = 0.0;
  double fnorm = 0.0;
  for (std::size_t j = 0; j < p.cost.size(); ++j) {
    const double d = col_scale.empty() ? 1.0 : col_scale[j];
    const double c = (p.cost[j] + atz[j]) / d;
    red = std::max(red, p.sign[j] == VarSign::Free ? std::abs(c) : std::max(0.0, -c));
    fnorm = std::max(fnorm, std::abs(p.cost[j] / d));
  }
  e.dual = red / (1.0 + fnorm);

  const double fy = dot(p.cost, y);
  const double bz = dot(p.rhs, z);
  e.gap = std::abs(fy + bz) / (1.0 + std::abs(fy) + std::abs(bz));
  return e;
}

}  // namespace detail

inline KktErrors kkt_errors(const LpProblem& p, std::span<const double> y, std::span<const double> z) {
  std::vector<double> ay(p.constraints());
  std::vector<double> atz(p.variables());
  p.matrix.multiply(y, ay);
  p.matrix.multiply_transpose(z, atz);
  return detail::kkt_errors(p, y, z, ay, atz);
}

/// Adaptive PDHG. Never throws on non-convergence; inspect `converged`.
/// When `original` is the scaling that produced `p`, convergence also requires
/// the unscaled errors to meet the tolerance.
inline SolverReport solve_pdhg(const LpProblem& p, const PdhgOptions& opts = {},
                               const Preconditioner* original = nullptr) {
  p.validate();
  detail::require(opts.tol > 0.0, "PDHG tolerance must be positive");
  detail::require(opts.max_iter >= 1, "PDHG needs at least one iteration");
  detail::require(opts.check_every >= 1, "PDHG check cadence must be positive");

  const std::size_t n = p.variables();
  const std::size_t m = p.constraints();
  const CsrMatrix& a = p.matrix;

  std::vector<double> lb(n);
  for (std::size_t j = 0; j < n; ++j)
    lb[j] = p.sign[j] == VarSign::Free ? -std::numeric_limits<double>::infinity() : 0.0;

  SolverReport rep;
  rep.y.assign(n, 0.0);
  rep.z.assign(m, 0.0);
  std::vector<double>& y = rep.y;
  std::vector<double>& z = rep.z;
  std::vector<double> ay(m, 0.0);
  std::vector<double> atz(n, 0.0);
  std::vector<double> y1(n), ay1(m), z1(m), atz1(n);

  rep.norm_estimate = a.nonzeros() > 0 ? spectral_norm_estimate(a) : 1.0;
  StepSizeState steps;
  steps.tau = opts.initial_step / rep.norm_estimate;
  steps.sigma = opts.initial_step / rep.norm_estimate;
  steps.alpha = opts.rules.alpha0;

  auto record = [&](long iteration, const KktErrors& e) {
    rep.trace.push_back({iteration, e.primal, e.dual, e.gap, steps.tau, steps.sigma});
  };

  // Running sums of the iterates since the last restart.
  std::vector<double> ysum(n, 0.0), zsum(m, 0.0), aysum(m, 0.0), atzsum(n, 0.0);
  std::vector<double> yavg(n), zavg(m), ayavg(m), atzavg(n);
  std::vector<double> y_anchor(n, 0.0), z_anchor(m, 0.0);
  long averaged = 0;
  long last_restart = 0;
  double restart_kkt = std::numeric_limits<double>::infinity();
  double previous_candidate_kkt = std::numeric_limits<double>::infinity();
  auto reset_average = [&] {
    std::fill(ysum.begin(), ysum.end(), 0.0);
    std::fill(zsum.begin(), zsum.end(), 0.0);
    std::fill(aysum.begin(), aysum.end(), 0.0);
    std::fill(atzsum.begin(), atzsum.end(), 0.0);
    averaged = 0;
  };

  long k = 0;
  while (k < opts.max_iter) {
    ++k;
    const double tau = steps.tau;
    const double sigma = steps.sigma;

    for (std::size_t j = 0; j < n; ++j) y1[j] = std::max(y[j] - tau * (atz[j] + p.cost[j]), lb[j]);
    a.multiply(y1, ay1);
    for (std::size_t i = 0; i < m; ++i)
      z1[i] = std::max(z[i] + sigma * (2.0 * ay1[i] - ay[i] - p.rhs[i]), 0.0);
    a.multiply_transpose(z1, atz1);

    IterationResiduals r;
    double primal_sq = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double dy = y1[j] - y[j];
      r.dy_sq += dy * dy;
      const double pr = -dy / tau + (atz1[j] - atz[j]);
      primal_sq += pr * pr;
    }
    double dual_sq = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double dz = z1[i] - z[i];
      const double a_dy = ay1[i] - ay[i];
      r.dz_sq += dz * dz;
      r.cross += dz * a_dy;
      const double dr = -dz / sigma + a_dy;
      dual_sq += dr * dr;
    }
    r.primal = std::sqrt(primal_sq);
    r.dual = std::sqrt(dual_sq);

    const StepDecision decision = adapt_step_sizes(steps, r, opts.rules);
    if (decision.retry) {
      ++rep.backtracks;
      if (!steps.floor_hit) continue;
    }
    std::swap(y, y1);
    std::swap(ay, ay1);
    std::swap(z, z1);
    std::swap(atz, atz1);

    if (opts.restart) {
      for (std::size_t j = 0; j < n; ++j) {
        ysum[j] += y[j];
        atzsum[j] += atz[j];
      }
      for (std::size_t i = 0; i < m; ++i) {
        zsum[i] += z[i];
        aysum[i] += ay[i];
      }
      ++averaged;
    }

    if (k % opts.check_every != 0 && k != opts.max_iter) continue;

    KktErrors e = detail::kkt_errors(p, y, z, ay, atz);
    if (opts.restart && averaged > 0) {
      const double inv = 1.0 / static_cast<double>(averaged);
      for (std::size_t j = 0; j < n; ++j) {
        yavg[j] = ysum[j] * inv;
        atzavg[j] = atzsum[j] * inv;
      }
      for (std::size_t i = 0; i < m; ++i) {
        zavg[i] = zsum[i] * inv;
        ayavg[i] = aysum[i] * inv;
      }
      const KktErrors ea = detail::kkt_errors(p, yavg, zavg, ayavg, atzavg);
      const bool use_average = ea.combined() < e.combined();
      const double candidate = use_average ? ea.combined() : e.combined();
      const bool do_restart =
          candidate <= opts.restart_sufficient * restart_kkt ||
          (candidate <= opts.restart_necessary * restart_kkt && candidate > previous_candidate_kkt) ||
          static_cast<double>(k - last_restart) >= opts.restart_artificial * static_cast<double>(k) ||
          restart_kkt == std::numeric_limits<double>::infinity();
      previous_candidate_kkt = candidate;
      if (do_restart) {
        if (use_average) {
          std::swap(y, yavg);
          std::swap(z, zavg);
          std::swap(ay, ayavg);
          std::swap(atz, atzavg);
          e = ea;
        }
        if (opts.restart_weight_smoothing > 0.0) {
          double dy = 0.0;
          double dz = 0.0;
          for (std::size_t j = 0; j < n; ++j) dy += (y[j] - y_anchor[j]) * (y[j] - y_anchor[j]);
          for (std::size_t i = 0; i < m; ++i) dz += (z[i] - z_anchor[i]) * (z[i] - z_anchor[i]);
          dy = std::sqrt(dy);
          dz = std::sqrt(dz);
          if (dy > 1e-10 && dz > 1e-10) {
            // tau = eta / w, sigma = eta * w; move log w toward log(dz / dy).
            const double eta = std::sqrt(steps.tau * steps.sigma);
            const double w = std::sqrt(steps.sigma / steps.tau);
            const double theta = opts.restart_weight_smoothing;
            const double cap = std::log(opts.restart_weight_max_change);
            const double step = std::clamp(theta * (std::log(dz / dy) - std::log(w)), -cap, cap);
            const double w_new = w * std::exp(step);
            steps.tau = eta / w_new;
            steps.sigma = eta * w_new;
          }
          y_anchor = y;
          z_anchor = z;
        }
        restart_kkt = candidate;
        previous_candidate_kkt = std::numeric_limits<double>::infinity();
        last_restart = k;
        ++rep.restarts;
        reset_average();
      }
    }
    record(k, e);
    rep.final_errors = e;
    if (e.primal <= opts.tol && e.dual <= opts.tol && e.gap <= opts.tol) {
      const KktErrors u =
          original ? detail::kkt_errors(p, y, z, ay, atz, original->left, original->right) : e;
      if (u.primal <= opts.tol && u.dual <= opts.tol) {
        rep.converged = true;
        break;
      }
    }
  }
  if (rep.trace.empty() || rep.trace.back().iteration != k) {
    rep.final_errors = detail::kkt_errors(p, y, z, ay, atz);
    record(k, rep.final_errors);
  }

  rep.iterations = k;
  rep.tau = steps.tau;
  rep.sigma = steps.sigma;
  rep.step_floor_hit = steps.floor_hit;
  rep.objective = detail::dot(p.cost, y);
  return rep;
}

/// Result of a preconditioned solve, mapped back to the original variables.
struct LpSolution {
  std::vector<double> x;
  std::vector<double> z;     // multipliers of the original rows
  double objective = 0.0;    // f^T x
  KktErrors unscaled_errors{};
  SolverReport report;       // scaled-space report
};

/// precondition -> PDHG -> x = D_R y.
inline LpSolution solve_lp(const LpProblem& p, const PdhgOptions& opts = {}, int precondition_passes = 10) {
  const ScaledProblem scaled = precondition(p, precondition_passes);
  LpSolution out;
  out.report = solve_pdhg(scaled.problem, opts, &scaled.scaling);
  out.x = scaled.scaling.recover_primal(out.report.y);
  out.z = scaled.scaling.recover_dual(out.report.z);
  out.objective = p.objective(out.x);
  out.unscaled_errors = kkt_errors(p, out.x, out.z);
  return out;
}

/// Residual trace as CSV: iteration,primal_res,dual_res,tau,sigma.
inline void write_trace_csv(std::ostream& os, const SolverReport& rep) {
  const auto old_precision = os.precision(std::numeric_limits<double>::max_digits10);
  os << "iteration,primal_res,dual_res,tau,sigma\n";
  for (const auto& t : rep.trace)
    os << t.iteration << ',' << t.primal_res << ',' << t.dual_res << ',' << t.tau << ',' << t.sigma << '\n';
  os.precision(old_precision);
}

}  // namespace drorecode
