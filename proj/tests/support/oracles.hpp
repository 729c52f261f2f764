#pragma once

// Reference implementations used only by the tests. They share no code with
// the library beyond plain data types, and favour clarity over speed.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Vec = std::vector<double>;
using Mat = std::vector<std::vector<double>>;

// ---------------------------------------------------------------------------
// Dense two-phase simplex with Bland's rule:  min c^T x  s.t.  A x = b, x >= 0.

struct SimplexResult {
  bool feasible = false;
  bool bounded = true;
  double value = 0.0;
  Vec x;
};

inline SimplexResult simplex_standard(const Vec& c, Mat a, Vec b) {
  using L = long double;
  const std::size_t m = a.size();
  const std::size_t n = c.size();
  for (std::size_t i = 0; i < m; ++i)
    if (b[i] < 0) {
      for (auto& v : a[i]) v = -v;
      b[i] = -b[i];
    }
  // Tableau columns: n originals, m artificials, rhs.
  const std::size_t cols = n + m + 1;
  std::vector<std::vector<L>> t(m + 1, std::vector<L>(cols, 0));
  std::vector<std::size_t> basis(m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) t[i][j] = a[i][j];
    t[i][n + i] = 1;
    t[i][cols - 1] = b[i];
    basis[i] = n + i;
  }
  const L eps = 1e-11L;

  auto pivot = [&](std::size_t row, std::size_t col) {
    const L pv = t[row][col];
    for (auto& v : t[row]) v /= pv;
    for (std::size_t i = 0; i <= m; ++i) {
      if (i == row || t[i][col] == 0) continue;
      const L f = t[i][col];
      for (std::size_t j = 0; j < cols; ++j) t[i][j] -= f * t[row][j];
    }
    basis[row] = col;
  };

  // Objective row holds reduced costs; minimise.
  auto run = [&](std::size_t allowed_cols) -> bool {
    for (;;) {
      std::size_t enter = cols;
      for (std::size_t j = 0; j < allowed_cols; ++j)
        if (t[m][j] < -eps) {
          enter = j;
          break;
        }
      if (enter == cols) return true;
      std::size_t leave = m;
      L best = 0;
      for (std::size_t i = 0; i < m; ++i) {
        if (t[i][enter] > eps) {
          const L ratio = t[i][cols - 1] / t[i][enter];
          if (leave == m || ratio < best - eps || (std::abs(ratio - best) <= eps && basis[i] < basis[leave])) {
            leave = i;
            best = ratio;
          }
        }
      }
      if (leave == m) return false;
      pivot(leave, enter);
    }
  };

  // Phase 1: minimise the sum of artificials.
  for (std::size_t j = 0; j < cols; ++j) t[m][j] = 0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      if (j < n || j == cols - 1) t[m][j] -= t[i][j];
  run(n + m);
  SimplexResult out;
  if (-t[m][cols - 1] > 1e-8L) return out;
  out.feasible = true;
  // Drive remaining artificials out of the basis where possible.
  for (std::size_t i = 0; i < m; ++i) {
    if (basis[i] < n) continue;
    for (std::size_t j = 0; j < n; ++j)
      if (std::abs(t[i][j]) > eps) {
        pivot(i, j);
        break;
      }
  }
  // Phase 2.
  for (std::size_t j = 0; j < cols; ++j) t[m][j] = 0;
  for (std::size_t j = 0; j < n; ++j) t[m][j] = c[j];
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t bj = basis[i];
    if (bj >= n) continue;
    const L f = t[m][bj];
    if (f == 0) continue;
    for (std::size_t j = 0; j < cols; ++j) t[m][j] -= f * t[i][j];
  }
  // Artificial columns are excluded from entering.
  if (!run(n)) {
    out.bounded = false;
    return out;
  }
  out.x.assign(n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    if (basis[i] < n) out.x[basis[i]] = static_cast<double>(t[i][cols - 1]);
  long double v = 0;
  for (std::size_t j = 0; j < n; ++j) v += static_cast<L>(c[j]) * out.x[j];
  out.value = static_cast<double>(v);
  return out;
}

/// min c^T x s.t. A_ub x <= b_ub, A_eq x = b_eq, x_j >= 0 unless free[j].
inline SimplexResult simplex(const Vec& c, const Mat& a_ub, const Vec& b_ub, const Mat& a_eq, const Vec& b_eq,
                             const std::vector<bool>& free) {
  const std::size_t n = c.size();
  std::size_t n_split = n;
  std::vector<std::size_t> neg_col(n, 0);
  for (std::size_t j = 0; j < n; ++j)
    if (!free.empty() && free[j]) neg_col[j] = n_split++;
  const std::size_t total = n_split + a_ub.size();
  Vec cs(total, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    cs[j] = c[j];
    if (neg_col[j]) cs[neg_col[j]] = -c[j];
  }
  Mat a;
  Vec b;
  auto expand = [&](const Vec& row) {
    Vec r(total, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      r[j] = row[j];
      if (neg_col[j]) r[neg_col[j]] = -row[j];
    }
    return r;
  };
  for (std::size_t i = 0; i < a_ub.size(); ++i) {
    Vec r = expand(a_ub[i]);
    r[n_split + i] = 1.0;
    a.push_back(r);
    b.push_back(b_ub[i]);
  }
  for (std::size_t i = 0; i < a_eq.size(); ++i) {
    a.push_back(expand(a_eq[i]));
    b.push_back(b_eq[i]);
  }
  SimplexResult s = simplex_standard(cs, a, b);
  if (!s.feasible || !s.bounded) return s;
  Vec x(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) x[j] = s.x[j] - (neg_col[j] ? s.x[neg_col[j]] : 0.0);
  s.x = x;
  return s;
}

// ---------------------------------------------------------------------------
// Vertex enumeration for tiny LPs: min c^T x s.t. A x <= b, x_j >= 0 unless free[j].
// The feasible set must be bounded.

inline std::optional<double> vertex_enumeration(const Vec& c, const Mat& a, const Vec& b,
                                                const std::vector<bool>& free) {
  const std::size_t n = c.size();
  Mat rows = a;
  Vec rhs = b;
  for (std::size_t j = 0; j < n; ++j)
    if (!free[j]) {
      Vec r(n, 0.0);
      r[j] = -1.0;
      rows.push_back(r);
      rhs.push_back(0.0);
    }
  const std::size_t total = rows.size();
  std::optional<double> best;
  std::vector<std::size_t> pick;
  std::function<void(std::size_t)> rec = [&](std::size_t start) {
    if (pick.size() == n) {
      Eigen::MatrixXd m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
      Eigen::VectorXd v(static_cast<Eigen::Index>(n));
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[pick[i]][j];
        v(static_cast<Eigen::Index>(i)) = rhs[pick[i]];
      }
      Eigen::FullPivLU<Eigen::MatrixXd> lu(m);
      if (lu.rank() < static_cast<Eigen::Index>(n)) return;
      const Eigen::VectorXd x = lu.solve(v);
      for (std::size_t i = 0; i < total; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += rows[i][j] * x(static_cast<Eigen::Index>(j));
        if (s > rhs[i] + 1e-9) return;
      }
      double val = 0.0;
      for (std::size_t j = 0; j < n; ++j) val += c[j] * x(static_cast<Eigen::Index>(j));
      if (!best || val < *best) best = val;
      return;
    }
    for (std::size_t i = start; i < total; ++i) {
      pick.push_back(i);
      rec(i + 1);
      pick.pop_back();
    }
  };
  rec(0);
  return best;
}

// ---------------------------------------------------------------------------
// Rank model oracle: direct binomial sum with lgamma coefficients.

inline double expected_rank(double p, int r, int t) {
  long double s = 0;
  for (int k = 0; k <= t; ++k) {
    const long double logc = std::lgamma(t + 1.0L) - std::lgamma(k + 1.0L) - std::lgamma(t - k + 1.0L);
    long double pmf = std::exp(logc + k * std::log1p(-static_cast<long double>(p)) +
                               (t - k) * (p > 0 ? std::log(static_cast<long double>(p)) : -INFINITY));
    if (p == 0.0) pmf = (k == t) ? 1.0L : 0.0L;
    s += pmf * std::min(r, k);
  }
  return static_cast<double>(s);
}

// ---------------------------------------------------------------------------
// Transport LPs over ranks 0..M.

/// min sum pi_rs |r - s|, row sums a, column sums b.
inline double wasserstein_lp(const Vec& a, const Vec& b) {
  const std::size_t k = a.size();
  Vec c(k * k);
  Mat eq;
  Vec rhs;
  for (std::size_t r = 0; r < k; ++r)
    for (std::size_t s = 0; s < k; ++s) c[r * k + s] = std::abs(static_cast<double>(r) - static_cast<double>(s));
  for (std::size_t r = 0; r < k; ++r) {
    Vec row(k * k, 0.0);
    for (std::size_t s = 0; s < k; ++s) row[r * k + s] = 1.0;
    eq.push_back(row);
    rhs.push_back(a[r]);
  }
  for (std::size_t s = 0; s + 1 < k; ++s) {  // the last column constraint is implied
    Vec row(k * k, 0.0);
    for (std::size_t r = 0; r < k; ++r) row[r * k + s] = 1.0;
    eq.push_back(row);
    rhs.push_back(b[s]);
  }
  return simplex(c, {}, {}, eq, rhs, {}).value;
}

/// sup_u sum_r g_r u_r over 1-Lipschitz u (|u_r - u_s| <= |r - s|) with u_0 = 0.
inline double lipschitz_dual_lp(const Vec& g) {
  const std::size_t k = g.size();
  Vec c(k);
  for (std::size_t r = 0; r < k; ++r) c[r] = -g[r];
  Mat ub;
  Vec rhs;
  for (std::size_t r = 0; r < k; ++r)
    for (std::size_t s = 0; s < k; ++s) {
      if (r == s) continue;
      Vec row(k, 0.0);
      row[r] = 1.0;
      row[s] = -1.0;
      ub.push_back(row);
      rhs.push_back(std::abs(static_cast<double>(r) - static_cast<double>(s)));
    }
  Vec fix(k, 0.0);
  fix[0] = 1.0;
  const auto res = simplex(c, ub, rhs, {fix}, {0.0}, std::vector<bool>(k, true));
  return -res.value;
}

/// Extremum of sum_s q_s v_s over distributions q with W1(q, h) <= rho, via the
/// transport plan from h. `maximize` selects sup instead of inf.
inline double worst_case_transport(const Vec& h, const Vec& v, double rho, bool maximize) {
  const std::size_t k = h.size();
  Vec c(k * k);
  Mat eq;
  Vec eq_rhs;
  Vec budget(k * k);
  for (std::size_t r = 0; r < k; ++r)
    for (std::size_t s = 0; s < k; ++s) {
      c[r * k + s] = maximize ? -v[s] : v[s];
      budget[r * k + s] = std::abs(static_cast<double>(r) - static_cast<double>(s));
    }
  for (std::size_t r = 0; r < k; ++r) {
    Vec row(k * k, 0.0);
    for (std::size_t s = 0; s < k; ++s) row[r * k + s] = 1.0;
    eq.push_back(row);
    eq_rhs.push_back(h[r]);
  }
  const auto res = simplex(c, {budget}, {rho}, eq, eq_rhs, {});
  return maximize ? -res.value : res.value;
}

// ---------------------------------------------------------------------------
// Random helpers

inline Vec random_distribution(std::mt19937_64& rng, std::size_t k, double zero_prob = 0.0) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vec h(k, 0.0);
  double s = 0.0;
  for (auto& v : h) {
    v = u(rng) < zero_prob ? 0.0 : u(rng);
    s += v;
  }
  if (s == 0.0) {
    h[std::uniform_int_distribution<std::size_t>(0, k - 1)(rng)] = 1.0;
    return h;
  }
  for (auto& v : h) v /= s;
  return h;
}

/// Quarter-integer grid search for max sum_r h_r f_r(t_r) s.t. sum_r h_r t_r <= budget,
/// 0 <= t_r <= cap_r. Ranks with h_r = 0 stay at 0.
inline double grid_search(const Vec& h, const std::vector<int>& cap, double budget,
                          const std::function<double(int, double)>& f) {
  const std::size_t k = h.size();
  double best = -std::numeric_limits<double>::infinity();
  Vec t(k, 0.0);
  std::function<void(std::size_t, double, double)> rec = [&](std::size_t r, double spent, double value) {
    if (r == k) {
      best = std::max(best, value);
      return;
    }
    if (h[r] == 0.0) {
      rec(r + 1, spent, value);
      return;
    }
    for (int q = 0; q <= 4 * cap[r]; ++q) {
      const double tr = 0.25 * q;
      const double s = spent + h[r] * tr;
      if (s > budget + 1e-12) break;
      rec(r + 1, s, value + h[r] * f(static_cast<int>(r), tr));
    }
  };
  rec(0, 0.0, 0.0);
  return best;
}

}  // namespace oracle
