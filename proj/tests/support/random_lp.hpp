#pragma once

#include <random>

#include "drorecode/lp_solver.hpp"
#include "support/oracles.hpp"

namespace testlp {

using namespace drorecode;

inline CsrMatrix dense_to_csr(const oracle::Mat& a, std::size_t cols) {
  CsrMatrix m(cols);
  for (const auto& row : a) {
    std::vector<CsrMatrix::Entry> e;
    for (std::size_t j = 0; j < cols; ++j) e.push_back({j, row[j]});
    m.append_row(e);
  }
  return m;
}

/// Random LP min c^T x, A x <= b with a box keeping the feasible set bounded and
/// x = 0.5 strictly feasible.
struct RandomLp {
  oracle::Vec c;
  oracle::Mat a;
  oracle::Vec b;
  std::vector<bool> free;
};

inline RandomLp random_lp(std::mt19937_64& rng, std::size_t n, std::size_t m) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  RandomLp lp;
  lp.c.resize(n);
  for (auto& v : lp.c) v = u(rng);
  lp.free.resize(n);
  for (std::size_t j = 0; j < n; ++j) lp.free[j] = (rng() % 3) == 0;
  for (std::size_t i = 0; i < m; ++i) {
    oracle::Vec row(n);
    double at_half = 0.0;
    for (auto& v : row) {
      v = u(rng);
      at_half += 0.5 * v;
    }
    lp.a.push_back(row);
    lp.b.push_back(at_half + 0.1 + std::abs(u(rng)));
  }
  for (std::size_t j = 0; j < n; ++j) {
    oracle::Vec up(n, 0.0), down(n, 0.0);
    up[j] = 1.0;
    down[j] = -1.0;
    lp.a.push_back(up);
    lp.b.push_back(2.0 + std::abs(u(rng)));
    if (lp.free[j]) {
      lp.a.push_back(down);
      lp.b.push_back(2.0 + std::abs(u(rng)));
    }
  }
  return lp;
}

inline LpProblem to_problem(const RandomLp& r) {
  LpProblem p;
  p.cost = r.c;
  p.matrix = dense_to_csr(r.a, r.c.size());
  p.rhs = r.b;
  for (bool f : r.free) p.sign.push_back(f ? VarSign::Free : VarSign::NonNegative);
  return p;
}

}  // namespace testlp
