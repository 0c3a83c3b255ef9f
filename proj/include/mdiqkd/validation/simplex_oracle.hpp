#pragma once

// Textbook two-phase dense tableau simplex with Bland's rule in extended
// precision. Upper bounds are explicit rows; nothing is shared with the
// production solver.

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "mdiqkd/lp.hpp"

namespace mdiqkd::validation {

struct OracleResult {
  LpStatus status = LpStatus::Infeasible;
  double objective = 0.0;
  std::vector<double> x;
};

namespace detail {

using real = long double;

class Tableau {
 public:
  // Rows 0..m-1 are constraints, row m is the objective (reduced costs); last column is the RHS.
  Tableau(int m, int n) : m_(m), n_(n), t_(static_cast<std::size_t>(m + 1) * (n + 1), 0.0L), basis_(m, -1) {}

  real& at(int i, int j) { return t_[static_cast<std::size_t>(i) * (n_ + 1) + j]; }
  real at(int i, int j) const { return t_[static_cast<std::size_t>(i) * (n_ + 1) + j]; }
  real& rhs(int i) { return at(i, n_); }
  int& basic(int i) { return basis_[i]; }
  int basic(int i) const { return basis_[i]; }
  int rows() const { return m_; }
  int cols() const { return n_; }

  void pivot(int r, int c) {
    const real p = at(r, c);
    for (int j = 0; j <= n_; ++j) at(r, j) /= p;
    for (int i = 0; i <= m_; ++i) {
      if (i == r) continue;
      const real f = at(i, c);
      if (f == 0.0L) continue;
      for (int j = 0; j <= n_; ++j) at(i, j) -= f * at(r, j);
    }
    basis_[r] = c;
  }

  /// Minimizes the objective row over columns allowed by `usable`. Returns false if unbounded.
  bool run(const std::vector<bool>& usable, double tol, double pivot_tol, int max_iter) {
    for (int it = 0; it < max_iter; ++it) {
      int enter = -1;
      for (int j = 0; j < n_; ++j)
        if (usable[j] && at(m_, j) < -tol) {
          enter = j;
          break;
        }
      if (enter < 0) return true;
      int leave = -1;
      real best = std::numeric_limits<real>::infinity();
      for (int i = 0; i < m_; ++i) {
        const real a = at(i, enter);
        if (a <= pivot_tol) continue;
        const real ratio = rhs(i) / a;
        if (ratio < best - 1e-15 || (leave >= 0 && std::abs(ratio - best) <= 1e-15 && basis_[i] < basis_[leave])) {
          best = ratio;
          leave = i;
        }
      }
      if (leave < 0) return false;
      pivot(leave, enter);
    }
    throw std::runtime_error("simplex oracle: iteration limit");
  }

 private:
  int m_, n_;
  std::vector<real> t_;
  std::vector<int> basis_;
};

}  // namespace detail

/// Solves the instance by substituting x = lo + (hi - lo) y with 0 <= y <= 1,
/// writing every bound and row side as a <= row, and running two phases.
inline OracleResult oracle_solve(const LpInstance& lp, double tol = 1e-17, double pivot_tol = 1e-12,
                                 int max_iter = 200000) {
  const int nv = lp.num_vars();
  std::vector<double> width(nv);
  for (int j = 0; j < nv; ++j) {
    if (!std::isfinite(lp.lo[j]) || !std::isfinite(lp.hi[j])) throw std::invalid_argument("simplex oracle needs finite boxes");
    width[j] = lp.hi[j] - lp.lo[j];
    if (width[j] < 0.0) return {};
  }

  using detail::real;
  struct LeRow {
    std::vector<real> a;
    real b;
  };
  std::vector<LeRow> le;
  for (const auto& row : lp.rows) {
    std::vector<real> a(nv, 0.0L);
    real shift = 0.0L;
    for (auto [j, c] : row.terms) {
      a[j] += static_cast<real>(c) * width[j];
      shift += static_cast<real>(c) * lp.lo[j];
    }
    real scale = 0.0L;
    for (real v : a) scale = std::max(scale, std::abs(v));
    if (scale == 0.0L) scale = 1.0L;
    if (std::isfinite(row.hi)) {
      LeRow r{a, (row.hi - shift) / scale};
      for (real& v : r.a) v /= scale;
      le.push_back(r);
    }
    if (std::isfinite(row.lo)) {
      LeRow r{a, -(row.lo - shift) / scale};
      for (real& v : r.a) v = -v / scale;
      le.push_back(r);
    }
  }
  for (int j = 0; j < nv; ++j) {
    LeRow r{std::vector<real>(nv, 0.0L), 1.0L};
    r.a[j] = 1.0L;
    le.push_back(r);
  }

  const int m = static_cast<int>(le.size());
  std::vector<int> art_row;
  for (int i = 0; i < m; ++i)
    if (le[i].b < 0.0) art_row.push_back(i);
  const int na = static_cast<int>(art_row.size());
  const int n = nv + m + na;  // structural, slack, artificial
  detail::Tableau T(m, n);
  int k = 0;
  for (int i = 0; i < m; ++i) {
    const real sgn = le[i].b < 0.0L ? -1.0L : 1.0L;
    for (int j = 0; j < nv; ++j) T.at(i, j) = sgn * le[i].a[j];
    T.at(i, nv + i) = sgn;
    T.rhs(i) = sgn * le[i].b;
    if (sgn < 0.0L) {
      T.at(i, nv + m + k) = 1.0;
      T.basic(i) = nv + m + k;
      ++k;
    } else {
      T.basic(i) = nv + i;
    }
  }

  std::vector<bool> usable(n, true);
  if (na > 0) {
    for (int j = 0; j <= n; ++j) T.at(m, j) = 0.0;
    for (int a = 0; a < na; ++a) T.at(m, nv + m + a) = 1.0;
    for (int i : art_row)
      for (int j = 0; j <= n; ++j) T.at(m, j) -= T.at(i, j);
    if (!T.run(usable, tol, pivot_tol, max_iter)) throw std::runtime_error("simplex oracle: phase one unbounded");
    if (-T.rhs(m) > 1e-9) return {};
    for (int i = 0; i < m; ++i) {
      if (T.basic(i) < nv + m) continue;
      for (int j = 0; j < nv + m; ++j)
        if (std::abs(T.at(i, j)) > 1e-9) {
          T.pivot(i, j);
          break;
        }
    }
    for (int a = 0; a < na; ++a) usable[nv + m + a] = false;
  }

  const real dir = lp.sense == LpSense::Maximize ? -1.0L : 1.0L;
  for (int j = 0; j <= n; ++j) T.at(m, j) = 0.0;
  for (int j = 0; j < nv; ++j) T.at(m, j) = dir * lp.cost[j] * width[j];
  for (int i = 0; i < m; ++i) {
    const int b = T.basic(i);
    const detail::real f = T.at(m, b);
    if (f == 0.0L) continue;
    for (int j = 0; j <= n; ++j) T.at(m, j) -= f * T.at(i, j);
  }
  OracleResult out;
  if (!T.run(usable, tol, pivot_tol, max_iter)) {
    out.status = LpStatus::Unbounded;
    return out;
  }
  std::vector<detail::real> y(nv, 0.0L);
  for (int i = 0; i < m; ++i)
    if (T.basic(i) < nv) y[T.basic(i)] = T.rhs(i);
  out.x.resize(nv);
  detail::real obj = lp.cost_offset;
  for (int j = 0; j < nv; ++j) {
    const detail::real xj = static_cast<detail::real>(lp.lo[j]) + static_cast<detail::real>(width[j]) * y[j];
    out.x[j] = static_cast<double>(xj);
    obj += static_cast<detail::real>(lp.cost[j]) * xj;
  }
  out.objective = static_cast<double>(obj);
  out.status = LpStatus::Optimal;
  return out;
}

}  // namespace mdiqkd::validation
