#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace mdiqkd {

enum class LpSense { Minimize, Maximize };
enum class LpStatus { Optimal, Infeasible, Unbounded, IterationLimit };

inline const char* to_string(LpStatus s) {
  switch (s) {
    case LpStatus::Optimal: return "optimal";
    case LpStatus::Infeasible: return "infeasible";
    case LpStatus::Unbounded: return "unbounded";
    case LpStatus::IterationLimit: return "iteration-limit";
  }
  return "?";
}

/// Linear program with boxed variables and ranged rows: lo <= a.x <= hi.
struct LpInstance {
  static constexpr double kInf = std::numeric_limits<double>::infinity();

  struct Row {
    std::string name;
    std::vector<std::pair<int, double>> terms;
    double lo = -kInf;
    double hi = kInf;
  };

  LpSense sense = LpSense::Minimize;
  std::vector<std::string> names;
  std::vector<double> cost;
  std::vector<double> lo;
  std::vector<double> hi;
  std::vector<Row> rows;
  double cost_offset = 0.0;

  int add_var(std::string name, double lower, double upper, double c = 0.0) {
    names.push_back(std::move(name));
    lo.push_back(lower);
    hi.push_back(upper);
    cost.push_back(c);
    return static_cast<int>(names.size()) - 1;
  }
  int num_vars() const { return static_cast<int>(names.size()); }

  double objective_at(const std::vector<double>& x) const {
    double v = cost_offset;
    for (std::size_t j = 0; j < x.size(); ++j) v += cost[j] * x[j];
    return v;
  }
};

struct LpResult {
  LpStatus status = LpStatus::Infeasible;
  double objective = 0.0;
  std::vector<double> x;
  int iterations = 0;
};

struct SimplexOptions {
  int max_iterations = 20000;
  int degenerate_switch = 40;  // consecutive degenerate pivots before Bland's rule
  double pivot_tol = 1e-11;
  double optimality_tol = 1e-14;
  double feasibility_tol = 1e-9;
};

namespace detail {

/// Bounded-variable primal simplex on the scaled equality form T y = beta, 0 <= y <= ub.
class BoundedSimplex {
 public:
  BoundedSimplex(int m, int n) : m_(m), n_(n), T_(static_cast<std::size_t>(m) * n, 0.0), ub_(n, 0.0),
                                 at_upper_(n, false), basis_(m, -1), beta_(m, 0.0) {}

  double& a(int i, int j) { return T_[static_cast<std::size_t>(i) * n_ + j]; }
  double a(int i, int j) const { return T_[static_cast<std::size_t>(i) * n_ + j]; }

  int m_, n_;
  std::vector<double> T_;
  std::vector<double> ub_;
  std::vector<bool> at_upper_;
  std::vector<int> basis_;
  std::vector<double> beta_;
  int iterations = 0;

  void pivot(int r, int j) {
    const double p = a(r, j);
    for (int k = 0; k < n_; ++k) a(r, k) /= p;
    for (int i = 0; i < m_; ++i) {
      if (i == r) continue;
      const double f = a(i, j);
      if (f == 0.0) continue;
      for (int k = 0; k < n_; ++k) a(i, k) -= f * a(r, k);
      a(i, j) = 0.0;
    }
    a(r, j) = 1.0;
  }

  double nonbasic_value(int j) const { return at_upper_[j] ? ub_[j] : 0.0; }

  LpStatus run(const std::vector<double>& c, const SimplexOptions& opt) {
    std::vector<bool> is_basic(n_, false);
    for (int b : basis_) is_basic[b] = true;
    int degenerate = 0;
    std::vector<double> d(n_);
    while (true) {
      if (iterations >= opt.max_iterations) return LpStatus::IterationLimit;
      for (int j = 0; j < n_; ++j) {
        if (is_basic[j]) {
          d[j] = 0.0;
          continue;
        }
        double v = c[j];
        for (int i = 0; i < m_; ++i) v -= c[basis_[i]] * a(i, j);
        d[j] = v;
      }
      const bool bland = degenerate >= opt.degenerate_switch;
      int enter = -1;
      double best = 0.0;
      for (int j = 0; j < n_; ++j) {
        if (is_basic[j] || ub_[j] == 0.0) continue;
        const double gain = at_upper_[j] ? d[j] : -d[j];
        if (gain <= opt.optimality_tol) continue;
        if (bland) {
          enter = j;
          break;
        }
        if (gain > best) {
          best = gain;
          enter = j;
        }
      }
      if (enter < 0) return LpStatus::Optimal;

      const double dir = at_upper_[enter] ? -1.0 : 1.0;
      double t = ub_[enter];
      int leave = -1;
      bool leave_to_upper = false;
      for (int i = 0; i < m_; ++i) {
        const double alpha = dir * a(i, enter);
        if (std::abs(alpha) <= opt.pivot_tol) continue;
        const int b = basis_[i];
        double lim;
        bool to_upper;
        if (alpha > 0.0) {
          lim = std::max(beta_[i], 0.0) / alpha;
          to_upper = false;
        } else {
          if (!std::isfinite(ub_[b])) continue;
          lim = std::max(ub_[b] - beta_[i], 0.0) / -alpha;
          to_upper = true;
        }
        const bool tie = leave >= 0 && lim <= t + 1e-15 &&
                         (bland ? b < basis_[leave] : std::abs(alpha) > std::abs(dir * a(leave, enter)));
        if (lim < t - 1e-15 || tie) {
          t = lim;
          leave = i;
          leave_to_upper = to_upper;
        }
      }
      if (!std::isfinite(t)) return LpStatus::Unbounded;
      ++iterations;
      degenerate = (t <= 1e-14) ? degenerate + 1 : 0;

      for (int i = 0; i < m_; ++i) beta_[i] -= dir * t * a(i, enter);
      if (leave < 0) {
        at_upper_[enter] = !at_upper_[enter];
        continue;
      }
      const double entering_value = at_upper_[enter] ? ub_[enter] - t : t;
      const int out = basis_[leave];
      pivot(leave, enter);
      basis_[leave] = enter;
      beta_[leave] = entering_value;
      is_basic[out] = false;
      is_basic[enter] = true;
      at_upper_[out] = leave_to_upper;
      at_upper_[enter] = false;
    }
  }
};

/// Recomputes the basic values of an optimal basis from the unpivoted rows in
/// extended precision. Leaves `y` untouched and returns false when the basis
/// matrix is numerically singular.
inline bool refine_basic(const std::vector<double>& A0, const std::vector<double>& rhs0, int m, int n,
                         const std::vector<int>& basis, std::vector<double>& y) {
  using real = long double;
  std::vector<bool> is_basic(n, false);
  for (int b : basis) is_basic[b] = true;
  std::vector<real> M(static_cast<std::size_t>(m) * m), r(m);
  for (int i = 0; i < m; ++i) {
    real v = rhs0[i];
    for (int k = 0; k < n; ++k)
      if (!is_basic[k] && y[k] != 0.0) v -= static_cast<real>(A0[static_cast<std::size_t>(i) * n + k]) * y[k];
    r[i] = v;
    for (int c = 0; c < m; ++c) M[static_cast<std::size_t>(i) * m + c] = A0[static_cast<std::size_t>(i) * n + basis[c]];
  }
  std::vector<int> perm(m);
  for (int i = 0; i < m; ++i) perm[i] = i;
  for (int c = 0; c < m; ++c) {
    int piv = c;
    for (int i = c + 1; i < m; ++i)
      if (std::abs(M[static_cast<std::size_t>(i) * m + c]) > std::abs(M[static_cast<std::size_t>(piv) * m + c])) piv = i;
    if (std::abs(M[static_cast<std::size_t>(piv) * m + c]) < 1e-13L) return false;
    if (piv != c) {
      for (int k = 0; k < m; ++k) std::swap(M[static_cast<std::size_t>(piv) * m + k], M[static_cast<std::size_t>(c) * m + k]);
      std::swap(r[piv], r[c]);
    }
    for (int i = c + 1; i < m; ++i) {
      const real f = M[static_cast<std::size_t>(i) * m + c] / M[static_cast<std::size_t>(c) * m + c];
      if (f == 0.0L) continue;
      for (int k = c; k < m; ++k) M[static_cast<std::size_t>(i) * m + k] -= f * M[static_cast<std::size_t>(c) * m + k];
      r[i] -= f * r[c];
    }
  }
  std::vector<real> sol(m);
  for (int c = m - 1; c >= 0; --c) {
    real v = r[c];
    for (int k = c + 1; k < m; ++k) v -= M[static_cast<std::size_t>(c) * m + k] * sol[k];
    sol[c] = v / M[static_cast<std::size_t>(c) * m + c];
  }
  for (int c = 0; c < m; ++c) y[basis[c]] = static_cast<double>(sol[c]);
  return true;
}

}  // namespace detail

/// Two-phase bounded-variable simplex. Columns are rescaled to unit boxes and
/// rows to unit max coefficient before solving; results are reported in the
/// original units with the objective recomputed from the returned point.
inline LpResult solve_lp(const LpInstance& lp, const SimplexOptions& opt = {}) {
  const int nv = lp.num_vars();
  const int m = static_cast<int>(lp.rows.size());
  const int ns = nv + m;  // structural plus one slack per row
  const int ncols = ns + m;

  // x = shift + scale * y, y in [0, ub].
  std::vector<double> shift(ns), scale(ns), ub(ns);
  auto map_bounds = [&](int k, double lo, double hi) {
    if (lo > hi) return false;
    if (std::isfinite(lo) && std::isfinite(hi)) {
      shift[k] = lo;
      const double w = hi - lo;
      scale[k] = w > 0.0 ? w : 1.0;
      ub[k] = w > 0.0 ? 1.0 : 0.0;
    } else if (std::isfinite(lo)) {
      shift[k] = lo;
      scale[k] = 1.0;
      ub[k] = LpInstance::kInf;
    } else if (std::isfinite(hi)) {
      shift[k] = hi;
      scale[k] = -1.0;
      ub[k] = LpInstance::kInf;
    } else {
      shift[k] = 0.0;
      scale[k] = 1.0;
      ub[k] = LpInstance::kInf;
      return false;
    }
    return true;
  };
  LpResult result;
  for (int j = 0; j < nv; ++j)
    if (!map_bounds(j, lp.lo[j], lp.hi[j])) return result;
  for (int i = 0; i < m; ++i)
    if (!map_bounds(nv + i, lp.rows[i].lo, lp.rows[i].hi)) return result;

  detail::BoundedSimplex sx(m, ncols);
  std::vector<double> b(m, 0.0);
  for (int i = 0; i < m; ++i) {
    double rhs = shift[nv + i];
    for (auto [j, v] : lp.rows[i].terms) {
      sx.a(i, j) += v * scale[j];
      rhs -= v * shift[j];
    }
    sx.a(i, nv + i) = -scale[nv + i];
    double big = 0.0;
    for (int k = 0; k < ns; ++k) big = std::max(big, std::abs(sx.a(i, k)));
    if (big > 0.0) {
      for (int k = 0; k < ns; ++k) sx.a(i, k) /= big;
      rhs /= big;
    }
    b[i] = rhs;
  }
  for (int k = 0; k < ns; ++k) sx.ub_[k] = ub[k];
  for (int i = 0; i < m; ++i) {
    const int art = ns + i;
    const double sign = b[i] >= 0.0 ? 1.0 : -1.0;
    // Row i reads sum T y + sign * art = b; normalize so the artificial has coefficient 1.
    for (int k = 0; k < ns; ++k) sx.a(i, k) *= sign;
    sx.a(i, art) = 1.0;
    sx.ub_[art] = LpInstance::kInf;
    sx.basis_[i] = art;
    sx.beta_[i] = std::abs(b[i]);
  }
  const std::vector<double> A0 = sx.T_;
  const std::vector<double> rhs0 = sx.beta_;

  std::vector<double> c1(ncols, 0.0);
  for (int i = 0; i < m; ++i) c1[ns + i] = 1.0;
  LpStatus st = sx.run(c1, opt);
  result.iterations = sx.iterations;
  if (st == LpStatus::IterationLimit) {
    result.status = st;
    return result;
  }
  double infeas = 0.0;
  for (int i = 0; i < m; ++i)
    if (sx.basis_[i] >= ns) infeas += sx.beta_[i];
  if (infeas > opt.feasibility_tol) {
    result.status = LpStatus::Infeasible;
    return result;
  }
  // Drive remaining artificials out where possible, then pin all artificials at zero.
  for (int i = 0; i < m; ++i) {
    if (sx.basis_[i] < ns) continue;
    int best = -1;
    double mag = 1e-9;
    for (int k = 0; k < ns; ++k) {
      if (std::find(sx.basis_.begin(), sx.basis_.end(), k) != sx.basis_.end()) continue;
      if (std::abs(sx.a(i, k)) > mag) {
        mag = std::abs(sx.a(i, k));
        best = k;
      }
    }
    if (best < 0) continue;
    const int out = sx.basis_[i];
    const double value = sx.nonbasic_value(best);
    sx.pivot(i, best);
    sx.basis_[i] = best;
    sx.beta_[i] = value;
    sx.at_upper_[out] = false;
    sx.at_upper_[best] = false;
  }
  for (int i = 0; i < m; ++i) sx.ub_[ns + i] = 0.0;

  std::vector<double> c2(ncols, 0.0);
  const double sgn = lp.sense == LpSense::Minimize ? 1.0 : -1.0;
  for (int j = 0; j < nv; ++j) c2[j] = sgn * lp.cost[j] * scale[j];
  double cmax = 0.0;
  for (double v : c2) cmax = std::max(cmax, std::abs(v));
  if (cmax > 0.0)
    for (double& v : c2) v /= cmax;
  st = sx.run(c2, opt);
  result.iterations = sx.iterations;
  result.status = st;
  if (st != LpStatus::Optimal) return result;

  std::vector<double> y(ncols, 0.0);
  for (int k = 0; k < ncols; ++k) y[k] = sx.nonbasic_value(k);
  for (int i = 0; i < m; ++i) y[sx.basis_[i]] = sx.beta_[i];
  std::vector<double> refined = y;
  if (detail::refine_basic(A0, rhs0, m, ncols, sx.basis_, refined)) {
    bool inside = true;
    for (int i = 0; i < m; ++i) {
      const int k = sx.basis_[i];
      inside = inside && refined[k] >= -opt.feasibility_tol && refined[k] <= sx.ub_[k] + opt.feasibility_tol;
    }
    if (inside) y = refined;
  }
  result.x.resize(nv);
  for (int j = 0; j < nv; ++j) {
    double v = shift[j] + scale[j] * std::clamp(y[j], 0.0, ub[j]);
    result.x[j] = std::clamp(v, lp.lo[j], lp.hi[j]);
  }
  result.objective = lp.objective_at(result.x);
  return result;
}

/// Maximum violation of row and variable bounds at x, relative to row magnitude.
inline double lp_max_violation(const LpInstance& lp, const std::vector<double>& x) {
  double worst = 0.0;
  for (int j = 0; j < lp.num_vars(); ++j) {
    worst = std::max(worst, lp.lo[j] - x[j]);
    worst = std::max(worst, x[j] - lp.hi[j]);
  }
  for (const auto& row : lp.rows) {
    double v = 0.0, mag = 0.0;
    for (auto [j, c] : row.terms) {
      v += c * x[j];
      mag = std::max(mag, std::abs(c * x[j]));
    }
    mag = std::max({mag, std::isfinite(row.lo) ? std::abs(row.lo) : 0.0, std::isfinite(row.hi) ? std::abs(row.hi) : 0.0,
                    1e-300});
    worst = std::max(worst, (row.lo - v) / mag);
    worst = std::max(worst, (v - row.hi) / mag);
  }
  return worst;
}

/// Human-readable LP listing in a CPLEX-like layout.
inline std::string to_lp_text(const LpInstance& lp) {
  std::ostringstream os;
  os.precision(17);
  os << (lp.sense == LpSense::Minimize ? "Minimize" : "Maximize") << "\n obj:";
  if (lp.cost_offset != 0.0) os << ' ' << lp.cost_offset;
  for (int j = 0; j < lp.num_vars(); ++j)
    if (lp.cost[j] != 0.0) os << (lp.cost[j] < 0 ? " - " : " + ") << std::abs(lp.cost[j]) << ' ' << lp.names[j];
  os << "\nSubject To\n";
  for (const auto& row : lp.rows) {
    os << ' ' << row.name << ": ";
    if (std::isfinite(row.lo)) os << row.lo << " <=";
    for (auto [j, c] : row.terms) os << (c < 0 ? " - " : " + ") << std::abs(c) << ' ' << lp.names[j];
    if (std::isfinite(row.hi)) os << " <= " << row.hi;
    os << '\n';
  }
  os << "Bounds\n";
  for (int j = 0; j < lp.num_vars(); ++j) os << ' ' << lp.lo[j] << " <= " << lp.names[j] << " <= " << lp.hi[j] << '\n';
  os << "End\n";
  return os.str();
}

}  // namespace mdiqkd
