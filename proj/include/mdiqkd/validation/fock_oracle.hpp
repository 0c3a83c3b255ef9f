#pragma once

// Truncated Fock-space oracles for coherent-state leakage quantities.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

namespace mdiqkd::validation {

using cvec = Eigen::VectorXcd;
using cmat = Eigen::MatrixXcd;

/// Coherent state amp * e^{i phase} on Fock levels 0..dim-1, built by the
/// recurrence c_n = c_{n-1} alpha / sqrt(n).
inline cvec coherent_vector(double amp, double phase, int dim) {
  cvec v(dim);
  const std::complex<double> alpha = std::polar(amp, phase);
  v(0) = std::exp(-amp * amp / 2.0);
  for (int n = 1; n < dim; ++n) v(n) = v(n - 1) * alpha / std::sqrt(static_cast<double>(n));
  return v;
}

inline cvec kron(const cvec& a, const cvec& b) {
  cvec out(a.size() * b.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) out.segment(i * b.size(), b.size()) = a(i) * b;
  return out;
}

inline cvec kron_all(const std::vector<cvec>& parts) {
  if (parts.empty()) throw std::invalid_argument("kron_all: no factors");
  cvec out = parts.front();
  for (std::size_t i = 1; i < parts.size(); ++i) out = kron(out, parts[i]);
  return out;
}

/// Half trace norm of a Hermitian matrix from its spectrum.
inline double half_trace_norm(const cmat& h) {
  Eigen::SelfAdjointEigenSolver<cmat> es(h, Eigen::EigenvaluesOnly);
  return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

/// 1/2 || |a><a| - |b><b| ||_1 for normalized vectors, evaluated on the span of
/// the two vectors: orthonormalize, express both projectors there, diagonalize.
inline double pure_trace_distance(const cvec& a, const cvec& b) {
  const cvec e0 = a.normalized();
  cvec r = b - e0 * e0.dot(b);
  cmat basis(a.size(), 2);
  basis.col(0) = e0;
  const double rn = r.norm();
  if (rn < 1e-300) return 0.0;
  basis.col(1) = r / rn;
  const Eigen::Vector2cd ca = basis.adjoint() * a.normalized();
  const Eigen::Vector2cd cb = basis.adjoint() * b.normalized();
  const Eigen::Matrix2cd diff = ca * ca.adjoint() - cb * cb.adjoint();
  return half_trace_norm(diff);
}

/// Dense density-matrix version, for small spaces.
inline double dense_trace_distance(const cvec& a, const cvec& b) {
  const cmat rho = a * a.adjoint();
  const cmat sigma = b * b.adjoint();
  return half_trace_norm(rho - sigma);
}

/// One sender's reflected modes: IM amplitude/phase and, optionally, a PM mode.
struct ReflectedModes {
  double im_amp = 0.0;
  double im_phase = 0.0;
  bool has_pm = false;
  double pm_amp = 0.0;
  double pm_phase = 0.0;
};

inline cvec sender_vector(const ReflectedModes& r, int dim) {
  std::vector<cvec> parts{coherent_vector(r.im_amp, r.im_phase, dim)};
  if (r.has_pm) parts.push_back(coherent_vector(r.pm_amp, r.pm_phase, dim));
  return kron_all(parts);
}

/// Trace distance between two joint (Alice, Bob) reflections.
inline double joint_trace_distance(const ReflectedModes& a1, const ReflectedModes& b1, const ReflectedModes& a2,
                                   const ReflectedModes& b2, int dim) {
  return pure_trace_distance(kron(sender_vector(a1, dim), sender_vector(b1, dim)),
                             kron(sender_vector(a2, dim), sender_vector(b2, dim)));
}

/// Exact diagonal trace distance 1/2 sum |p - q| between product Poisson laws,
/// summed until both distributions have shed all but `tol` of their mass.
inline double poisson_product_distance(double ma, double mb, double ra, double rb, double tol = 1e-18) {
  auto pmf_series = [tol](double mean) {
    std::vector<double> p;
    double term = std::exp(-mean), mass = 0.0;
    for (int n = 0;; ++n) {
      if (n > 0) term *= mean / n;
      p.push_back(term);
      mass += term;
      if (n > mean && 1.0 - mass < tol) break;
      if (n > 4000) break;
    }
    return p;
  };
  auto pa = pmf_series(ma), pb = pmf_series(mb), qa = pmf_series(ra), qb = pmf_series(rb);
  const std::size_t na = std::max(pa.size(), qa.size()), nb = std::max(pb.size(), qb.size());
  pa.resize(na, 0.0);
  qa.resize(na, 0.0);
  pb.resize(nb, 0.0);
  qb.resize(nb, 0.0);
  double s = 0.0;
  for (std::size_t n = 0; n < na; ++n)
    for (std::size_t m = 0; m < nb; ++m) s += std::abs(pa[n] * pb[m] - qa[n] * qb[m]);
  return 0.5 * s;
}

/// Basis-coin imbalance from an explicit state vector: the probability of |-> on
/// the coin of (p_Z |0>|Z_A Z_B> + p_X |1>|X_A X_B>) / sqrt(p_Z^2 + p_X^2).
inline double coin_minus_probability(double p_Z, double p_X, const cvec& zA, const cvec& xA, const cvec& zB,
                                     const cvec& xB) {
  const cvec z = kron(zA, zB), x = kron(xA, xB);
  const double norm = std::sqrt(p_Z * p_Z + p_X * p_X);
  cvec coin0 = cvec::Zero(2), coin1 = cvec::Zero(2);
  coin0(0) = 1.0;
  coin1(1) = 1.0;
  const cvec psi = (p_Z * kron(coin0, z) + p_X * kron(coin1, x)) / norm;
  cvec minus(2);
  minus(0) = 1.0 / std::sqrt(2.0);
  minus(1) = -1.0 / std::sqrt(2.0);
  // Project the coin: (<-| x I) psi.
  const Eigen::Index d = z.size();
  const cvec proj = minus(0) * psi.head(d) + minus(1) * psi.tail(d);
  return proj.squaredNorm();
}

/// Four-intensity per-sender X-basis state with an ancilla tagging the decoy:
/// Z state |Phi_s>|s>|pm_Z>, X state sum_j sqrt(q_j) |j>|j-reflection>|pm_X>, with
/// <Phi_s|j> = sqrt(q_j) so that <Psi_Z|Psi_X> = sum_j q_j <s|j><pm_Z|pm_X>.
struct FourIntensitySender {
  cvec z;
  cvec x;
};

inline FourIntensitySender four_intensity_sender(const std::vector<double>& q, const std::vector<ReflectedModes>& decoys,
                                                 const ReflectedModes& signal, int dim) {
  const Eigen::Index k = static_cast<Eigen::Index>(q.size());
  cvec phi_s(k);
  for (Eigen::Index i = 0; i < k; ++i) phi_s(i) = std::sqrt(q[i]);
  FourIntensitySender out;
  out.z = kron(phi_s, sender_vector(signal, dim));
  out.x = cvec::Zero(out.z.size());
  for (Eigen::Index i = 0; i < k; ++i) {
    cvec tag = cvec::Zero(k);
    tag(i) = 1.0;
    out.x += std::sqrt(q[i]) * kron(tag, sender_vector(decoys[i], dim));
  }
  return out;
}

}  // namespace mdiqkd::validation
