#pragma once

// Dense discretizations of
//   M_c  = D^alpha + c - Q_c,
//   L(k) = -d_x M_c d_x + k^2,
//   B(k) = A^{-1} L(k),  A = -d_x  (mean-zero subspace),
// their spectra, transverse growth rates and the numeric certificate for
// the hypotheses of the transverse instability criterion.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "fkp/errors.hpp"
#include "fkp/fft.hpp"
#include "fkp/ground_state.hpp"
#include "fkp/params.hpp"
#include "fkp/spectral_core.hpp"

namespace fkp {

enum class OperatorTag { Mc, L_of_k, B_of_k };

struct OperatorMatrix {
  OperatorTag tag = OperatorTag::Mc;
  double k = 0.0;
  Eigen::MatrixXd matrix;
  FkpParams params;
  Grid1D grid;
  /// ||M - M^T||_max / ||M||_max before symmetrization (0 for B).
  double asymmetry = 0.0;
};

namespace detail {

/// Applies a real Fourier multiplier table (length n, full spectrum) to v.
inline Eigen::VectorXd apply_multiplier(const Grid1D& g, const std::vector<cplx>& mult,
                                        const Eigen::VectorXd& v) {
  const std::size_t n = g.size();
  auto& fft = fft1d(n);
  std::vector<cplx> a(n), b(n);
  for (std::size_t j = 0; j < n; ++j) a[j] = v[static_cast<Eigen::Index>(j)];
  fft.forward(a, b);
  for (std::size_t j = 0; j < n; ++j) b[j] *= mult[j];
  fft.backward(b, a);
  Eigen::VectorXd out(static_cast<Eigen::Index>(n));
  for (std::size_t j = 0; j < n; ++j) out[static_cast<Eigen::Index>(j)] = a[j].real();
  return out;
}

inline std::vector<cplx> dx_multiplier(const Grid1D& g) {
  std::vector<cplx> m(g.size());
  for (std::size_t j = 0; j < g.size(); ++j) m[j] = g.is_nyquist(j) ? 0.0 : cplx(0.0, g.k(j));
  return m;
}

/// 1/(-i k) off k = 0 and Nyquist.
inline std::vector<cplx> ainv_multiplier(const Grid1D& g) {
  std::vector<cplx> m(g.size());
  for (std::size_t j = 0; j < g.size(); ++j)
    m[j] = (j == 0 || g.is_nyquist(j)) ? 0.0 : cplx(0.0, 1.0 / g.k(j));
  return m;
}

inline std::vector<cplx> riesz_multiplier(const Grid1D& g, double alpha) {
  std::vector<cplx> m(g.size());
  for (std::size_t j = 0; j < g.size(); ++j) m[j] = j == 0 ? 0.0 : std::pow(std::abs(g.k(j)), alpha);
  return m;
}

template <class Apply>
Eigen::MatrixXd assemble(std::size_t n, Apply&& apply) {
  const auto N = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd m(N, N);
  Eigen::VectorXd e = Eigen::VectorXd::Zero(N);
  for (Eigen::Index j = 0; j < N; ++j) {
    e[j] = 1.0;
    m.col(j) = apply(e);
    e[j] = 0.0;
  }
  return m;
}

inline double symmetrize(Eigen::MatrixXd& m) {
  const double scale = m.cwiseAbs().maxCoeff();
  const double defect = (m - m.transpose()).cwiseAbs().maxCoeff();
  m = 0.5 * (m + m.transpose()).eval();
  return scale > 0.0 ? defect / scale : 0.0;
}

/// Orthonormal real Fourier basis of the mean-zero subspace (modes
/// 1..n/2-1, cosine and sine columns), n x (n-2).
inline Eigen::MatrixXd mean_zero_basis(const Grid1D& g) {
  const std::size_t n = g.size();
  const auto N = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd p(N, N - 2);
  const double s = std::sqrt(2.0 / static_cast<double>(n));
  for (std::size_t m = 1; m < n / 2; ++m)
    for (std::size_t j = 0; j < n; ++j) {
      const double th = 2.0 * pi * static_cast<double>(m * j) / static_cast<double>(n);
      p(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(2 * (m - 1))) = s * std::cos(th);
      p(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(2 * m - 1)) = s * std::sin(th);
    }
  return p;
}

}  // namespace detail

inline Eigen::VectorXd to_vector(const RealField1D& u) {
  return Eigen::Map<const Eigen::VectorXd>(u.values.data(), static_cast<Eigen::Index>(u.values.size()));
}

/// Assembles M_c, L(k) or B(k) for the profile q (sampled on its own grid).
inline OperatorMatrix build_operator_matrix(OperatorTag tag, const RealField1D& q,
                                            const FkpParams& params, double k = 0.0) {
  params.validate();
  if (tag != OperatorTag::Mc && !(k >= 0.0)) throw PreconditionError("k must be >= 0");
  require_finite(q.values, "build_operator_matrix");
  const auto& g = q.grid;
  const std::size_t n = g.size();
  const auto riesz = detail::riesz_multiplier(g, params.alpha);
  const auto dx = detail::dx_multiplier(g);
  const Eigen::VectorXd pot = params.c - to_vector(q).array();
  auto mc = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
    return detail::apply_multiplier(g, riesz, v) + pot.cwiseProduct(v);
  };

  OperatorMatrix out{tag, k, {}, params, g, 0.0};
  if (tag == OperatorTag::Mc) {
    out.matrix = detail::assemble(n, mc);
    out.asymmetry = detail::symmetrize(out.matrix);
    return out;
  }
  Eigen::MatrixXd l = detail::assemble(n, [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
    return -detail::apply_multiplier(g, dx, mc(detail::apply_multiplier(g, dx, v)));
  });
  out.asymmetry = detail::symmetrize(l);
  l.diagonal().array() += k * k;
  if (tag == OperatorTag::L_of_k) {
    out.matrix = std::move(l);
    return out;
  }
  const auto ainv = detail::ainv_multiplier(g);
  const Eigen::MatrixXd p = detail::mean_zero_basis(g);
  Eigen::MatrixXd al(l.rows(), l.cols());
  for (Eigen::Index j = 0; j < l.cols(); ++j) al.col(j) = detail::apply_multiplier(g, ainv, l.col(j));
  out.matrix = p.transpose() * al * p;
  out.asymmetry = 0.0;
  return out;
}

inline OperatorMatrix build_operator_matrix(OperatorTag tag, const GroundState& gs, double k = 0.0) {
  return build_operator_matrix(tag, gs.profile, gs.params, k);
}

struct SpectrumReport {
  Eigen::VectorXd eigenvalues;  // ascending
  Eigen::MatrixXd eigenvectors;  // empty unless requested
  double norm = 0.0;             // spectral norm
  double tol_neg = 0.0;
  int negative_count = 0;
  double lambda_min = 0.0;
  std::optional<double> omega0;  // for L(0) with a negative eigenvalue
};

inline SpectrumReport symmetric_spectrum(const OperatorMatrix& op, bool vectors = false) {
  if (op.tag == OperatorTag::B_of_k) throw PreconditionError("symmetric_spectrum: B(k) is not symmetric");
  const double scale = op.matrix.cwiseAbs().maxCoeff();
  if ((op.matrix - op.matrix.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
    throw PreconditionError("symmetric_spectrum: matrix not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
      op.matrix, vectors ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw ConvergenceError("symmetric eigensolver failed");
  SpectrumReport r;
  r.eigenvalues = es.eigenvalues();
  if (vectors) r.eigenvectors = es.eigenvectors();
  r.norm = std::max(std::abs(r.eigenvalues[0]), std::abs(r.eigenvalues[r.eigenvalues.size() - 1]));
  r.tol_neg = 1e-8 * r.norm;
  for (Eigen::Index j = 0; j < r.eigenvalues.size(); ++j)
    if (r.eigenvalues[j] < -r.tol_neg) ++r.negative_count;
  r.lambda_min = r.eigenvalues[0];
  if (op.tag == OperatorTag::L_of_k && op.k == 0.0 && r.lambda_min < -r.tol_neg)
    r.omega0 = std::sqrt(-r.lambda_min);
  return r;
}

// ---------------------------------------------------------------------------
// Independent check of the lowest eigenvalue

/// Number of eigenvalues of the symmetric matrix a below mu (Sylvester inertia).
inline int eigenvalues_below(const Eigen::MatrixXd& a, double mu) {
  Eigen::MatrixXd s = a;
  s.diagonal().array() -= mu;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(s);
  int count = 0;
  for (Eigen::Index j = 0; j < ldlt.vectorD().size(); ++j)
    if (ldlt.vectorD()[j] < 0.0) ++count;
  return count;
}

struct InversePowerResult {
  double eigenvalue = 0.0;
  Eigen::VectorXd vector;
  int iterations = 0;
};

/// Lowest eigenvalue by inertia bisection on [Gershgorin bound, 0], refined
/// by shifted inverse iteration and a final Rayleigh quotient.
inline InversePowerResult lowest_eigenpair_inverse_power(const Eigen::MatrixXd& a, int bisections = 40,
                                                         int max_iterations = 200) {
  double lo = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    lo = std::min(lo, a(i, i) - (a.row(i).cwiseAbs().sum() - std::abs(a(i, i))));
  double hi = 0.0;
  if (eigenvalues_below(a, hi) == 0) throw PreconditionError("inverse power: no negative eigenvalue");
  for (int i = 0; i < bisections; ++i) {
    const double mid = 0.5 * (lo + hi);
    (eigenvalues_below(a, mid) >= 1 ? hi : lo) = mid;
  }
  const double shift = lo - 1e-3 * (hi - lo) - 1e-14 * std::abs(lo);
  Eigen::MatrixXd s = a;
  s.diagonal().array() -= shift;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(s);
  Eigen::VectorXd v = Eigen::VectorXd::Ones(a.rows()).normalized();
  InversePowerResult r;
  double prev = 0.0;
  for (r.iterations = 1; r.iterations <= max_iterations; ++r.iterations) {
    v = lu.solve(v).normalized();
    const double rq = v.dot(a * v);
    if (r.iterations > 1 && std::abs(rq - prev) <= 1e-13 * std::max(1.0, std::abs(rq))) break;
    prev = rq;
  }
  r.vector = v;
  r.eigenvalue = v.dot(a * v);
  return r;
}

// ---------------------------------------------------------------------------
// Parity-restricted L

/// Columns spanning grid functions odd (or even) about x = 0: n x (n/2 - 1)
/// for odd, n x (n/2 + 1) for even, orthonormal.
inline Eigen::MatrixXd parity_basis(const Grid1D& g, bool odd) {
  const std::size_t n = g.size(), c = g.center_index();
  const auto N = static_cast<Eigen::Index>(n);
  const double r = 1.0 / std::sqrt(2.0);
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(N, static_cast<Eigen::Index>(odd ? n / 2 - 1 : n / 2 + 1));
  for (std::size_t m = 1; m < n / 2; ++m) {
    const auto col = static_cast<Eigen::Index>(odd ? m - 1 : m);
    p(static_cast<Eigen::Index>(c + m), col) = r;
    p(static_cast<Eigen::Index>(c - m), col) = odd ? -r : r;
  }
  if (!odd) {
    p(static_cast<Eigen::Index>(c), 0) = 1.0;
    p(0, static_cast<Eigen::Index>(n / 2)) = 1.0;
  }
  return p;
}

struct ParityEigenpair {
  double lambda = 0.0;
  /// Grid function with unit discrete L^2 norm (dx sum v^2 = 1).
  RealField1D eigenfunction;
};

/// Lowest eigenpair of L restricted to odd grid functions; sign fixed by a
/// positive slope at x = 0.
inline ParityEigenpair odd_subspace_lowest(const OperatorMatrix& l) {
  if (l.tag != OperatorTag::L_of_k) throw PreconditionError("odd_subspace_lowest expects L(k)");
  const auto p = parity_basis(l.grid, true);
  const Eigen::MatrixXd r = p.transpose() * l.matrix * p;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(r);
  if (es.info() != Eigen::Success) throw ConvergenceError("odd-subspace eigensolver failed");
  Eigen::VectorXd v = p * es.eigenvectors().col(0);
  v /= std::sqrt(l.grid.dx() * v.squaredNorm());
  RealField1D chi(l.grid, std::vector<double>(v.data(), v.data() + v.size()));
  if (detail::interpolant_slope(l.grid, dft(chi), 0.0) < 0.0)
    for (double& x : chi.values) x = -x;
  return {es.eigenvalues()[0] - l.k * l.k, chi};
}

// ---------------------------------------------------------------------------
// Transverse growth rates

struct BSpectrum {
  Eigen::VectorXcd eigenvalues;
  double growth_rate = 0.0;
  /// max over eigenvalues mu of the distance from -mu and conj(mu) to the spectrum.
  double symmetry_defect = 0.0;
};

inline BSpectrum b_spectrum(const RealField1D& q, const FkpParams& params, double k) {
  if (!(k > 0.0)) throw PreconditionError("growth_rate: k must be positive");
  const auto b = build_operator_matrix(OperatorTag::B_of_k, q, params, k);
  Eigen::EigenSolver<Eigen::MatrixXd> es(b.matrix, false);
  if (es.info() != Eigen::Success) throw ConvergenceError("nonsymmetric eigensolver failed");
  BSpectrum r;
  r.eigenvalues = es.eigenvalues();
  const auto& ev = r.eigenvalues;
  r.growth_rate = ev.real().maxCoeff();
  auto distance = [&](cplx z) {
    double d = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < ev.size(); ++j) d = std::min(d, std::abs(ev[j] - z));
    return d;
  };
  for (Eigen::Index j = 0; j < ev.size(); ++j)
    r.symmetry_defect = std::max({r.symmetry_defect, distance(-ev[j]), distance(std::conj(ev[j]))});
  return r;
}

inline double growth_rate(const RealField1D& q, const FkpParams& params, double k) {
  return b_spectrum(q, params, k).growth_rate;
}

inline double growth_rate(const GroundState& gs, double k) { return growth_rate(gs.profile, gs.params, k); }

struct InstabilityCertificate {
  double symmetry_residual = 0.0;
  double min_eig_above_omega0 = 0.0;   // at k = omega0 (1 + eps)
  double shift_identity_defect = 0.0;  // relative to ||L||
  int negative_count = 0;
  double lambda = 0.0;
  double omega0 = 0.0;
  bool passes() const {
    return symmetry_residual <= 1e-10 && min_eig_above_omega0 > 0.0 &&
           shift_identity_defect <= 1e-10 && negative_count == 1;
  }
};

struct GrowthRateCurve {
  std::vector<double> k;
  std::vector<double> sigma_max;
  InstabilityCertificate certificate;
};

inline InstabilityCertificate instability_certificate(const RealField1D& q, const FkpParams& params,
                                                      double eps = 0.05) {
  const auto l0 = build_operator_matrix(OperatorTag::L_of_k, q, params, 0.0);
  const auto s0 = symmetric_spectrum(l0);
  InstabilityCertificate c;
  c.symmetry_residual = l0.asymmetry;
  c.negative_count = s0.negative_count;
  c.lambda = s0.lambda_min;
  if (!s0.omega0) return c;
  c.omega0 = *s0.omega0;
  for (double k : {c.omega0 * (1.0 + eps), 0.5 * c.omega0}) {
    const auto sk = symmetric_spectrum(build_operator_matrix(OperatorTag::L_of_k, q, params, k));
    c.shift_identity_defect = std::max(
        c.shift_identity_defect,
        (sk.eigenvalues.array() - s0.eigenvalues.array() - k * k).abs().maxCoeff() / s0.norm);
    if (k > c.omega0) c.min_eig_above_omega0 = sk.lambda_min;
  }
  return c;
}

inline GrowthRateCurve growth_rate_curve(const RealField1D& q, const FkpParams& params,
                                         const std::vector<double>& ks) {
  for (std::size_t j = 0; j < ks.size(); ++j)
    if (!(ks[j] > 0.0) || (j > 0 && !(ks[j] > ks[j - 1])))
      throw PreconditionError("growth_rate_curve: k list must be positive and increasing");
  GrowthRateCurve curve;
  curve.k = ks;
  for (double k : ks) curve.sigma_max.push_back(growth_rate(q, params, k));
  curve.certificate = instability_certificate(q, params);
  return curve;
}

}  // namespace fkp
