#pragma once

// fKdV solitary profiles Q_c solving D^alpha Q + c Q - Q^2/2 = 0 on a
// periodic grid, computed by Petviashvili iteration, and the structural
// checks used to validate them.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "fkp/errors.hpp"
#include "fkp/params.hpp"
#include "fkp/spectral_core.hpp"

namespace fkp {

struct PetviashviliOptions {
  int max_iterations = 10000;
  double gamma = 2.0;
  double step_tolerance = 1e-13;      // relative sup-norm change between iterates
  double residual_tolerance = 1e-10;  // relative sup-norm residual
  double divergence_threshold = 1e6;
  double boundary_tolerance = 1e-4;
  bool enforce_boundary_gate = true;
  bool recenter = true;
};

struct GroundState {
  FkpParams params;
  RealField1D profile;
  double residual_sup = 0.0;
  int iterations = 0;
  std::vector<double> s_factor_history;

  const Grid1D& grid() const { return profile.grid; }
  double amplitude() const { return *std::max_element(profile.values.begin(), profile.values.end()); }
  /// |Q(+-L)|; the two ends coincide on the periodic grid up to one cell.
  double boundary_value() const {
    return std::max(std::abs(profile.values.front()), std::abs(profile.values.back()));
  }
};

namespace detail {

inline std::vector<double> riesz_weights(const Grid1D& g, double alpha) {
  std::vector<double> w(g.size());
  for (std::size_t j = 0; j < g.size(); ++j) {
    const double kk = std::abs(g.k(j));
    w[j] = kk == 0.0 ? 0.0 : std::pow(kk, alpha);
  }
  return w;
}

// Derivative of the trigonometric interpolant at x.
inline double interpolant_slope(const Grid1D& g, std::span<const cplx> spec, double x) {
  const double offset = x + g.half_width();
  double s = 0.0;
  for (std::size_t j = 0; j < g.size(); ++j) {
    if (g.is_nyquist(j)) continue;
    const double kx = g.k(j);
    s += (cplx(0.0, kx) * spec[j] * std::polar(1.0, kx * offset)).real();
  }
  return s / static_cast<double>(g.size());
}

inline double interpolant_curvature(const Grid1D& g, std::span<const cplx> spec, double x) {
  const double offset = x + g.half_width();
  double s = 0.0;
  for (std::size_t j = 0; j < g.size(); ++j) {
    if (g.is_nyquist(j)) continue;
    const double kx = g.k(j);
    s += (-kx * kx * spec[j] * std::polar(1.0, kx * offset)).real();
  }
  return s / static_cast<double>(g.size());
}

}  // namespace detail

/// sup |D^alpha Q + c Q - Q^2/2|.
inline double profile_residual(const RealField1D& q, double alpha, double c) {
  auto spec = dft(q);
  const auto w = detail::riesz_weights(q.grid, alpha);
  for (std::size_t j = 0; j < spec.size(); ++j) spec[j] *= w[j];
  const auto dq = idft(q.grid, spec);
  double r = 0.0;
  for (std::size_t j = 0; j < q.values.size(); ++j)
    r = std::max(r, std::abs(dq[j] + c * q[j] - 0.5 * q[j] * q[j]));
  return r;
}

/// Location of the crest of the interpolant, refined by Newton on Q'(x) = 0
/// from the largest sample.
inline double crest_position(const RealField1D& q) {
  const auto& g = q.grid;
  const auto it = std::max_element(q.values.begin(), q.values.end());
  double x = g.x(static_cast<std::size_t>(it - q.values.begin()));
  const auto spec = dft(q);
  for (int iter = 0; iter < 20; ++iter) {
    const double slope = detail::interpolant_slope(g, spec, x);
    const double curv = detail::interpolant_curvature(g, spec, x);
    if (curv >= 0.0) break;
    const double step = slope / curv;
    x -= std::clamp(step, -g.dx(), g.dx());
    if (std::abs(step) < 1e-15 * g.half_width()) break;
  }
  return x;
}

inline GroundState petviashvili_solve(const FkpParams& params, const Grid1D& grid,
                                      const PetviashviliOptions& opts = {}) {
  params.validate();
  const double c = params.c;
  const std::size_t n = grid.size();
  const auto w = detail::riesz_weights(grid, params.alpha);

  // The alpha = 2 closed form sets the amplitude and width scales.
  auto u = sample(grid, [c](double x) {
    const double s = 1.0 / std::cosh(0.5 * std::sqrt(c) * x);
    return 3.0 * c * s * s;
  });

  GroundState gs{params, u, 0.0, 0, {}};
  RealField1D half_square(grid);
  for (int it = 1; it <= opts.max_iterations; ++it) {
    const auto uh = dft(u);
    for (std::size_t j = 0; j < n; ++j) half_square[j] = 0.5 * u[j] * u[j];
    auto nh = dft(half_square);

    double num = 0.0, den = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      num += (c + w[j]) * std::norm(uh[j]);
      den += (std::conj(uh[j]) * nh[j]).real();
    }
    if (!(den > 0.0)) throw ConvergenceError("Petviashvili iteration: degenerate stabilizing factor");
    const double s = num / den;
    const double factor = std::pow(s, opts.gamma);
    for (std::size_t j = 0; j < n; ++j) nh[j] *= factor / (c + w[j]);
    auto next = idft(grid, nh);
    gs.s_factor_history.push_back(s);

    const double amp = sup_norm(next.values);
    if (!std::isfinite(amp) || amp > opts.divergence_threshold)
      throw ConvergenceError("Petviashvili iteration diverged at iteration " + std::to_string(it));

    double step = 0.0;
    for (std::size_t j = 0; j < n; ++j) step = std::max(step, std::abs(next[j] - u[j]));
    const double scale = sup_norm(u.values);
    u = std::move(next);
    gs.iterations = it;
    if (step <= opts.step_tolerance * scale) {
      const double res = profile_residual(u, params.alpha, c);
      if (res <= opts.residual_tolerance * amp) {
        gs.residual_sup = res;
        break;
      }
    }
    if (it == opts.max_iterations)
      throw ConvergenceError("Petviashvili iteration did not converge in " +
                             std::to_string(opts.max_iterations) + " iterations");
  }

  if (opts.recenter) {
    const double x0 = crest_position(u);
    if (std::abs(x0) > 1e-14 * grid.half_width()) {
      u = apply_symbol(u, Symbol::shift_x(-x0));
      gs.residual_sup = profile_residual(u, params.alpha, c);
    }
  }
  gs.profile = std::move(u);

  if (opts.enforce_boundary_gate && gs.boundary_value() > opts.boundary_tolerance)
    throw ValidityError("ground state not small at the boundary: |Q(+-L)| = " +
                        std::to_string(gs.boundary_value()) + " > " +
                        std::to_string(opts.boundary_tolerance) + "; enlarge the grid");
  return gs;
}

// ---------------------------------------------------------------------------
// Structural checks

/// max_j |Q(x_j) - Q(-x_j)| about x = 0.
inline double evenness_defect(const RealField1D& q) {
  double d = 0.0;
  for (std::size_t j = 0; j < q.grid.size(); ++j)
    d = std::max(d, std::abs(q[j] - q[q.grid.mirror(j)]));
  return d;
}

/// Number of local maxima of the periodic sample sequence. Slopes with
/// magnitude below tol are treated as flat, so round-off plateaus in the
/// tails do not count as crests.
inline int crest_count(const RealField1D& q, double tol) {
  const std::size_t n = q.grid.size();
  std::vector<int> signs;
  for (std::size_t j = 0; j < n; ++j) {
    const double d = q[(j + 1) % n] - q[j];
    if (d > tol)
      signs.push_back(1);
    else if (d < -tol)
      signs.push_back(-1);
  }
  if (signs.empty()) return 0;
  int count = 0;
  for (std::size_t i = 0; i < signs.size(); ++i)
    if (signs[i] == 1 && signs[(i + 1) % signs.size()] == -1) ++count;
  return count;
}

/// Samples do not increase moving away from the centre on either side,
/// up to tol.
inline bool decreasing_from_center(const RealField1D& q, double tol) {
  const std::size_t n = q.grid.size();
  const std::size_t mid = q.grid.center_index();
  for (std::size_t j = mid; j + 1 < n; ++j)
    if (q[j + 1] > q[j] + tol) return false;
  for (std::size_t j = mid; j > 0; --j)
    if (q[j - 1] > q[j] + tol) return false;
  return true;
}

namespace detail {

// Sum over the periodic images of |x|^-p on a box of period 2L.
inline double periodized_power(double x, double L, double p) {
  constexpr int images = 200;
  double s = 0.0;
  for (int m = -images; m <= images; ++m) s += std::pow(std::abs(x + 2.0 * L * m), -p);
  // Remaining images, integral estimate of both far tails.
  const double far = 2.0 * L * (images + 0.5);
  s += 2.0 * std::pow(far, 1.0 - p) / ((p - 1.0) * 2.0 * L);
  return s;
}

// Relative least-squares misfit of A * periodized_power + B for fixed p.
inline double tail_misfit(const std::vector<double>& xs, const std::vector<double>& q,
                          double L, double p) {
  double s11 = 0, s12 = 0, s22 = 0, r1 = 0, r2 = 0;
  std::vector<double> f(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    f[i] = periodized_power(xs[i], L, p) / q[i];
    const double g = 1.0 / q[i];
    s11 += f[i] * f[i];
    s12 += f[i] * g;
    s22 += g * g;
    r1 += f[i];
    r2 += g;
  }
  const double det = s11 * s22 - s12 * s12;
  const double A = (r1 * s22 - r2 * s12) / det;
  const double B = (s11 * r2 - s12 * r1) / det;
  double misfit = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double e = A * f[i] + B / q[i] - 1.0;
    misfit += e * e;
  }
  return misfit;
}

}  // namespace detail

/// Algebraic decay exponent of the tail, fitted on x in [0.5L, 0.9L].
/// On a periodic box the tail seen at x is the sum of the tails of all
/// periodic copies, so the fitted model is A * sum_m |x + 2Lm|^-p + B
/// and -p is returned. Samples below 1e-13 shrink the window from the right.
inline double tail_decay_exponent(const GroundState& gs) {
  if (!(gs.params.alpha < 2.0))
    throw PreconditionError("tail decay exponent requires alpha < 2 (algebraic decay)");
  const auto& g = gs.grid();
  const double L = g.half_width();
  std::vector<double> xs, qs;
  for (std::size_t j = g.center_index(); j < g.size(); ++j) {
    const double x = g.x(j);
    if (x < 0.5 * L || x > 0.9 * L) continue;
    const double v = std::abs(gs.profile[j]);
    if (v < 1e-13) break;
    xs.push_back(x);
    qs.push_back(v);
  }
  if (xs.size() < 8)
    throw ValidityError("tail window holds too few samples above the double-precision floor");

  // Ternary search; the misfit is unimodal in p over this bracket.
  double lo = 1.05, hi = 6.0;
  for (int it = 0; it < 100; ++it) {
    const double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
    if (detail::tail_misfit(xs, qs, L, m1) < detail::tail_misfit(xs, qs, L, m2))
      hi = m2;
    else
      lo = m1;
  }
  return -0.5 * (lo + hi);
}

/// Q_c(z) = 2c Q(c^{1/alpha} z) for a profile Q of D^alpha Q + Q - Q^2 = 0,
/// evaluated spectrally on the target grid.
inline RealField1D rescale_ground_state(const RealField1D& q, double c, double alpha,
                                        const Grid1D& target, double boundary_tolerance = 1e-4) {
  if (!(c > 0.0)) throw PreconditionError("c must be positive");
  const double stretch = std::pow(c, 1.0 / alpha);
  const auto& gs = q.grid;
  RealField1D out(target);
  if (stretch == 1.0 && target == gs) {
    for (std::size_t j = 0; j < target.size(); ++j) out[j] = 2.0 * c * q[j];
  } else {
    if (stretch * target.half_width() > gs.half_width() * (1.0 + 1e-12))
      throw PreconditionError("rescale: source grid does not cover the rescaled target box");
    const auto spec = dft(q);
    for (std::size_t j = 0; j < target.size(); ++j)
      out[j] = 2.0 * c * evaluate_interpolant(gs, spec, stretch * target.x(j));
  }
  const double edge = std::max(std::abs(out.values.front()), std::abs(out.values.back()));
  if (edge > boundary_tolerance)
    throw ValidityError("rescale: target grid too small for the rescaled support");
  return out;
}

/// J(u) = (int |u|^3)^-1 (int |D^{alpha/2} u|^2)^{1/(2 alpha)} (int u^2)^{(alpha-1)/(2 alpha) + 1}.
inline double weinstein_functional(const RealField1D& u, double alpha) {
  const double cubic = [&] {
    double s = 0.0;
    for (double v : u.values) s += std::abs(v) * v * v;
    return s * u.grid.dx();
  }();
  if (cubic == 0.0) throw PreconditionError("Weinstein functional undefined for u = 0");
  const auto spec = dft(u);
  const double kinetic = riesz_norm_squared(u.grid, spec, 0.5 * alpha, 0.5 * alpha);
  const double mass = l2_norm_squared(u);
  return std::pow(kinetic, 1.0 / (2.0 * alpha)) *
         std::pow(mass, (alpha - 1.0) / (2.0 * alpha) + 1.0) / cubic;
}

}  // namespace fkp
