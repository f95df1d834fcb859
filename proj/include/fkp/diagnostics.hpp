#pragma once

// Conserved quantities, norms, perturbation residuals and threshold
// crossing times for 2D fKP fields.

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "fkp/errors.hpp"
#include "fkp/params.hpp"
#include "fkp/spectral_core.hpp"

namespace fkp {

struct DiagnosticsSeries {
  std::vector<double> t;
  std::vector<double> sup_norm;
  std::vector<double> mass;
  std::vector<double> mass_rel_err;
  std::vector<double> perturbation_sup;  // empty when no carrier is tracked
  std::vector<double> energy;            // empty when energy is not tracked

  std::size_t size() const { return t.size(); }
  bool has_perturbation() const { return !perturbation_sup.empty(); }
  bool has_energy() const { return !energy.empty(); }
};

/// M(u) = int u^2 d(x,y), trapezoidal (spectrally exact) on the periodic box.
inline double mass(const RealField2D& u) {
  require_finite(u.values, "mass");
  double s = 0.0;
  for (double v : u.values) s += v * v;
  return s * u.grid.cell_area();
}

/// Mass from a half spectrum of a real field (Parseval).
inline double mass_from_spectrum(const Grid2D& g, std::span<const cplx> spec) {
  const std::size_t w = g.spectral_width();
  const std::size_t nyq = g.x.size() / 2;
  double s = 0.0;
  for (std::size_t iy = 0; iy < g.y.size(); ++iy)
    for (std::size_t ix = 0; ix < w; ++ix) {
      const double weight = (ix == 0 || ix == nyq) ? 1.0 : 2.0;
      s += weight * std::norm(spec[iy * w + ix]);
    }
  const double n = static_cast<double>(g.size());
  return s * g.cell_area() / n;
}

/// E = int 1/2 (D^{alpha/2} u)^2 - u^3/6 - sigma/2 (d_x^{-1} u_y)^2.
/// Requires the k_x = 0, k_y != 0 modes to vanish.
inline double energy(const RealField2D& u, const FkpParams& params) {
  params.validate();
  const auto& g = u.grid;
  const auto spec = dft(u);
  const std::size_t w = g.spectral_width();
  const std::size_t nyq = g.x.size() / 2;

  double scale = 0.0;
  for (const auto& c : spec) scale = std::max(scale, std::abs(c));
  for (std::size_t iy = 1; iy < g.y.size(); ++iy)
    if (std::abs(spec[iy * w]) > 1e-10 * scale)
      throw PreconditionError("energy: k_x = 0 modes of u_y must vanish");

  double kinetic = 0.0, transverse = 0.0;
  for (std::size_t iy = 0; iy < g.y.size(); ++iy) {
    const double ky = g.y.k(iy);
    for (std::size_t ix = 1; ix < w; ++ix) {
      const double kx = static_cast<double>(ix) * g.x.dk();
      const double weight = ix == nyq ? 1.0 : 2.0;
      const double p = weight * std::norm(spec[iy * w + ix]);
      kinetic += std::pow(kx, params.alpha) * p;
      transverse += (ky * ky) / (kx * kx) * p;
    }
  }
  const double n = static_cast<double>(g.size());
  const double norm = g.cell_area() / n;
  double cubic = 0.0;
  for (double v : u.values) cubic += v * v * v;
  cubic *= g.cell_area();
  return 0.5 * kinetic * norm - cubic / 6.0 - 0.5 * params.sigma * transverse * norm;
}

/// error_i = 1 - mass_i / mass_0.
inline std::vector<double> mass_rel_error(std::span<const double> masses) {
  if (masses.empty()) throw PreconditionError("mass_rel_error: empty series");
  if (!(masses[0] > 0.0)) throw PreconditionError("mass_rel_error: zero initial mass");
  std::vector<double> e(masses.size());
  for (std::size_t i = 0; i < masses.size(); ++i) e[i] = 1.0 - masses[i] / masses[0];
  e[0] = 0.0;
  return e;
}

/// sup |u - Q(x - c t) (x) 1_y|, with the carrier translated spectrally
/// modulo the period. `carrier` holds the line profile at t = 0.
inline double perturbation_residual(const RealField2D& u, const RealField1D& carrier, double c,
                                    double t) {
  if (!(carrier.grid == u.grid.x))
    throw PreconditionError("perturbation_residual: carrier must live on the x grid");
  const auto moved = apply_symbol(carrier, Symbol::shift_x(c * t));
  const std::size_t nx = u.grid.x.size();
  double r = 0.0;
  for (std::size_t iy = 0; iy < u.grid.y.size(); ++iy)
    for (std::size_t ix = 0; ix < nx; ++ix) r = std::max(r, std::abs(u(iy, ix) - moved[ix]));
  return r;
}

/// First time the signal reaches factor * reference, linearly interpolated
/// between samples. Upward crossing when factor * reference lies above the
/// initial sample, downward crossing otherwise.
inline std::optional<double> crossing_time(std::span<const double> t, std::span<const double> signal,
                                           double reference, double factor) {
  if (t.empty() || t.size() != signal.size())
    throw PreconditionError("crossing_time: empty or mismatched series");
  if (!(factor > 0.0)) throw PreconditionError("crossing_time: factor must be positive");
  const double level = factor * reference;
  const bool upward = level >= signal[0];
  for (std::size_t i = 1; i < signal.size(); ++i) {
    const bool crossed = upward ? signal[i] >= level : signal[i] <= level;
    if (!crossed) continue;
    const double d = signal[i] - signal[i - 1];
    const double frac = d != 0.0 ? (level - signal[i - 1]) / d : 1.0;
    return t[i - 1] + std::clamp(frac, 0.0, 1.0) * (t[i] - t[i - 1]);
  }
  return std::nullopt;
}

}  // namespace fkp
