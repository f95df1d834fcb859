#pragma once

// Periodic grids, discrete Fourier transforms and Fourier multipliers.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fkp/errors.hpp"
#include "fkp/fft.hpp"

namespace fkp {

inline constexpr double pi = std::numbers::pi;

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

/// Uniform periodic grid on [-L, L) with n points. Wavenumbers follow the
/// standard DFT ordering 0, 1, ..., n/2-1, -n/2, ..., -1 in units of pi/L.
class Grid1D {
 public:
  Grid1D(double half_width, std::size_t n) : half_width_(half_width), n_(n) {
    if (!(half_width > 0.0) || !std::isfinite(half_width))
      throw PreconditionError("grid half-width L must be positive");
    if (n < 8 || !is_power_of_two(n))
      throw PreconditionError("power of two required for grid size (n >= 8), got " +
                              std::to_string(n));
  }

  double half_width() const { return half_width_; }
  std::size_t size() const { return n_; }
  double dx() const { return 2.0 * half_width_ / static_cast<double>(n_); }
  double dk() const { return pi / half_width_; }
  double x(std::size_t j) const { return -half_width_ + static_cast<double>(j) * dx(); }

  /// Signed integer mode index of slot j.
  long mode(std::size_t j) const {
    const auto jj = static_cast<long>(j);
    const auto n = static_cast<long>(n_);
    return jj < n / 2 ? jj : jj - n;
  }
  double k(std::size_t j) const { return static_cast<double>(mode(j)) * dk(); }
  bool is_nyquist(std::size_t j) const { return j == n_ / 2; }

  /// Slot of the point -x_j (x_0 = -L maps to itself).
  std::size_t mirror(std::size_t j) const { return (n_ - j) % n_; }
  std::size_t center_index() const { return n_ / 2; }

  std::vector<double> points() const {
    std::vector<double> xs(n_);
    for (std::size_t j = 0; j < n_; ++j) xs[j] = x(j);
    return xs;
  }

  friend bool operator==(const Grid1D&, const Grid1D&) = default;

 private:
  double half_width_;
  std::size_t n_;
};

inline Grid1D make_grid(double half_width, std::size_t n) { return Grid1D(half_width, n); }

struct Grid2D {
  Grid1D x;
  Grid1D y;

  std::size_t size() const { return x.size() * y.size(); }
  /// Number of non-negative k_x slots in a real-to-complex spectrum.
  std::size_t spectral_width() const { return x.size() / 2 + 1; }
  std::size_t spectral_size() const { return y.size() * spectral_width(); }
  double cell_area() const { return x.dx() * y.dx(); }

  friend bool operator==(const Grid2D&, const Grid2D&) = default;
};

struct RealField1D {
  Grid1D grid;
  std::vector<double> values;

  explicit RealField1D(Grid1D g) : grid(g), values(g.size(), 0.0) {}
  RealField1D(Grid1D g, std::vector<double> v) : grid(g), values(std::move(v)) {
    if (values.size() != grid.size())
      throw PreconditionError("field size does not match grid");
  }

  double& operator[](std::size_t j) { return values[j]; }
  double operator[](std::size_t j) const { return values[j]; }
};

/// Samples stored row-major, x fastest: values[iy * nx + ix].
struct RealField2D {
  Grid2D grid;
  std::vector<double> values;

  explicit RealField2D(Grid2D g) : grid(g), values(g.size(), 0.0) {}
  RealField2D(Grid2D g, std::vector<double> v) : grid(g), values(std::move(v)) {
    if (values.size() != grid.size())
      throw PreconditionError("field size does not match grid");
  }

  double& operator()(std::size_t iy, std::size_t ix) { return values[iy * grid.x.size() + ix]; }
  double operator()(std::size_t iy, std::size_t ix) const {
    return values[iy * grid.x.size() + ix];
  }
};

template <class F>
RealField1D sample(const Grid1D& g, F&& f) {
  RealField1D u(g);
  for (std::size_t j = 0; j < g.size(); ++j) u[j] = f(g.x(j));
  return u;
}

template <class F>
RealField2D sample(const Grid2D& g, F&& f) {
  RealField2D u(g);
  for (std::size_t iy = 0; iy < g.y.size(); ++iy)
    for (std::size_t ix = 0; ix < g.x.size(); ++ix) u(iy, ix) = f(g.x.x(ix), g.y.x(iy));
  return u;
}

/// Tensor extension of a 1D profile in y.
inline RealField2D extend_in_y(const RealField1D& profile, const Grid1D& grid_y) {
  RealField2D u(Grid2D{profile.grid, grid_y});
  const std::size_t nx = profile.grid.size();
  for (std::size_t iy = 0; iy < grid_y.size(); ++iy)
    std::copy(profile.values.begin(), profile.values.end(), u.values.begin() + iy * nx);
  return u;
}

inline double sup_norm(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

inline void require_finite(std::span<const double> v, const char* what) {
  for (double x : v)
    if (!std::isfinite(x)) throw PreconditionError(std::string(what) + ": non-finite sample");
}

// ---------------------------------------------------------------------------
// Transforms

/// Full-length spectrum of a 1D field, standard DFT ordering, unnormalized.
inline std::vector<cplx> dft(const RealField1D& u) {
  require_finite(u.values, "dft");
  const std::size_t n = u.grid.size();
  std::vector<cplx> in(u.values.begin(), u.values.end());
  std::vector<cplx> out(n);
  fft1d(n).forward(in, out);
  return out;
}

/// Inverse of dft(); the imaginary part of the synthesis is discarded.
inline RealField1D idft(const Grid1D& g, std::span<const cplx> spectrum) {
  const std::size_t n = g.size();
  if (spectrum.size() != n) throw PreconditionError("spectrum size does not match grid");
  std::vector<cplx> out(n);
  fft1d(n).backward(spectrum, out);
  RealField1D u(g);
  for (std::size_t j = 0; j < n; ++j) u[j] = out[j].real();
  return u;
}

/// Largest |c_j - conj(c_{-j})| relative to the largest coefficient.
inline double hermitian_defect(std::span<const cplx> spectrum) {
  const std::size_t n = spectrum.size();
  double scale = 0.0, defect = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    scale = std::max(scale, std::abs(spectrum[j]));
    defect = std::max(defect, std::abs(spectrum[j] - std::conj(spectrum[(n - j) % n])));
  }
  return scale > 0.0 ? defect / scale : 0.0;
}

/// Half spectrum (ny rows of nx/2+1 slots) of a 2D field.
inline std::vector<cplx> dft(const RealField2D& u) {
  require_finite(u.values, "dft");
  std::vector<cplx> out(u.grid.spectral_size());
  fft2d(u.grid.y.size(), u.grid.x.size()).forward(u.values, out);
  return out;
}

inline RealField2D idft(const Grid2D& g, std::span<const cplx> spectrum) {
  if (spectrum.size() != g.spectral_size())
    throw PreconditionError("spectrum size does not match grid");
  RealField2D u(g);
  fft2d(g.y.size(), g.x.size()).backward(spectrum, u.values);
  return u;
}

/// Discrete L2 norm squared, dx * sum |u_j|^2.
inline double l2_norm_squared(const RealField1D& u) {
  double s = 0.0;
  for (double v : u.values) s += v * v;
  return s * u.grid.dx();
}

/// Same quantity evaluated on the spectrum (Parseval).
inline double l2_norm_squared_spectral(const Grid1D& g, std::span<const cplx> spectrum) {
  double s = 0.0;
  for (const auto& c : spectrum) s += std::norm(c);
  return s * g.dx() / static_cast<double>(g.size());
}

// ---------------------------------------------------------------------------
// Fourier multipliers

/// A Fourier multiplier acting on periodic fields.
class Symbol {
 public:
  enum class Kind { riesz, d_dx, d_dy, antideriv_x, shift_x, custom };
  using Table = std::function<cplx(double kx, double ky)>;

  /// |k_x|^alpha, alpha in (1/3, 2].
  static Symbol riesz(double alpha) {
    if (!(alpha > 1.0 / 3.0 && alpha <= 2.0))
      throw PreconditionError("alpha must be in (1/3, 2]");
    return Symbol(Kind::riesz, alpha);
  }
  static Symbol d_dx() { return Symbol(Kind::d_dx, 0.0); }
  static Symbol d_dy() { return Symbol(Kind::d_dy, 0.0); }
  /// 1/(i k_x), defined on fields whose k_x = 0 modes vanish.
  static Symbol antideriv_x() { return Symbol(Kind::antideriv_x, 0.0); }
  /// exp(-i k_x a): translates the field by +a.
  static Symbol shift_x(double a) { return Symbol(Kind::shift_x, a); }
  static Symbol custom(Table table) {
    Symbol s(Kind::custom, 0.0);
    s.table_ = std::move(table);
    return s;
  }

  Kind kind() const { return kind_; }
  double parameter() const { return param_; }

  /// Multiplier value. Odd multipliers vanish on Nyquist slots so that
  /// real fields map to real fields.
  cplx operator()(double kx, double ky, bool x_nyquist, bool y_nyquist) const {
    switch (kind_) {
      case Kind::riesz:
        return kx == 0.0 ? 0.0 : std::pow(std::abs(kx), param_);
      case Kind::d_dx:
        return x_nyquist ? 0.0 : cplx(0.0, kx);
      case Kind::d_dy:
        return y_nyquist ? 0.0 : cplx(0.0, ky);
      case Kind::antideriv_x:
        return (x_nyquist || kx == 0.0) ? 0.0 : cplx(0.0, -1.0 / kx);
      case Kind::shift_x:
        return x_nyquist ? cplx(std::cos(kx * param_), 0.0) : std::polar(1.0, -kx * param_);
      case Kind::custom:
        return table_(kx, ky);
    }
    return 0.0;
  }

 private:
  Symbol(Kind k, double p) : kind_(k), param_(p) {}

  Kind kind_;
  double param_;
  Table table_;
};

namespace detail {
inline constexpr double mean_tolerance = 1e-10;
}

inline RealField1D apply_symbol(const RealField1D& u, const Symbol& s) {
  auto spec = dft(u);
  const auto& g = u.grid;
  if (s.kind() == Symbol::Kind::antideriv_x) {
    const double mean = std::abs(spec[0]) / static_cast<double>(g.size());
    if (mean > detail::mean_tolerance * std::max(sup_norm(u.values), 1e-300))
      throw PreconditionError("antiderivative requires zero x-mean");
  }
  for (std::size_t j = 0; j < g.size(); ++j) spec[j] *= s(g.k(j), 0.0, g.is_nyquist(j), false);
  return idft(g, spec);
}

inline RealField2D apply_symbol(const RealField2D& u, const Symbol& s) {
  auto spec = dft(u);
  const auto& g = u.grid;
  const std::size_t w = g.spectral_width();
  if (s.kind() == Symbol::Kind::antideriv_x) {
    // Row means live in the k_x = 0 column; test them in physical space.
    const std::size_t nx = g.x.size();
    for (std::size_t iy = 0; iy < g.y.size(); ++iy) {
      double mean = 0.0;
      for (std::size_t ix = 0; ix < nx; ++ix) mean += u(iy, ix);
      mean /= static_cast<double>(nx);
      if (std::abs(mean) > detail::mean_tolerance * std::max(sup_norm(u.values), 1e-300))
        throw PreconditionError("antiderivative requires zero x-mean in every row");
    }
  }
  for (std::size_t iy = 0; iy < g.y.size(); ++iy) {
    const double ky = g.y.k(iy);
    const bool ny = g.y.is_nyquist(iy);
    for (std::size_t ix = 0; ix < w; ++ix)
      spec[iy * w + ix] *= s(static_cast<double>(ix) * g.x.dk(), ky, ix == g.x.size() / 2, ny);
  }
  return idft(g, spec);
}

// ---------------------------------------------------------------------------
// Interpolation and resampling

/// Trigonometric interpolant of a full 1D spectrum evaluated at x (any
/// real x; the interpolant is 2L-periodic).
inline double evaluate_interpolant(const Grid1D& g, std::span<const cplx> spectrum, double x) {
  const double offset = x + g.half_width();
  const std::size_t n = g.size();
  double s = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double kx = g.k(j);
    if (g.is_nyquist(j))
      s += spectrum[j].real() * std::cos(kx * offset);
    else
      s += (spectrum[j] * std::polar(1.0, kx * offset)).real();
  }
  return s / static_cast<double>(n);
}

/// Spectral resampling. Same half-width: zero padding or truncation of the
/// mode set. Different half-width: interpolant evaluated on target points,
/// which must lie inside the source box.
inline RealField1D resample(const RealField1D& src, const Grid1D& target) {
  const auto& gs = src.grid;
  if (gs == target) return src;
  const auto spec = dft(src);
  if (gs.half_width() == target.half_width()) {
    const std::size_t ns = gs.size(), nt = target.size();
    std::vector<cplx> out(nt, 0.0);
    const long half = static_cast<long>(std::min(ns, nt) / 2);
    const double scale = static_cast<double>(nt) / static_cast<double>(ns);
    for (std::size_t j = 0; j < ns; ++j) {
      const long m = gs.mode(j);
      if (m <= -half || m >= half) continue;  // Nyquist of the smaller grid dropped
      const std::size_t slot = m >= 0 ? static_cast<std::size_t>(m)
                                      : static_cast<std::size_t>(static_cast<long>(nt) + m);
      out[slot] = spec[j] * scale;
    }
    return idft(target, out);
  }
  if (target.half_width() > gs.half_width())
    throw PreconditionError("resample: target box exceeds the source box");
  RealField1D u(target);
  for (std::size_t j = 0; j < target.size(); ++j)
    u[j] = evaluate_interpolant(gs, spec, target.x(j));
  return u;
}

// ---------------------------------------------------------------------------
// Gagliardo-Nirenberg type check

/// Squared homogeneous Sobolev seminorm ||D^s u||^2 = (dx/n) sum |k|^(2s)|u_k|^2.
/// For s < 0 the low/high frequency split bound is used: weight 1 on
/// |k| <= 1 (zero mode included) and |k|^b on |k| > 1.
inline double riesz_norm_squared(const Grid1D& g, std::span<const cplx> spectrum, double s,
                                 double b) {
  double acc = 0.0;
  for (std::size_t j = 0; j < g.size(); ++j) {
    const double kk = std::abs(g.k(j));
    double w;
    if (s >= 0.0)
      w = kk == 0.0 ? (s == 0.0 ? 1.0 : 0.0) : std::pow(kk, 2.0 * s);
    else
      w = kk <= 1.0 ? 1.0 : std::pow(kk, b);
    acc += w * std::norm(spectrum[j]);
  }
  return acc * g.dx() / static_cast<double>(g.size());
}

struct GnCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds(double rel = 1e-12) const { return lhs <= rhs * (1.0 + rel); }
};

/// ||D^a u||^2 against
/// eps * sum_{m<depth} 4^-m ||D^b u||^2 + 4^-depth eps^-(2^depth - 1) ||D^{s} u||^2,
/// s = s_{depth+1} from s_1 = a, s_{m+1} = 2 s_m - b.
inline GnCheck gn_inequality_check(const RealField1D& u, double a, double b, double eps,
                                   int depth) {
  if (!(0.0 < a && a < b)) throw PreconditionError("gn check requires 0 < a < b");
  if (!(eps > 0.0)) throw PreconditionError("gn check requires eps > 0");
  if (depth < 1) throw PreconditionError("gn check requires depth >= 1");
  const auto spec = dft(u);
  const auto& g = u.grid;
  double s = a;
  for (int m = 0; m < depth; ++m) s = 2.0 * s - b;

  GnCheck r;
  r.lhs = riesz_norm_squared(g, spec, a, b);
  const double db = riesz_norm_squared(g, spec, b, b);
  double geometric = 0.0;
  for (int m = 0; m < depth; ++m) geometric += std::pow(0.25, m);
  r.rhs = eps * geometric * db +
          std::pow(0.25, depth) * std::pow(eps, -(std::pow(2.0, depth) - 1.0)) *
              riesz_norm_squared(g, spec, s, b);
  return r;
}

}  // namespace fkp
