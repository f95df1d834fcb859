#include <cmath>
#include <random>

#include "catch_amalgamated.hpp"
#include "fkp/evolution.hpp"

using namespace fkp;
using Catch::Approx;

namespace {

// Unit wavenumber spacing in both directions.
const Grid2D unit_grid{Grid1D(pi, 8), Grid1D(pi, 8)};

std::size_t slot(const Grid2D& g, std::size_t iy, std::size_t ix) { return iy * g.spectral_width() + ix; }

double max_abs_diff(const std::vector<cplx>& a, const std::vector<cplx>& b) {
  double d = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) d = std::max(d, std::abs(a[j] - b[j]));
  return d;
}

double max_abs(const std::vector<cplx>& a) {
  double d = 0.0;
  for (const auto& z : a) d = std::max(d, std::abs(z));
  return d;
}

RealField2D smooth_random(const Grid2D& g, std::mt19937& rng) {
  std::normal_distribution<double> nd;
  const double a = nd(rng), b = nd(rng), c = nd(rng);
  return sample(g, [&](double x, double y) {
    return std::exp(-0.3 * x * x) * (1.0 + a * std::cos(y) + b * std::sin(2.0 * y)) + c * x * std::exp(-x * x);
  });
}

double sech2(double x) {
  const double s = 1.0 / std::cosh(x);
  return s * s;
}

}  // namespace

TEST_CASE("linear symbol values") {
  const auto s = linear_symbol({2.0, 1, 2.0}, unit_grid);
  const cplx a = s.values[slot(unit_grid, 0, 1)];
  CHECK(a.real() == Approx(0.0).margin(1e-15));
  CHECK(a.imag() == Approx(1.0).epsilon(1e-14));

  const cplx b = s.values[slot(unit_grid, 3, 2)];
  CHECK(unit_grid.y.k(3) == 3.0);
  CHECK(b.real() == Approx(0.0).margin(1e-14));
  CHECK(b.imag() == Approx(3.5).epsilon(1e-14));

  for (std::size_t iy = 1; iy < unit_grid.y.size(); ++iy) {
    CHECK(s.values[slot(unit_grid, iy, 0)] == cplx(0.0));
    CHECK(s.projected[slot(unit_grid, iy, 0)]);
  }
  CHECK_FALSE(s.projected[slot(unit_grid, 0, 0)]);
  CHECK(s.projected[slot(unit_grid, 0, 4)]);  // x-Nyquist column
  CHECK(s.regularizer == 2.2e-16);
}

TEST_CASE("ETD weights: analytic limits and closed forms") {
  const double h = 0.37;
  const auto w0 = etd4_weights(0.0, h);
  CHECK(std::abs(w0.Q - h / 2.0) < 1e-15);
  CHECK(std::abs(w0.f1 - h / 6.0) < 1e-15);
  CHECK(std::abs(w0.f2 - h / 6.0) < 1e-15);
  CHECK(std::abs(w0.f3 - h / 6.0) < 1e-15);
  CHECK(std::abs(w0.E - 1.0) < 1e-15);

  const double e = std::exp(1.0);
  const auto w1 = etd4_weights(1.0, 1.0);
  CHECK(std::abs(w1.f1 - (2.0 * e - 5.0)) < 1e-14);
  CHECK(std::abs(w1.f2 - (3.0 - e)) < 1e-14);
  CHECK(std::abs(w1.f3 - (3.0 * e - 8.0)) < 1e-14);
  CHECK(std::abs(w1.Q - (std::exp(0.5) - 1.0)) < 1e-14);
}

TEST_CASE("ETD weights: conjugate symmetry and agreement at the contour switch") {
  for (cplx z : {cplx(0.3, 2.0), cplx(-0.1, 0.2), cplx(0.0, 0.49), cplx(-3.0, 1.0)}) {
    const auto a = etd4_weights(z, 1.0);
    const auto b = etd4_weights(std::conj(z), 1.0);
    CHECK(std::abs(a.f1 - std::conj(b.f1)) < 1e-14);
    CHECK(std::abs(a.f2 - std::conj(b.f2)) < 1e-14);
    CHECK(std::abs(a.f3 - std::conj(b.f3)) < 1e-14);
    CHECK(std::abs(a.Q - std::conj(b.Q)) < 1e-14);
  }
  // Just inside the contour region the closed forms are still accurate.
  for (cplx z : {cplx(0.0, 0.45), cplx(-0.3, 0.35)}) {
    const auto c = etd4_weights(z, 1.0);
    const auto d = detail::etd_direct(z, 1.0);
    CHECK(std::abs(c.f1 - d.f1) < 1e-12);
    CHECK(std::abs(c.f2 - d.f2) < 1e-12);
    CHECK(std::abs(c.f3 - d.f3) < 1e-12);
    CHECK(std::abs(c.Q - d.Q) < 1e-12);
  }
}

TEST_CASE("ETD tableau") {
  const auto s = linear_symbol({1.5, -1, 1.0}, unit_grid);
  const auto t = etd4_tableau(s, 1e-2);
  CHECK(std::abs(t.f1[0] - 1e-2 / 6.0) < 1e-16);
  CHECK(std::abs(t.Q[0] - 0.5e-2) < 1e-16);
  CHECK_THROWS_AS(etd4_tableau(s, 0.0), PreconditionError);
}

TEST_CASE("nonlinear term") {
  const Grid2D g{Grid1D(pi, 16), Grid1D(pi, 8)};
  auto zero = EvolutionState::from_field(RealField2D(g), {2.0, -1, 1.0});
  CHECK(max_abs(nonlinear_term(zero)) == 0.0);

  const auto cosx = sample(g, [](double x, double) { return std::cos(x); });
  const auto out = nonlinear_term(EvolutionState::from_field(cosx, {2.0, -1, 1.0}));
  const double n = static_cast<double>(g.size());
  CHECK(std::abs(out[slot(g, 0, 2)] - cplx(0.0, -n / 4.0)) < 1e-12 * n);
  double rest = 0.0;
  for (std::size_t j = 0; j < out.size(); ++j)
    if (j != slot(g, 0, 2)) rest = std::max(rest, std::abs(out[j]));
  CHECK(rest < 1e-12 * n);

  std::mt19937 rng(3);
  std::normal_distribution<double> nd;
  RealField2D u(g);
  for (auto& v : u.values) v = nd(rng);
  const auto nr = nonlinear_term(EvolutionState::from_field(u, {2.0, -1, 1.0}));
  for (std::size_t iy = 0; iy < g.y.size(); ++iy) CHECK(nr[slot(g, iy, 0)] == cplx(0.0));
}

TEST_CASE("linear flow is integrated exactly") {
  const Grid2D g{Grid1D(10.0, 64), Grid1D(5.0, 16)};
  const FkpParams p{1.5, -1, 1.0};
  std::mt19937 rng(11);
  const auto u0 = smooth_random(g, rng);
  const auto symbol = linear_symbol(p, g);
  const double h = 0.01;
  const int steps = 250;
  const auto tab = etd4_tableau(symbol, h);
  auto none = [](std::span<const cplx>, std::span<cplx> out) { std::fill(out.begin(), out.end(), cplx(0.0)); };

  auto s = EvolutionState::from_field(u0, p);
  project(s.spectrum, symbol.projected);
  const auto start = s.spectrum;
  for (int i = 0; i < steps; ++i) s = etd4_step(s, tab, none);

  std::vector<cplx> exact(start.size());
  for (std::size_t j = 0; j < exact.size(); ++j) exact[j] = std::exp(symbol.values[j] * (h * steps)) * start[j];
  project(exact, symbol.projected);
  CHECK(max_abs_diff(s.spectrum, exact) <= 1e-12 * max_abs(start));
  CHECK(s.t == Approx(h * steps));
}

TEST_CASE("zero data stays zero") {
  const Grid2D g{Grid1D(10.0, 32), Grid1D(5.0, 16)};
  EvolveOptions o;
  o.dt = 0.05;
  o.t_end = 1.0;
  o.cadence = 5;
  const auto r = evolve(RealField2D(g), {2.0, -1, 1.0}, o);
  CHECK(r.status == RunStatus::completed);
  CHECK(sup_norm(r.final_state.field().values) == 0.0);
  CHECK(r.series.size() == 5);
  for (double m : r.series.mass) CHECK(m == 0.0);
}

TEST_CASE("zero-mass modes remain zero") {
  const Grid2D g{Grid1D(10.0, 64), Grid1D(5.0, 16)};
  std::mt19937 rng(5);
  const auto u0 = smooth_random(g, rng);
  EvolveOptions o;
  o.dt = 0.01;
  o.t_end = 0.5;
  o.cadence = 10;
  int checked = 0;
  o.hook = [&](const EvolutionState& s, const DiagnosticsSample&) {
    for (std::size_t iy = 1; iy < g.y.size(); ++iy) CHECK(s.spectrum[slot(g, iy, 0)] == cplx(0.0));
    ++checked;
  };
  const auto r = evolve(u0, {2.0, -1, 1.0}, o);
  CHECK(r.status == RunStatus::completed);
  CHECK(checked == 6);
}

TEST_CASE("scaling symmetry") {
  // u_l(t, x, y) = l^a u(l^(a+1) t, l x, l^(a/2+1) y).
  const double alpha = 1.5, l = 2.0;
  const FkpParams p{alpha, -1, 1.0};
  const Grid2D g{Grid1D(12.0, 64), Grid1D(8.0, 32)};
  const Grid2D gl{Grid1D(12.0 / l, 64), Grid1D(8.0 / std::pow(l, alpha / 2.0 + 1.0), 32)};
  std::mt19937 rng(17);
  const auto u0 = smooth_random(g, rng);
  RealField2D ul0(gl, u0.values);
  for (auto& v : ul0.values) v *= std::pow(l, alpha);

  EvolveOptions o;
  o.dt = 0.01;
  o.t_end = 0.4;
  o.cadence = 1000;
  const auto a = evolve(u0, p, o);
  const double tl = std::pow(l, alpha + 1.0);
  o.dt /= tl;
  o.t_end /= tl;
  const auto b = evolve(ul0, p, o);
  REQUIRE(a.status == RunStatus::completed);
  REQUIRE(b.status == RunStatus::completed);

  const auto ua = a.final_state.field();
  const auto ub = b.final_state.field();
  double err = 0.0;
  for (std::size_t j = 0; j < ua.values.size(); ++j)
    err = std::max(err, std::abs(ub.values[j] - std::pow(l, alpha) * ua.values[j]));
  CHECK(err <= 1e-6 * sup_norm(ub.values));
}

TEST_CASE("short soliton run translates at speed c") {
  const Grid2D g{Grid1D(60.0, 512), Grid1D(30.0, 16)};
  const FkpParams p{2.0, 1, 2.0};
  const auto u0 = sample(g, [](double x, double) { return 6.0 * sech2(x / std::sqrt(2.0)); });
  EvolveOptions o;
  o.dt = 1e-3;
  o.t_end = 0.5;
  o.cadence = 100;
  const auto r = evolve(u0, p, o);
  REQUIRE(r.status == RunStatus::completed);
  const auto u = r.final_state.field();
  double err = 0.0;
  for (std::size_t iy = 0; iy < g.y.size(); ++iy)
    for (std::size_t ix = 0; ix < g.x.size(); ++ix)
      err = std::max(err, std::abs(u(iy, ix) - 6.0 * sech2((g.x.x(ix) - 1.0) / std::sqrt(2.0))));
  CHECK(err <= 1e-8);
  CHECK(std::abs(r.series.mass_rel_err.back()) <= 1e-9);
  CHECK(r.series.mass_rel_err.front() == 0.0);
  CHECK(r.series.t.back() == Approx(0.5));
}

TEST_CASE("mass gate flags the run") {
  const Grid2D g{Grid1D(10.0, 32), Grid1D(5.0, 16)};
  std::mt19937 rng(23);
  const auto u0 = smooth_random(g, rng);
  EvolveOptions o;
  o.dt = 0.01;
  o.t_end = 1.0;
  o.mass_gate = 1e-300;
  const auto r = evolve(u0, {2.0, -1, 1.0}, o);
  CHECK(r.status == RunStatus::gate_violated);
  REQUIRE(r.gate_time.has_value());
  CHECK(*r.gate_time > 0.0);
  CHECK(*r.gate_time <= 1.0);
  CHECK(r.series.t.back() == *r.gate_time);
  CHECK(std::string(to_string(r.status)) == "gate_violated");
}

TEST_CASE("evolve preconditions") {
  const Grid2D g{Grid1D(10.0, 32), Grid1D(5.0, 16)};
  EvolveOptions o;
  o.dt = 0.0;
  CHECK_THROWS_AS(evolve(RealField2D(g), {2.0, -1, 1.0}, o), PreconditionError);
  o.dt = 0.1;
  o.cadence = 0;
  CHECK_THROWS_AS(evolve(RealField2D(g), {2.0, -1, 1.0}, o), PreconditionError);
  RealField2D bad(g);
  bad.values[4] = std::numeric_limits<double>::infinity();
  o.cadence = 1;
  CHECK_THROWS_AS(evolve(bad, {2.0, -1, 1.0}, o), PreconditionError);
}

TEST_CASE("non-finite state reports blow-up") {
  const Grid2D g{Grid1D(10.0, 32), Grid1D(5.0, 16)};
  const auto tab = etd4_tableau(linear_symbol({2.0, -1, 1.0}, g), 0.1);
  auto s = EvolutionState::from_field(RealField2D(g), {2.0, -1, 1.0});
  auto poison = [](std::span<const cplx>, std::span<cplx> out) {
    std::fill(out.begin(), out.end(), cplx(std::numeric_limits<double>::quiet_NaN(), 0.0));
  };
  CHECK_THROWS_AS(etd4_step(s, tab, poison), ValidityError);
}
