#include <cmath>
#include <filesystem>

#include "catch_amalgamated.hpp"
#include "fkp/experiments.hpp"

using namespace fkp;
using Catch::Approx;

namespace {

const FkpParams kdv{2.0, -1, 2.0};

double row_mean(const RealField2D& u, std::size_t iy) {
  double m = 0.0;
  for (std::size_t ix = 0; ix < u.grid.x.size(); ++ix) m += u(iy, ix);
  return m / static_cast<double>(u.grid.x.size());
}

}  // namespace

TEST_CASE("localized perturbation vanishes at its centre") {
  const Grid2D g{Grid1D(60.0, 512), Grid1D(30.0, 32)};
  PerturbationSpec spec;
  spec.x0 = 60.0 - 213 * g.x.dx();  // x_213 = -x0
  const auto shape = build_perturbation(spec, g);
  for (std::size_t iy = 0; iy < g.y.size(); ++iy) CHECK(std::abs(shape(iy, 213)) < 1e-14);
}

TEST_CASE("shape maximum and calibrated amplitude") {
  const Grid2D g{Grid1D(20.0, 8192), Grid1D(4.0, 8)};
  PerturbationSpec spec;
  spec.x0 = 0.0;
  const auto shape = build_perturbation(spec, g);
  const double closed = std::exp(-0.5) / std::sqrt(2.0);
  CHECK(closed == Approx(0.428882).epsilon(1e-6));
  CHECK(sup_norm(shape.values) == Approx(closed).epsilon(1e-5));

  const double a = calibrate_amplitude(shape, 6.0, 0.1);
  CHECK(a == Approx(0.6 / sup_norm(shape.values)).epsilon(1e-15));
  CHECK(a == Approx(1.39898).epsilon(1e-4));
  CHECK(calibrate_amplitude(shape, 6.0, 0.2) == Approx(2.0 * a).epsilon(1e-15));
  CHECK(calibrate_amplitude(shape, 6.0, 0.0) == 0.0);
  CHECK_THROWS_AS(calibrate_amplitude(RealField2D(g), 6.0, 0.1), PreconditionError);
}

TEST_CASE("y-periodic perturbation is even in y") {
  const Grid2D g{Grid1D(30.0, 256), Grid1D(pi, 32)};
  PerturbationSpec spec;
  spec.kind = PerturbationKind::y_periodic;
  const auto shape = build_perturbation(spec, g);
  for (std::size_t iy = 0; iy < g.y.size(); ++iy)
    for (std::size_t ix = 0; ix < g.x.size(); ix += 7)
      CHECK(shape(iy, ix) == Approx(shape(g.y.mirror(iy), ix)).margin(1e-15));
}

TEST_CASE("perturbation rows are mean free") {
  const Grid2D g{Grid1D(30.0, 256), Grid1D(10.0, 32)};
  for (auto kind : {PerturbationKind::localized, PerturbationKind::y_periodic}) {
    PerturbationSpec spec;
    spec.kind = kind;
    const auto shape = build_perturbation(spec, g);
    for (std::size_t iy = 0; iy < g.y.size(); ++iy) CHECK(std::abs(row_mean(shape, iy)) < 1e-16);
  }
}

TEST_CASE("initial data assembly") {
  const Grid2D g{Grid1D(60.0, 512), Grid1D(30.0, 32)};
  const auto carrier = line_carrier(kdv, g.x);
  CHECK(carrier.amplitude() == Approx(6.0).epsilon(1e-12));

  PerturbationSpec spec;
  spec.rho = 0.0;
  const auto plain = assemble_initial_data(carrier, spec, g);
  const auto line = extend_in_y(place_carrier(carrier, g.x, -spec.x0), g.y);
  for (std::size_t j = 0; j < plain.values.size(); ++j) CHECK(plain.values[j] == line.values[j]);
  // The crest sits at -x0.
  const auto q = place_carrier(carrier, g.x, -10.0);
  CHECK(crest_position(q) == Approx(-10.0).margin(1e-8));

  spec.rho = 0.1;
  const auto u0 = assemble_initial_data(carrier, spec, g);
  const auto shape = build_perturbation(spec, g);
  const double a = calibrate_amplitude(shape, carrier, 0.1);
  const double m = sup_norm(shape.values);
  const double top = sup_norm(u0.values);
  CHECK(top >= 6.0 - a * m - 1e-12);
  CHECK(top <= 6.0 + a * m + 1e-12);
  for (std::size_t iy = 0; iy < g.y.size(); ++iy) {
    double mean = 0.0;
    for (std::size_t ix = 0; ix < g.x.size(); ++ix) mean += u0(iy, ix) - line(iy, ix);
    CHECK(std::abs(mean / static_cast<double>(g.x.size())) <= 1e-14);
  }
}

TEST_CASE("fractional line carrier is resampled from a fine solve") {
  const Grid1D gx(100.0, 1024);
  const auto gs = line_carrier({1.5, -1, 2.0}, gx);
  CHECK(gs.grid().size() == 4096);
  const auto q = place_carrier(gs, gx, 0.0);
  CHECK(sup_norm(q.values) == Approx(gs.amplitude()).epsilon(1e-8));
  CHECK_THROWS_AS(place_carrier(gs, Grid1D(200.0, 1024), 0.0), PreconditionError);
}

TEST_CASE("control run translates the line soliton") {
  const Grid2D g{Grid1D(60.0, 512), Grid1D(30.0, 8)};
  ExperimentConfig cfg(kdv, g);
  cfg.dt = 2e-3;
  cfg.t_end = 1.0;
  cfg.cadence = 50;
  cfg.perturbation.rho = 0.0;
  const auto r = run_experiment(cfg);
  CHECK(r.status == RunStatus::completed);
  CHECK(r.amplitude_A == 0.0);
  const auto& d = r.diagnostics;
  REQUIRE(d.has_perturbation());
  for (double p : d.perturbation_sup) CHECK(p <= 1e-6);
  // Grid maximum of a crest between nodes: off by at most |q''| (dx/2)^2 / 2.
  const double h = 0.5 * g.x.dx();
  for (double s : d.sup_norm) {
    CHECK(s <= 6.0 + 1e-8);
    CHECK(s >= 6.0 - 3.0 * h * h - 1e-6);
  }
  CHECK_FALSE(r.doubling_time.has_value());
}

TEST_CASE("perturbed run bookkeeping and output files") {
  const auto dir = std::filesystem::temp_directory_path() / "fkp_test_experiment";
  std::filesystem::remove_all(dir);
  const Grid2D g{Grid1D(30.0, 128), Grid1D(10.0, 32)};
  ExperimentConfig cfg(kdv, g);
  cfg.dt = 5e-3;
  cfg.t_end = 0.5;
  cfg.cadence = 20;
  cfg.output_dir = dir;
  cfg.snapshot_every = 2;
  const auto r = run_experiment(cfg);
  CHECK(r.status == RunStatus::completed);
  CHECK(r.amplitude_A > 0.0);
  const auto& d = r.diagnostics;
  CHECK(d.size() == 6);
  CHECK(d.perturbation_sup.front() == Approx(0.6).epsilon(1e-3));
  CHECK(r.snapshot_times == std::vector<double>{0.0, 0.2, 0.4, 0.5});
  for (const auto& p : r.snapshots) CHECK(std::filesystem::exists(p));
  const auto back = io::parse_diagnostics_csv(io::read_bytes(dir / "diagnostics.csv"));
  CHECK(back.t == d.t);
  CHECK(back.sup_norm == d.sup_norm);
  const auto last = io::read_snapshot(r.snapshots.back());
  CHECK(last.t == 0.5);
  CHECK(last.params.alpha == 2.0);
  std::filesystem::remove_all(dir);
}

TEST_CASE("experiment preconditions") {
  const Grid2D g{Grid1D(30.0, 128), Grid1D(10.0, 32)};
  ExperimentConfig cfg(kdv, g);
  cfg.dt = -1.0;
  CHECK_THROWS_AS(run_experiment(cfg), PreconditionError);
  cfg.dt = 1e-2;
  cfg.perturbation.rho = -0.1;
  CHECK_THROWS_AS(run_experiment(cfg), PreconditionError);
}
