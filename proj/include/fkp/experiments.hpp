#pragma once

// Perturbed line solitary waves:
//   u0 = Q_c(x + x0) + A psi(x, y),
//   psi_1 = (x + x0) exp(-(x + x0)^2 - y^2)   (localized),
//   psi_2 = (x + x0) exp(-(x + x0)^2) cos(y)  (y-periodic),
// with A chosen so that max|A psi| is rho times the crest height.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <optional>
#include <string>

#include "fkp/diagnostics.hpp"
#include "fkp/errors.hpp"
#include "fkp/evolution.hpp"
#include "fkp/ground_state.hpp"
#include "fkp/io.hpp"
#include "fkp/params.hpp"
#include "fkp/spectral_core.hpp"

namespace fkp {

enum class PerturbationKind { localized, y_periodic };

struct PerturbationSpec {
  PerturbationKind kind = PerturbationKind::localized;
  double rho = 0.1;
  double x0 = 10.0;
  /// Extra shift of the carrier crest relative to the perturbation centre.
  double carrier_offset = 0.0;

  void validate() const {
    if (!(rho >= 0.0) || !std::isfinite(rho)) throw PreconditionError("rho must be >= 0");
    if (!std::isfinite(x0) || !std::isfinite(carrier_offset))
      throw PreconditionError("x0 must be finite");
  }
};

/// Unit-amplitude shape (A = 1) with the x-mean of every row removed.
inline RealField2D build_perturbation(const PerturbationSpec& spec, const Grid2D& grid) {
  spec.validate();
  auto u = sample(grid, [&](double x, double y) {
    const double s = x + spec.x0;
    const double env = s * std::exp(-s * s);
    return spec.kind == PerturbationKind::localized ? env * std::exp(-y * y) : env * std::cos(y);
  });
  const std::size_t nx = grid.x.size();
  for (std::size_t iy = 0; iy < grid.y.size(); ++iy) {
    double mean = 0.0;
    for (std::size_t ix = 0; ix < nx; ++ix) mean += u(iy, ix);
    mean /= static_cast<double>(nx);
    for (std::size_t ix = 0; ix < nx; ++ix) u(iy, ix) -= mean;
  }
  return u;
}

inline double calibrate_amplitude(const RealField2D& shape, double carrier_amplitude, double rho) {
  const double m = sup_norm(shape.values);
  if (!(m > 0.0)) throw PreconditionError("calibrate_amplitude: zero shape");
  if (!(rho >= 0.0)) throw PreconditionError("rho must be >= 0");
  return rho * carrier_amplitude / m;
}

inline double calibrate_amplitude(const RealField2D& shape, const GroundState& carrier, double rho) {
  return calibrate_amplitude(shape, carrier.amplitude(), rho);
}

/// Ground state translated so its crest sits at `crest`, sampled on `target`.
/// A source on a different box is evaluated through its interpolant at the
/// periodically wrapped coordinate and must cover the target box.
inline RealField1D place_carrier(const GroundState& gs, const Grid1D& target, double crest) {
  const auto& src = gs.grid();
  if (src.half_width() == target.half_width()) {
    return apply_symbol(resample(gs.profile, target), Symbol::shift_x(crest));
  }
  if (target.half_width() > src.half_width())
    throw PreconditionError("carrier grid does not cover the experiment box");
  const auto spec = dft(gs.profile);
  const double period = 2.0 * target.half_width();
  RealField1D q(target);
  for (std::size_t j = 0; j < target.size(); ++j)
    q[j] = evaluate_interpolant(src, spec, std::remainder(target.x(j) - crest, period));
  return q;
}

/// Line solitary wave for the experiment box: exact sech^2 profile at
/// alpha = 2, Petviashvili on a 4096-point (or finer) grid otherwise.
inline GroundState line_carrier(const FkpParams& params, const Grid1D& grid_x) {
  params.validate();
  if (params.alpha == 2.0) {
    const double c = params.c;
    auto q = sample(grid_x, [c](double x) {
      const double s = 1.0 / std::cosh(std::sqrt(c) * x / 2.0);
      return 3.0 * c * s * s;
    });
    GroundState gs{params, q, 0.0, 0, {}};
    gs.residual_sup = profile_residual(gs.profile, params.alpha, params.c);
    return gs;
  }
  const Grid1D fine(grid_x.half_width(), std::max<std::size_t>(grid_x.size(), 4096));
  return petviashvili_solve(params, fine);
}

inline RealField2D assemble_initial_data(const GroundState& carrier, const PerturbationSpec& spec,
                                         const Grid2D& grid) {
  spec.validate();
  const auto q = place_carrier(carrier, grid.x, -spec.x0 + spec.carrier_offset);
  auto u = extend_in_y(q, grid.y);
  if (spec.rho == 0.0) return u;
  const auto shape = build_perturbation(spec, grid);
  const double a = calibrate_amplitude(shape, carrier, spec.rho);
  for (std::size_t j = 0; j < u.values.size(); ++j) u.values[j] += a * shape.values[j];
  return u;
}

struct ExperimentConfig {
  ExperimentConfig(const FkpParams& p, const Grid2D& g) : params(p), grid(g) {}

  FkpParams params;
  Grid2D grid;
  double dt = 1e-3;
  double t_end = 10.0;
  PerturbationSpec perturbation;
  int cadence = 100;
  bool dealias = false;
  bool track_energy = false;
  std::filesystem::path output_dir;  // empty: nothing written
  int snapshot_every = 0;            // in recorded samples; 0: initial and final only
  std::optional<GroundState> carrier;

  void validate() const {
    params.validate();
    perturbation.validate();
    if (!(dt > 0.0)) throw PreconditionError("dt must be positive");
    if (!(t_end > 0.0)) throw PreconditionError("t_end must be positive");
    if (cadence < 1) throw PreconditionError("cadence must be >= 1");
  }
};

struct ExperimentReport {
  DiagnosticsSeries diagnostics;
  RunStatus status = RunStatus::completed;
  std::string message;
  double amplitude_A = 0.0;
  double initial_sup = 0.0;
  std::optional<double> doubling_time;
  std::optional<double> halving_time;
  std::vector<std::filesystem::path> snapshots;
  std::vector<double> snapshot_times;
};

inline ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const GroundState carrier = cfg.carrier ? *cfg.carrier : line_carrier(cfg.params, cfg.grid.x);
  const auto u0 = assemble_initial_data(carrier, cfg.perturbation, cfg.grid);

  ExperimentReport report;
  if (cfg.perturbation.rho > 0.0)
    report.amplitude_A = calibrate_amplitude(build_perturbation(cfg.perturbation, cfg.grid), carrier,
                                             cfg.perturbation.rho);

  EvolveOptions opts;
  opts.dt = cfg.dt;
  opts.t_end = cfg.t_end;
  opts.cadence = cfg.cadence;
  opts.dealias = cfg.dealias;
  opts.track_energy = cfg.track_energy;
  opts.carrier = place_carrier(carrier, cfg.grid.x, -cfg.perturbation.x0 + cfg.perturbation.carrier_offset);
  opts.carrier_speed = cfg.params.c;

  const bool write = !cfg.output_dir.empty();
  if (write) std::filesystem::create_directories(cfg.output_dir);
  std::size_t sample_index = 0;
  auto emit = [&](const EvolutionState& s) {
    char name[64];
    std::snprintf(name, sizeof name, "snapshot_%05zu.fkps", report.snapshots.size());
    const auto path = cfg.output_dir / name;
    io::write_snapshot({s.field(), s.t, s.params}, path);
    report.snapshots.push_back(path);
    report.snapshot_times.push_back(s.t);
  };
  if (write && cfg.snapshot_every > 0)
    opts.hook = [&](const EvolutionState& s, const DiagnosticsSample&) {
      if (sample_index++ % static_cast<std::size_t>(cfg.snapshot_every) == 0) emit(s);
    };
  else if (write)
    opts.hook = [&](const EvolutionState& s, const DiagnosticsSample&) {
      if (sample_index++ == 0) emit(s);
    };

  auto result = evolve(u0, cfg.params, opts);
  if (write && (report.snapshot_times.empty() || report.snapshot_times.back() != result.final_state.t))
    emit(result.final_state);

  report.diagnostics = std::move(result.series);
  report.status = result.status;
  report.message = result.message;
  const auto& d = report.diagnostics;
  report.initial_sup = d.sup_norm.front();
  report.doubling_time = crossing_time(d.t, d.sup_norm, d.sup_norm.front(), 2.0);
  if (d.has_perturbation() && d.perturbation_sup.front() > 0.0)
    report.halving_time = crossing_time(d.t, d.perturbation_sup, d.perturbation_sup.front(), 0.5);
  if (write) io::write_text(cfg.output_dir / "diagnostics.csv", io::diagnostics_csv(d));
  return report;
}

}  // namespace fkp
