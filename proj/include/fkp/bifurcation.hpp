#pragma once

// Dimension-breaking branch of steady fKP-I waves
//   phi(x, y) = Q_c(x) + d_x w(x, y),  w(x, y) = sum_m w_m(x) cos(m omega y),
// from L w + 1/2 (w_x^2)_x - w_yy = 0 with L = -d_x M_c d_x. Each w_m is odd
// in x and stored through its samples at x > 0; the branch is parametrized
// by s = <w_1, chi> with chi the odd lowest eigenfunction of L.

#include <Eigen/Dense>
#include <bit>
#include <cmath>
#include <optional>
#include <vector>

#include "fkp/errors.hpp"
#include "fkp/ground_state.hpp"
#include "fkp/linear_analysis.hpp"
#include "fkp/params.hpp"
#include "fkp/spectral_core.hpp"

namespace fkp {

struct BranchPoint {
  double s = 0.0;
  double omega = 0.0;
  std::vector<RealField1D> modes;  // w_0 .. w_M on the full periodic grid
  double residual_sup = 0.0;
  int iterations = 0;
  std::vector<double> residual_history;  // Newton iterates
};

/// Everything that depends on (Q_c, grid, M_y) only.
class BranchProblem {
 public:
  BranchProblem(const RealField1D& q, const FkpParams& params, int modes = 8)
      : q_(q), params_(params), my_(modes), grid_(q.grid),
        l_(build_operator_matrix(OperatorTag::L_of_k, q, params, 0.0)) {
    params.validate();
    if (modes < 1) throw PreconditionError("branch: at least one transverse mode required");
    const std::size_t n = grid_.size();
    if (n < 16) throw PreconditionError("branch: grid too small");
    h_ = static_cast<Eigen::Index>(n / 2 - 1);
    ntheta_ = std::bit_ceil(static_cast<std::size_t>(4 * modes));
    const auto N = static_cast<Eigen::Index>(n);

    const auto odd = odd_subspace_lowest(l_);
    lambda_ = odd.lambda;
    if (!(lambda_ < 0.0)) throw ValidityError("branch: no negative eigenvalue on the odd subspace");
    omega0_ = std::sqrt(-lambda_);
    chi_ = odd.eigenfunction;

    dx_ = detail::assemble(n, [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
      return detail::apply_multiplier(grid_, detail::dx_multiplier(grid_), v);
    });
    ext_ = Eigen::MatrixXd::Zero(N, h_);
    const auto c = static_cast<Eigen::Index>(grid_.center_index());
    for (Eigen::Index j = 1; j <= h_; ++j) {
      ext_(c + j, j - 1) = 1.0;
      ext_(c - j, j - 1) = -1.0;
    }
    lp_ = l_.matrix * ext_;
    dxp_ = dx_ * ext_;
    sdx_ = dx_.middleRows(c + 1, h_);
    chi_half_ = Eigen::Map<const Eigen::VectorXd>(chi_.values.data() + c + 1, h_);
    for (std::size_t q2 = 0; q2 < ntheta_; ++q2) theta_.push_back(2.0 * pi * static_cast<double>(q2) / static_cast<double>(ntheta_));
  }

  int modes() const { return my_; }
  std::size_t ntheta() const { return ntheta_; }
  double lambda() const { return lambda_; }
  double omega0() const { return omega0_; }
  const RealField1D& chi() const { return chi_; }
  const RealField1D& profile() const { return q_; }
  const FkpParams& params() const { return params_; }
  const Grid1D& grid() const { return grid_; }
  Eigen::Index unknowns() const { return (my_ + 1) * h_ + 1; }
  /// Residual scale: crest height of Q_c.
  double scale() const { return sup_norm(q_.values); }

  // -- packing ------------------------------------------------------------

  Eigen::VectorXd pack(const BranchPoint& p) const {
    Eigen::VectorXd z(unknowns());
    const auto c = grid_.center_index();
    for (int m = 0; m <= my_; ++m)
      for (Eigen::Index j = 0; j < h_; ++j) z[m * h_ + j] = p.modes[m][c + 1 + static_cast<std::size_t>(j)];
    z[unknowns() - 1] = p.omega;
    return z;
  }

  BranchPoint unpack(const Eigen::VectorXd& z, double s) const {
    BranchPoint p;
    p.s = s;
    p.omega = z[unknowns() - 1];
    for (int m = 0; m <= my_; ++m) {
      const Eigen::VectorXd full = ext_ * z.segment(m * h_, h_);
      p.modes.emplace_back(grid_, std::vector<double>(full.data(), full.data() + full.size()));
    }
    return p;
  }

  // -- residual and Jacobian ------------------------------------------------

  /// x-derivatives of the modes, one column per m.
  Eigen::MatrixXd mode_slopes(const Eigen::VectorXd& z) const {
    Eigen::MatrixXd s(dxp_.rows(), my_ + 1);
    for (int m = 0; m <= my_; ++m) s.col(m) = dxp_ * z.segment(m * h_, h_);
    return s;
  }

  /// Pi_m[f(x, theta)] for f sampled on the collocation grid (columns = theta).
  Eigen::MatrixXd project_modes(const Eigen::MatrixXd& f) const {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(f.rows(), my_ + 1);
    const double nt = static_cast<double>(ntheta_);
    for (int m = 0; m <= my_; ++m)
      for (std::size_t q = 0; q < ntheta_; ++q)
        out.col(m) += ((m == 0 ? 1.0 : 2.0) / nt * std::cos(m * theta_[q])) * f.col(static_cast<Eigen::Index>(q));
    return out;
  }

  /// Samples of sum_m a_m(x) cos(m theta) on the collocation grid.
  Eigen::MatrixXd synthesize(const Eigen::MatrixXd& a) const {
    Eigen::MatrixXd f = Eigen::MatrixXd::Zero(a.rows(), static_cast<Eigen::Index>(ntheta_));
    for (std::size_t q = 0; q < ntheta_; ++q)
      for (int m = 0; m <= my_; ++m) f.col(static_cast<Eigen::Index>(q)) += std::cos(m * theta_[q]) * a.col(m);
    return f;
  }

  /// Mode residuals on the full grid, before restriction to x > 0.
  Eigen::MatrixXd full_residual(const Eigen::VectorXd& z) const {
    const double omega = z[unknowns() - 1];
    const Eigen::MatrixXd wx = synthesize(mode_slopes(z));
    const Eigen::MatrixXd nl = project_modes(wx.cwiseProduct(wx));
    Eigen::MatrixXd r(lp_.rows(), my_ + 1);
    for (int m = 0; m <= my_; ++m) {
      const auto v = z.segment(m * h_, h_);
      r.col(m) = lp_ * v + (m * m * omega * omega) * (ext_ * v) + 0.5 * (dx_ * nl.col(m));
    }
    return r;
  }

  /// Stacked restricted residuals followed by the amplitude constraint.
  Eigen::VectorXd residual(const Eigen::VectorXd& z, double s) const {
    const auto r = full_residual(z);
    const auto c = static_cast<Eigen::Index>(grid_.center_index());
    Eigen::VectorXd out(unknowns());
    for (int m = 0; m <= my_; ++m) out.segment(m * h_, h_) = r.col(m).segment(c + 1, h_);
    out[unknowns() - 1] = constraint(z) - s;
    return out;
  }

  double constraint(const Eigen::VectorXd& z) const {
    // <w_1, chi> over the full grid = 2 dx sum over x > 0.
    return 2.0 * grid_.dx() * z.segment(h_, h_).dot(chi_half_);
  }

  Eigen::MatrixXd jacobian(const Eigen::VectorXd& z) const {
    const double omega = z[unknowns() - 1];
    const Eigen::Index nu = unknowns();
    const auto c = static_cast<Eigen::Index>(grid_.center_index());
    Eigen::MatrixXd j = Eigen::MatrixXd::Zero(nu, nu);
    const Eigen::MatrixXd slopes = mode_slopes(z);
    const Eigen::MatrixXd wx = synthesize(slopes);
    const Eigen::MatrixXd lp_half = lp_.middleRows(c + 1, h_);
    for (int p = 0; p <= my_; ++p) {
      Eigen::MatrixXd f(wx.rows(), wx.cols());
      for (std::size_t q = 0; q < ntheta_; ++q)
        f.col(static_cast<Eigen::Index>(q)) = std::cos(p * theta_[q]) * wx.col(static_cast<Eigen::Index>(q));
      const Eigen::MatrixXd g = project_modes(f);
      for (int m = 0; m <= my_; ++m) {
        auto block = j.block(m * h_, p * h_, h_, h_);
        block = sdx_ * g.col(m).asDiagonal() * dxp_;
        if (m == p) {
          block += lp_half;
          block.diagonal().array() += m * m * omega * omega;
        }
      }
    }
    for (int m = 1; m <= my_; ++m) j.block(m * h_, nu - 1, h_, 1) = (2.0 * m * m * omega) * z.segment(m * h_, h_);
    j.block(nu - 1, h_, 1, h_) = (2.0 * grid_.dx()) * chi_half_.transpose();
    return j;
  }

 private:
  RealField1D q_;
  FkpParams params_;
  int my_;
  Grid1D grid_;
  Eigen::Index h_ = 0;
  std::size_t ntheta_ = 0;
  OperatorMatrix l_;
  double lambda_ = 0.0, omega0_ = 0.0;
  RealField1D chi_{Grid1D(1.0, 8)};
  Eigen::MatrixXd dx_, ext_, lp_, dxp_, sdx_;
  Eigen::VectorXd chi_half_;
  std::vector<double> theta_;
};

/// Mode residual fields (full grid, one per m) of a branch point.
inline std::vector<RealField1D> steady_residual(const BranchProblem& prob, const BranchPoint& p) {
  const auto r = prob.full_residual(prob.pack(p));
  std::vector<RealField1D> out;
  for (Eigen::Index m = 0; m < r.cols(); ++m)
    out.emplace_back(prob.grid(), std::vector<double>(r.col(m).data(), r.col(m).data() + r.rows()));
  return out;
}

inline double steady_residual_sup(const BranchProblem& prob, const BranchPoint& p) {
  return prob.residual(prob.pack(p), p.s).cwiseAbs().maxCoeff();
}

/// w_1 = s chi, other modes zero, omega = omega_0.
inline BranchPoint branch_predictor(const BranchProblem& prob, double s) {
  BranchPoint p;
  p.s = s;
  p.omega = prob.omega0();
  for (int m = 0; m <= prob.modes(); ++m) {
    RealField1D w(prob.grid());
    if (m == 1)
      for (std::size_t j = 0; j < w.values.size(); ++j) w[j] = s * prob.chi()[j];
    p.modes.push_back(std::move(w));
  }
  p.residual_sup = steady_residual_sup(prob, p);
  return p;
}

struct NewtonOptions {
  int max_iterations = 50;
  double tolerance = 1e-10;  // relative to BranchProblem::scale()
};

inline BranchPoint newton_correct(const BranchProblem& prob, const BranchPoint& guess,
                                  const NewtonOptions& opts = {}) {
  Eigen::VectorXd z = prob.pack(guess);
  const double target = opts.tolerance * prob.scale();
  std::vector<double> history;
  for (int it = 0; it <= opts.max_iterations; ++it) {
    const Eigen::VectorXd r = prob.residual(z, guess.s);
    const double rs = r.cwiseAbs().maxCoeff();
    if (!std::isfinite(rs)) throw ConvergenceError("branch Newton: non-finite residual");
    history.push_back(rs);
    if (rs <= target) {
      BranchPoint p = prob.unpack(z, guess.s);
      p.residual_sup = rs;
      p.iterations = it;
      p.residual_history = std::move(history);
      return p;
    }
    if (it == opts.max_iterations) break;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(prob.jacobian(z));
    if (!(lu.rcond() > 1e-14)) throw ConvergenceError("branch Newton: singular Jacobian");
    z -= lu.solve(r);
  }
  throw ConvergenceError("branch Newton: no convergence in " + std::to_string(opts.max_iterations) +
                         " iterations");
}

struct BranchOptions {
  NewtonOptions newton;
  double min_step = 1e-6;
};

/// Continuation over increasing s with a secant predictor; failed steps are
/// bisected until the step falls below min_step.
inline std::vector<BranchPoint> continue_branch(const BranchProblem& prob, const std::vector<double>& s_values,
                                                const BranchOptions& opts = {}) {
  for (std::size_t j = 0; j < s_values.size(); ++j)
    if (!(s_values[j] > 0.0) || (j > 0 && !(s_values[j] > s_values[j - 1])))
      throw PreconditionError("continue_branch: s values must be positive and increasing");
  std::vector<BranchPoint> branch;
  auto predict = [&](double s) {
    if (branch.size() < 2) {
      auto p = branch_predictor(prob, s);
      if (branch.size() == 1) p.omega = branch.back().omega;
      return p;
    }
    const auto& a = branch[branch.size() - 2];
    const auto& b = branch.back();
    const double t = (s - b.s) / (b.s - a.s);
    const Eigen::VectorXd z = prob.pack(b) + t * (prob.pack(b) - prob.pack(a));
    return prob.unpack(z, s);
  };
  std::vector<BranchPoint> accepted;
  double current = 0.0;
  for (double target : s_values) {
    double s = target;
    while (true) {
      try {
        branch.push_back(newton_correct(prob, predict(s), opts.newton));
        current = s;
        if (s == target) break;
        s = target;
      } catch (const ConvergenceError&) {
        const double step = 0.5 * (s - current);
        if (step < opts.min_step) throw ConvergenceError("continue_branch: step fell below minimum");
        s = current + step;
      }
    }
    accepted.push_back(branch.back());
  }
  return accepted;
}

// ---------------------------------------------------------------------------
// Reconstruction and independent checks

/// phi = Q_c + d_x w on x grid x one y period [-pi/omega, pi/omega).
inline RealField2D reconstruct_phi(const BranchProblem& prob, const BranchPoint& p) {
  const Grid2D g{prob.grid(), Grid1D(pi / p.omega, prob.ntheta())};
  RealField2D phi(g);
  const auto dx = Symbol::d_dx();
  std::vector<RealField1D> slopes;
  for (const auto& w : p.modes) slopes.push_back(apply_symbol(w, dx));
  for (std::size_t iy = 0; iy < g.y.size(); ++iy) {
    const double theta = p.omega * g.y.x(iy);
    for (std::size_t ix = 0; ix < g.x.size(); ++ix) {
      double v = prob.profile()[ix];
      for (std::size_t m = 0; m < slopes.size(); ++m) v += slopes[m][ix] * std::cos(static_cast<double>(m) * theta);
      phi(iy, ix) = v;
    }
  }
  return phi;
}

/// sup of (-c phi + phi^2/2 - D^alpha phi)_xx - phi_yy over the reconstructed cell.
inline double direct_steady_residual(const BranchProblem& prob, const BranchPoint& p) {
  const auto phi = reconstruct_phi(prob, p);
  const auto& g = phi.grid;
  const auto& par = prob.params();
  const auto riesz = Symbol::riesz(par.alpha);
  const auto dx = Symbol::d_dx();
  double worst = 0.0;
  std::vector<RealField1D> slopes;
  for (const auto& w : p.modes) slopes.push_back(apply_symbol(w, dx));
  for (std::size_t iy = 0; iy < g.y.size(); ++iy) {
    RealField1D row(g.x);
    for (std::size_t ix = 0; ix < g.x.size(); ++ix) row[ix] = phi(iy, ix);
    const auto dr = apply_symbol(row, riesz);
    RealField1D f(g.x);
    for (std::size_t ix = 0; ix < g.x.size(); ++ix) f[ix] = -par.c * row[ix] + 0.5 * row[ix] * row[ix] - dr[ix];
    const auto fxx = apply_symbol(apply_symbol(f, dx), dx);
    const double theta = p.omega * g.y.x(iy);
    for (std::size_t ix = 0; ix < g.x.size(); ++ix) {
      double phiyy = 0.0;
      for (std::size_t m = 1; m < slopes.size(); ++m) {
        const double mm = static_cast<double>(m);
        phiyy -= mm * mm * p.omega * p.omega * slopes[m][ix] * std::cos(mm * theta);
      }
      worst = std::max(worst, std::abs(fxx[ix] - phiyy));
    }
  }
  return worst;
}

/// Largest |phi(x) - phi(-x)| over the cell.
inline double phi_evenness_defect(const RealField2D& phi) {
  const auto& gx = phi.grid.x;
  double d = 0.0;
  for (std::size_t iy = 0; iy < phi.grid.y.size(); ++iy)
    for (std::size_t ix = 0; ix < gx.size(); ++ix) d = std::max(d, std::abs(phi(iy, ix) - phi(iy, gx.mirror(ix))));
  return d;
}

/// sum_{m >= 1} ||d_x w_m||^2: size of the y-dependent part.
inline double transverse_energy(const BranchPoint& p) {
  double e = 0.0;
  for (std::size_t m = 1; m < p.modes.size(); ++m) e += l2_norm_squared(apply_symbol(p.modes[m], Symbol::d_dx()));
  return e;
}

/// Least-squares fit omega(s) = a + b s^2; returns a.
inline double extrapolate_omega(const std::vector<BranchPoint>& branch) {
  if (branch.size() < 2) throw PreconditionError("extrapolate_omega: need at least two points");
  Eigen::MatrixXd a(static_cast<Eigen::Index>(branch.size()), 2);
  Eigen::VectorXd b(a.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const double s = branch[static_cast<std::size_t>(i)].s;
    a(i, 0) = 1.0;
    a(i, 1) = s * s;
    b[i] = branch[static_cast<std::size_t>(i)].omega;
  }
  return a.colPivHouseholderQr().solve(b)[0];
}

}  // namespace fkp
