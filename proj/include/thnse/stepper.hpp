#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "thnse/error.hpp"
#include "thnse/operators.hpp"
#include "thnse/projection.hpp"
#include "thnse/spaces.hpp"

namespace thnse {

/// First argument of b_h in the momentum equation. Only theta_average is
/// the supported scheme; the others are experimental diagnostics switches.
enum class NonlinearArgument
{
  theta_average, ///< b_h(u^{m,theta}, u^{m,theta}, .)
  current,       ///< b_h(u^m, u^{m,theta}, .)     experimental
  previous,      ///< b_h(u^{m-1}, u^{m,theta}, .) experimental
  none           ///< Stokes problem               experimental
};

inline NonlinearArgument parse_nonlinear_argument(const std::string& s)
{
  if (s == "theta_average")
    return NonlinearArgument::theta_average;
  if (s == "current")
    return NonlinearArgument::current;
  if (s == "previous")
    return NonlinearArgument::previous;
  if (s == "none")
    return NonlinearArgument::none;
  throw ConfigError("unknown nonlinearity '" + s + "' (expected theta_average, current, previous or none)");
}

struct SchemeConfig
{
  double theta = 1.0;
  double T = 0.1;
  int N = 10;
  double picard_tol = 1e-12;
  int picard_max_iters = 50;
  NonlinearArgument nonlinearity = NonlinearArgument::theta_average;
  bool force_theta_half = false; ///< unsupported; admits theta = 1/2 for formula exploration only

  double dt() const { return T / N; }
  double time(int m) const { return m * dt(); }

  /// Builds a config from a step size; T must be an integer multiple of dt.
  static SchemeConfig from_step(double theta, double dt, double T)
  {
    if (!(dt > 0.0) || !(T > 0.0))
      throw ConfigError("time step and final time must be positive");
    SchemeConfig c;
    c.theta = theta;
    c.T = T;
    c.N = static_cast<int>(std::llround(T / dt));
    if (c.N < 1 || std::abs(c.N * dt - T) > 1e-14 * T * std::max(1, c.N))
      throw ConfigError("final time " + std::to_string(T) + " is not an integer multiple of dt = " + std::to_string(dt));
    return c;
  }

  void validate() const
  {
    const bool half = theta == 0.5 && force_theta_half;
    if (!half && !(theta > 0.5 && theta <= 1.0)) {
      std::ostringstream msg;
      msg << "theta = " << theta << " is outside the admissible range (1/2, 1]";
      throw ConfigError(msg.str());
    }
    if (N < 1)
      throw ConfigError("number of time steps must be >= 1");
    if (!(T > 0.0))
      throw ConfigError("final time must be positive");
    if (!(picard_tol > 0.0))
      throw ConfigError("picard_tol must be positive");
    if (picard_max_iters < 1)
      throw ConfigError("picard_max_iters must be >= 1");
  }
};

/// Full discrete trajectory. velocities[m] for m = 0..N; pressures[m] for
/// m = 1..N (pressures[0] is empty).
struct SnapshotSequence
{
  SchemeConfig config;
  std::vector<Eigen::VectorXd> velocities;
  std::vector<Eigen::VectorXd> pressures;
  std::vector<int> picard_iterations;       // index m, entry 0 unused
  std::vector<double> picard_residuals;     // index m, entry 0 unused
  std::vector<double> momentum_residuals;   // index m, entry 0 unused

  int steps() const { return static_cast<int>(velocities.size()) - 1; }
  double dt() const { return config.dt(); }
  double theta() const { return config.theta; }

  Field velocity(int m) const { return Field{SpaceKind::velocity, velocities.at(m), true}; }
  Field pressure(int m) const
  {
    if (m < 1)
      throw ConfigError("pressure snapshot m = 0 does not exist");
    return Field{SpaceKind::pressure, pressures.at(m), true};
  }
  Eigen::VectorXd theta_velocity(int m) const
  {
    return theta() * velocities.at(m) + (1.0 - theta()) * velocities.at(m - 1);
  }
};

/// Solver for the velocity-pressure saddle-point system
///   A u - B^T p + C_u^T lambda = f,   -B u = 0,   C_u u = 0,   c_p . p = 0,
/// where C_u holds the Dim velocity-mean functionals and lambda the
/// corresponding multipliers.
///
/// The core [A, -B^T; -B, 0] is solved with the pressure gauge fixed at
/// dof 0 (the rows of B sum to zero, so the pressure-mean multiplier
/// vanishes). The bubble block of A is diagonal (one bubble per cell and
/// component), so bubbles are condensed out exactly and the remaining
/// vertex-velocity/pressure system is factorized by sparse LU; its pattern is
/// analyzed once. The velocity multipliers are eliminated through a Dim x Dim
/// Schur complement and the pressure is shifted to zero mean afterwards.
template <int Dim>
class SaddlePointSolver
{
public:
  explicit SaddlePointSolver(const AssembledForms<Dim>& forms) : forms_(&forms)
  {
    const auto& space = *forms.velocity;
    const int nv = space.mesh().n_vertices();
    const int nc = space.mesh().n_cells();
    const int nu = space.n_dofs();
    Triplets tv, tb;
    for (int c = 0; c < Dim; ++c) {
      for (int v = 0; v < nv; ++v)
        tv.emplace_back(space.dof(c, v), c * nv + v, 1.0);
      for (int k = 0; k < nc; ++k)
        tb.emplace_back(space.dof(c, space.bubble_dof(k)), c * nc + k, 1.0);
    }
    select_v_.resize(nu, Dim * nv);
    select_v_.setFromTriplets(tv.begin(), tv.end());
    select_b_.resize(nu, Dim * nc);
    select_b_.setFromTriplets(tb.begin(), tb.end());
    // pressure dof 0 is pinned: drop its divergence row
    Triplets tp;
    for (int q = 1; q < forms.pressure->n_dofs(); ++q)
      tp.emplace_back(q, q, 1.0);
    SparseMatrix unpin(forms.pressure->n_dofs(), forms.pressure->n_dofs());
    unpin.setFromTriplets(tp.begin(), tp.end());
    b_v_ = unpin * forms.divergence * select_v_;
    b_b_ = unpin * forms.divergence * select_b_;
  }

  void factorize(const SparseMatrix& velocity_block)
  {
    const auto& forms = *forms_;
    const int nr = static_cast<int>(select_v_.cols());
    const int np = forms.pressure->n_dofs();
    const int S = forms.velocity->n_scalar_dofs();

    const SparseMatrix a_bb = select_b_.transpose() * velocity_block * select_b_;
    d_inv_.resize(a_bb.rows());
    for (int k = 0; k < a_bb.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(a_bb, k); it; ++it) {
        if (it.row() != it.col() && it.value() != 0.0)
          throw SolverError("bubble block of the velocity matrix is not diagonal");
        if (it.row() == it.col())
          d_inv_[k] = 1.0 / it.value();
      }
    if (!d_inv_.allFinite())
      throw SolverError("singular bubble block in the velocity matrix");
    a_vb_ = select_v_.transpose() * velocity_block * select_b_;
    a_bv_ = select_b_.transpose() * velocity_block * select_v_;
    const auto dinv = d_inv_.asDiagonal();

    const SparseMatrix a_vv = select_v_.transpose() * velocity_block * select_v_;
    const SparseMatrix bt_v = b_v_.transpose(), bt_b = b_b_.transpose();
    const SparseMatrix r_vv = a_vv - SparseMatrix(a_vb_ * dinv * a_bv_);
    const SparseMatrix r_vp = SparseMatrix(a_vb_ * dinv * bt_b) - bt_v;
    const SparseMatrix r_pv = SparseMatrix(b_b_ * dinv * a_bv_) - b_v_;
    const SparseMatrix r_pp = -SparseMatrix(b_b_ * dinv * bt_b);

    Triplets t;
    t.reserve(r_vv.nonZeros() + r_vp.nonZeros() + r_pv.nonZeros() + r_pp.nonZeros() + 1);
    const auto append = [&t](const SparseMatrix& m, int row0, int col0) {
      for (int k = 0; k < m.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(m, k); it; ++it)
          t.emplace_back(row0 + it.row(), col0 + it.col(), it.value());
    };
    append(r_vv, 0, 0);
    append(r_vp, 0, nr);
    append(r_pv, nr, 0);
    append(r_pp, nr, nr);
    t.emplace_back(nr, nr, 1.0);
    SparseMatrix reduced(nr + np, nr + np);
    reduced.setFromTriplets(t.begin(), t.end());
    reduced.makeCompressed();
    if (!analyzed_ || reduced.nonZeros() != pattern_nnz_) {
      lu_.analyzePattern(reduced);
      analyzed_ = true;
      pattern_nnz_ = reduced.nonZeros();
    }
    lu_.factorize(reduced);
    if (lu_.info() != Eigen::Success)
      throw SolverError("singular saddle-point matrix (" + lu_.lastErrorMessage() + ")");

    const int nu = forms.velocity->n_dofs();
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(nu, Dim);
    for (int c = 0; c < Dim; ++c)
      rhs.col(c).segment(c * S, S) = forms.scalar_integrals;
    border_.resize(nu + np, Dim);
    for (int c = 0; c < Dim; ++c)
      border_.col(c) = solve_core(rhs.col(c));
    Eigen::Matrix<double, Dim, Dim> schur;
    for (int c = 0; c < Dim; ++c)
      for (int r = 0; r < Dim; ++r)
        schur(r, c) = forms.scalar_integrals.dot(border_.col(c).segment(r * S, S));
    schur_ = schur.fullPivLu();
  }

  /// Returns (u, p) stacked; p has zero mean and u has zero component means.
  Eigen::VectorXd solve(const Eigen::VectorXd& velocity_rhs) const
  {
    const auto& forms = *forms_;
    const int np = forms.pressure->n_dofs();
    const int S = forms.velocity->n_scalar_dofs();
    Eigen::VectorXd x = solve_core(velocity_rhs);
    Eigen::Matrix<double, Dim, 1> means;
    for (int r = 0; r < Dim; ++r)
      means[r] = forms.scalar_integrals.dot(x.segment(r * S, S));
    const Eigen::Matrix<double, Dim, 1> lambda = schur_.solve(means);
    x -= border_ * lambda;
    const double pmean = forms.pressure_integrals.dot(x.tail(np)) / forms.pressure_integrals.sum();
    x.tail(np).array() -= pmean;
    return x;
  }

private:
  /// Core solve with zero pressure right-hand side and p_0 = 0.
  Eigen::VectorXd solve_core(const Eigen::VectorXd& velocity_rhs) const
  {
    const int nr = static_cast<int>(select_v_.cols());
    const int nu = static_cast<int>(select_v_.rows());
    const int np = forms_->pressure->n_dofs();
    const Eigen::VectorXd r_v = select_v_.transpose() * velocity_rhs;
    const Eigen::VectorXd r_b = select_b_.transpose() * velocity_rhs;
    const Eigen::VectorXd dr = d_inv_.cwiseProduct(r_b);
    Eigen::VectorXd rhs(nr + np);
    rhs.head(nr) = r_v - a_vb_ * dr;
    rhs.tail(np) = b_b_ * dr;
    rhs[nr] = 0.0;
    const Eigen::VectorXd y = lu_.solve(rhs);
    const Eigen::VectorXd x_v = y.head(nr);
    const Eigen::VectorXd p = y.tail(np);
    const Eigen::VectorXd x_b = d_inv_.cwiseProduct(r_b - a_bv_ * x_v + b_b_.transpose() * p);
    Eigen::VectorXd x(nu + np);
    x.head(nu) = select_v_ * x_v + select_b_ * x_b;
    x.tail(np) = p;
    return x;
  }

  const AssembledForms<Dim>* forms_;
  SparseMatrix select_v_, select_b_; // velocity dofs -> vertex / bubble unknowns
  SparseMatrix b_v_, b_b_;           // divergence with the pinned row removed
  SparseMatrix a_vb_, a_bv_;
  Eigen::VectorXd d_inv_;
  Eigen::SparseLU<SparseMatrix> lu_;
  bool analyzed_ = false;
  Eigen::Index pattern_nnz_ = 0;
  Eigen::MatrixXd border_;
  Eigen::FullPivLU<Eigen::Matrix<double, Dim, Dim>> schur_;
};

enum class InitialProjection
{
  l2,                 ///< L2 projection, then per-component mean removal
  discrete_div_free   ///< L2 projection onto the discretely divergence-free, mean-zero subspace
};

namespace detail {

template <int Dim>
Field project_load(const AssembledForms<Dim>& forms, const Eigen::VectorXd& load, InitialProjection mode)
{
  if (mode == InitialProjection::l2) {
    const L2Projector<Dim> projector(forms);
    Field u{SpaceKind::velocity, projector.solve_velocity_mass(load), false};
    subtract_mean(*forms.velocity, u, forms.scalar_integrals);
    return u;
  }
  SaddlePointSolver<Dim> solver(forms);
  solver.factorize(forms.mass);
  return Field{SpaceKind::velocity, solver.solve(load).head(forms.velocity->n_dofs()), true};
}

} // namespace detail

/// Initial datum u_h^0. With `l2` the divergence constraint is not imposed;
/// `discrete_div_free` projects onto the mean-zero part of V_h.
template <int Dim>
Field project_initial(const AssembledForms<Dim>& forms, const VectorFunction<Dim>& u0,
                      InitialProjection mode = InitialProjection::discrete_div_free)
{
  const L2Projector<Dim> projector(forms);
  const Eigen::VectorXd load =
      projector.velocity_load(VelocityIntegrand<Dim>([&u0](const CellValues<Dim>& cv, int q) { return u0(cv.point(q)); }));
  return detail::project_load(forms, load, mode);
}

template <int Dim>
Field project_initial(const AssembledForms<Dim>& forms, const Field& u0,
                      InitialProjection mode = InitialProjection::discrete_div_free)
{
  if (u0.kind != SpaceKind::velocity || u0.size() != forms.velocity->n_dofs())
    throw ConfigError("project_initial: field does not belong to the velocity space");
  return detail::project_load(forms, Eigen::VectorXd(forms.mass * u0.coefficients), mode);
}

struct StepResult
{
  Field velocity;
  Field pressure;
  int iterations = 0;
  double picard_residual = 0.0;   ///< last relative increment of the Picard iterate
  double momentum_residual = 0.0; ///< scaled dual norm of the momentum residual
};

/// One theta-step per call; the sparsity pattern of the saddle-point
/// matrix is analyzed once and reused for every Picard iteration.
template <int Dim>
class ThetaStepper
{
public:
  ThetaStepper(const AssembledForms<Dim>& forms, const SchemeConfig& config)
    : forms_(&forms), config_(config), dual_(forms), saddle_(forms)
  {
    config.validate();
    const double dt = config.dt();
    base_ = forms.mass / dt + config.theta * forms.stiffness;
  }

  const SchemeConfig& config() const { return config_; }

  StepResult step(const Field& u_prev)
  {
    const auto& forms = *forms_;
    const int nu = forms.velocity->n_dofs();
    const int np = forms.pressure->n_dofs();
    const double dt = config_.dt();
    const double theta = config_.theta;
    const auto mode = config_.nonlinearity;

    Field w = u_prev;
    StepResult result;
    std::vector<double> history;
    const int max_iters = (mode == NonlinearArgument::previous || mode == NonlinearArgument::none)
                              ? 1
                              : config_.picard_max_iters;
    Eigen::VectorXd x;
    bool converged = false;
    for (int it = 1; it <= max_iters; ++it) {
      SparseMatrix conv = mode == NonlinearArgument::none
                              ? SparseMatrix(nu, nu)
                              : block_diagonal(scalar_convection_matrix(forms, w), Dim);
      const SparseMatrix block = base_ + theta * conv;
      const Eigen::VectorXd rhs = forms.mass * u_prev.coefficients / dt -
                                  (1.0 - theta) * (forms.stiffness * u_prev.coefficients + conv * u_prev.coefficients);
      saddle_.factorize(block);
      x = saddle_.solve(rhs);
      result.iterations = it;

      const Eigen::VectorXd u_new = x.head(nu);
      Eigen::VectorXd w_next;
      switch (mode) {
        case NonlinearArgument::theta_average: w_next = theta * u_new + (1.0 - theta) * u_prev.coefficients; break;
        case NonlinearArgument::current: w_next = u_new; break;
        case NonlinearArgument::previous:
        case NonlinearArgument::none: w_next = w.coefficients; break;
      }
      const Eigen::VectorXd diff = w_next - w.coefficients;
      const double dnorm = std::sqrt(std::max(0.0, diff.dot(forms.mass * diff)));
      const double wnorm = std::sqrt(std::max(0.0, w_next.dot(forms.mass * w_next)));
      const double rel = wnorm > 0.0 ? dnorm / wnorm : dnorm;
      history.push_back(rel);
      result.picard_residual = rel;
      if (mode == NonlinearArgument::previous || mode == NonlinearArgument::none || dnorm <= config_.picard_tol * wnorm) {
        converged = true;
        break;
      }
      w.coefficients = w_next;
    }
    if (!converged) {
      std::ostringstream msg;
      msg << "Picard iteration did not converge in " << max_iters << " iterations (last relative increment "
          << history.back() << "); residual history:";
      for (double r : history)
        msg << ' ' << r;
      msg << ". Try a smaller time step.";
      throw SolverError(msg.str());
    }
    result.velocity = Field{SpaceKind::velocity, x.head(nu), true};
    result.pressure = Field{SpaceKind::pressure, x.segment(nu, np), true};
    result.momentum_residual = momentum_residual(u_prev, result.velocity, result.pressure);
    return result;
  }

  /// Scaled discrete dual norm of the momentum residual of a candidate step,
  /// evaluated with the scheme's nominal first argument of b_h.
  double momentum_residual(const Field& u_prev, const Field& u_new, const Field& p_new) const
  {
    const auto& forms = *forms_;
    const double theta = config_.theta;
    const double dt = config_.dt();
    const Field u_theta{SpaceKind::velocity, theta * u_new.coefficients + (1.0 - theta) * u_prev.coefficients, true};
    const Eigen::VectorXd time_term = forms.mass * (u_new.coefficients - u_prev.coefficients) / dt;
    const Eigen::VectorXd visc = forms.stiffness * u_theta.coefficients;
    const Eigen::VectorXd pres = -forms.divergence.transpose() * p_new.coefficients;
    Eigen::VectorXd nl = Eigen::VectorXd::Zero(time_term.size());
    switch (config_.nonlinearity) {
      case NonlinearArgument::theta_average: nl = apply_nl(forms, u_theta, u_theta); break;
      case NonlinearArgument::current: nl = apply_nl(forms, u_new, u_theta); break;
      case NonlinearArgument::previous: nl = apply_nl(forms, u_prev, u_theta); break;
      case NonlinearArgument::none: break;
    }
    const double r = dual_.norm(time_term + visc + nl + pres);
    const double scale = dual_.norm(time_term) + dual_.norm(visc) + dual_.norm(nl) + dual_.norm(pres);
    return scale > 0.0 ? r / scale : r;
  }

private:
  const AssembledForms<Dim>* forms_;
  SchemeConfig config_;
  DualNormSolver<Dim> dual_;
  SaddlePointSolver<Dim> saddle_;
  SparseMatrix base_;
};

template <int Dim>
StepResult theta_step(const Field& u_prev, const AssembledForms<Dim>& forms, const SchemeConfig& config)
{
  ThetaStepper<Dim> stepper(forms, config);
  return stepper.step(u_prev);
}

template <int Dim>
SnapshotSequence run_scheme(const AssembledForms<Dim>& forms, const Field& u0, const SchemeConfig& config)
{
  config.validate();
  ThetaStepper<Dim> stepper(forms, config);
  SnapshotSequence seq;
  seq.config = config;
  seq.velocities.push_back(u0.coefficients);
  seq.pressures.emplace_back();
  seq.picard_iterations.push_back(0);
  seq.picard_residuals.push_back(0.0);
  seq.momentum_residuals.push_back(0.0);
  Field u = u0;
  for (int m = 1; m <= config.N; ++m) {
    StepResult r;
    try {
      r = stepper.step(u);
    } catch (const SolverError& e) {
      throw SolverError("step m = " + std::to_string(m) + " (t = " + std::to_string(config.time(m)) + "): " + e.what());
    }
    seq.velocities.push_back(r.velocity.coefficients);
    seq.pressures.push_back(r.pressure.coefficients);
    seq.picard_iterations.push_back(r.iterations);
    seq.picard_residuals.push_back(r.picard_residual);
    seq.momentum_residuals.push_back(r.momentum_residual);
    u = r.velocity;
  }
  return seq;
}

} // namespace thnse
