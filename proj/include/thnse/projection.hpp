#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>

#include "thnse/error.hpp"
#include "thnse/operators.hpp"
#include "thnse/spaces.hpp"

namespace thnse {

/// Smooth scalar multiplier with closed-form gradient, e.g. 1 + cos(x_1)/2.
template <int Dim>
struct SmoothScalar
{
  using Point = Eigen::Matrix<double, Dim, 1>;
  std::function<double(const Point&)> value;
  std::function<Point(const Point&)> gradient;

  static SmoothScalar constant(double c)
  {
    return {[c](const Point&) { return c; }, [](const Point&) { return Point::Zero().eval(); }};
  }

  /// 1 + amplitude * cos(x_1)
  static SmoothScalar cosine_bump(double amplitude = 0.5)
  {
    return {[amplitude](const Point& x) { return 1.0 + amplitude * std::cos(x[0]); },
            [amplitude](const Point& x) {
              Point g = Point::Zero();
              g[0] = -amplitude * std::sin(x[0]);
              return g;
            }};
  }
};

/// Velocity integrand evaluated at a quadrature point of the current cell.
template <int Dim>
using VelocityIntegrand = std::function<Eigen::Matrix<double, Dim, 1>(const CellValues<Dim>&, int)>;

template <int Dim>
using ScalarIntegrand = std::function<double(const CellValues<Dim>&, int)>;

/// L2 projections onto the full (not mean-corrected) velocity and pressure
/// spaces. Holds the factorized scalar velocity mass and pressure mass.
template <int Dim>
class L2Projector
{
public:
  explicit L2Projector(const AssembledForms<Dim>& forms) : forms_(&forms)
  {
    velocity_mass_.compute(forms.scalar_mass);
    pressure_mass_.compute(forms.pressure_mass);
    if (velocity_mass_.info() != Eigen::Success || pressure_mass_.info() != Eigen::Success)
      throw SolverError("L2Projector: singular mass matrix");
  }

  const AssembledForms<Dim>& forms() const { return *forms_; }

  /// Load vector (f, phi_j) for a pointwise velocity integrand f.
  Eigen::VectorXd velocity_load(const VelocityIntegrand<Dim>& f) const
  {
    const auto& space = *forms_->velocity;
    Eigen::VectorXd r = Eigen::VectorXd::Zero(space.n_dofs());
    CellValues<Dim> cv(space.mesh(), *forms_->quadrature);
    for (int cell = 0; cell < space.mesh().n_cells(); ++cell) {
      cv.reinit(cell);
      const auto dofs = space.local_scalar_dofs(cell);
      for (int q = 0; q < cv.n_quadrature_points(); ++q) {
        const auto fq = f(cv, q);
        for (int k = 0; k < Dim + 2; ++k) {
          const double phi = cv.value(k, q) * cv.JxW(q);
          for (int c = 0; c < Dim; ++c)
            r[space.dof(c, dofs[k])] += fq[c] * phi;
        }
      }
    }
    return r;
  }

  Eigen::VectorXd pressure_load(const ScalarIntegrand<Dim>& f) const
  {
    const auto& space = *forms_->pressure;
    Eigen::VectorXd r = Eigen::VectorXd::Zero(space.n_dofs());
    CellValues<Dim> cv(space.mesh(), *forms_->quadrature);
    for (int cell = 0; cell < space.mesh().n_cells(); ++cell) {
      cv.reinit(cell);
      const auto dofs = space.local_dofs(cell);
      for (int q = 0; q < cv.n_quadrature_points(); ++q) {
        const double fq = f(cv, q) * cv.JxW(q);
        for (int k = 0; k <= Dim; ++k)
          r[dofs[k]] += fq * cv.value(k, q);
      }
    }
    return r;
  }

  /// Solve M x = r for a velocity load vector.
  Eigen::VectorXd solve_velocity_mass(const Eigen::VectorXd& r) const
  {
    const int S = forms_->velocity->n_scalar_dofs();
    Eigen::VectorXd x(r.size());
    for (int c = 0; c < Dim; ++c)
      x.segment(c * S, S) = velocity_mass_.solve(r.segment(c * S, S));
    return x;
  }

  Eigen::VectorXd solve_pressure_mass(const Eigen::VectorXd& r) const { return pressure_mass_.solve(r); }

  Field project_velocity(const VelocityIntegrand<Dim>& f) const
  {
    return Field{SpaceKind::velocity, solve_velocity_mass(velocity_load(f)), false};
  }

  Field project_velocity(const VectorFunction<Dim>& f) const
  {
    return project_velocity(VelocityIntegrand<Dim>([&f](const CellValues<Dim>& cv, int q) { return f(cv.point(q)); }));
  }

  Field project_velocity(const Field& w) const
  {
    if (w.kind != SpaceKind::velocity || w.size() != forms_->velocity->n_dofs())
      throw ConfigError("l2_project_velocity: field does not belong to the velocity space");
    return Field{SpaceKind::velocity, solve_velocity_mass(forms_->mass * w.coefficients), w.mean_zero};
  }

  Field project_pressure(const ScalarIntegrand<Dim>& f) const
  {
    return Field{SpaceKind::pressure, solve_pressure_mass(pressure_load(f)), false};
  }

  Field project_pressure(const ScalarFunction<Dim>& f) const
  {
    return project_pressure(ScalarIntegrand<Dim>([&f](const CellValues<Dim>& cv, int q) { return f(cv.point(q)); }));
  }

  Field project_pressure(const Field& q) const
  {
    if (q.kind != SpaceKind::pressure || q.size() != forms_->pressure->n_dofs())
      throw ConfigError("l2_project_pressure: field does not belong to the pressure space");
    return Field{SpaceKind::pressure, solve_pressure_mass(forms_->pressure_mass * q.coefficients), q.mean_zero};
  }

  /// Residual max_b |(result - w, b)| relative to max_b |(w, b)|.
  double velocity_orthogonality_residual(const Field& result, const Eigen::VectorXd& load) const
  {
    const double scale = std::max(load.cwiseAbs().maxCoeff(), 1e-300);
    return (forms_->mass * result.coefficients - load).cwiseAbs().maxCoeff() / scale;
  }

private:
  const AssembledForms<Dim>* forms_;
  Eigen::SimplicialLDLT<SparseMatrix> velocity_mass_;
  Eigen::SimplicialLDLT<SparseMatrix> pressure_mass_;
};

template <int Dim>
Field l2_project_velocity(const AssembledForms<Dim>& forms, const VectorFunction<Dim>& f)
{
  return L2Projector<Dim>(forms).project_velocity(f);
}

template <int Dim>
Field l2_project_velocity(const AssembledForms<Dim>& forms, const Field& w)
{
  return L2Projector<Dim>(forms).project_velocity(w);
}

template <int Dim>
Field l2_project_pressure(const AssembledForms<Dim>& forms, const ScalarFunction<Dim>& f)
{
  return L2Projector<Dim>(forms).project_pressure(f);
}

template <int Dim>
Field l2_project_pressure(const AssembledForms<Dim>& forms, const Field& q)
{
  return L2Projector<Dim>(forms).project_pressure(q);
}

/// ||v_h phi - P_h(v_h phi)||_{H^l} with the product integrated directly
/// at quadrature points. m only selects the admissible (l, m) pair.
template <int Dim>
double commutator_defect(const L2Projector<Dim>& projector, const Field& v, const SmoothScalar<Dim>& phi, int l,
                         int m)
{
  if (l < 0 || l > 1 || m < 0 || m > 1)
    throw ConfigError("commutator_defect: l and m must be 0 or 1");
  if (l > m)
    throw ConfigError("commutator_defect: requires l <= m");
  const auto& forms = projector.forms();
  const auto& space = *forms.velocity;
  VelocityEvaluator<Dim> ev(space, v.coefficients);
  const Field proj = projector.project_velocity(VelocityIntegrand<Dim>([&](const CellValues<Dim>& cv, int q) {
    ev.reinit(cv.cell());
    return (ev.value(cv, q) * phi.value(cv.point(q))).eval();
  }));
  CellValues<Dim> cv(space.mesh(), *forms.quadrature);
  VelocityEvaluator<Dim> ep(space, proj.coefficients);
  double l2 = 0.0, semi = 0.0;
  for (int cell = 0; cell < space.mesh().n_cells(); ++cell) {
    cv.reinit(cell);
    ev.reinit(cell);
    ep.reinit(cell);
    for (int q = 0; q < cv.n_quadrature_points(); ++q) {
      const auto x = cv.point(q);
      const double f = phi.value(x);
      const auto vq = ev.value(cv, q);
      const auto e = (vq * f - ep.value(cv, q)).eval();
      l2 += e.squaredNorm() * cv.JxW(q);
      if (l == 1) {
        const auto ge = (ev.gradient(cv, q) * f + vq * phi.gradient(x).transpose() - ep.gradient(cv, q)).eval();
        semi += ge.squaredNorm() * cv.JxW(q);
      }
    }
  }
  return std::sqrt(l2 + semi);
}

/// ||q_h phi - Q_h(q_h phi)||_2.
template <int Dim>
double pressure_commutator_defect(const L2Projector<Dim>& projector, const Field& p, const SmoothScalar<Dim>& phi)
{
  const auto& forms = projector.forms();
  const auto& space = *forms.pressure;
  PressureEvaluator<Dim> ev(space, p.coefficients);
  const Field proj = projector.project_pressure(ScalarIntegrand<Dim>([&](const CellValues<Dim>& cv, int q) {
    ev.reinit(cv.cell());
    return ev.value(cv, q) * phi.value(cv.point(q));
  }));
  CellValues<Dim> cv(space.mesh(), *forms.quadrature);
  PressureEvaluator<Dim> ep(space, proj.coefficients);
  double l2 = 0.0;
  for (int cell = 0; cell < space.mesh().n_cells(); ++cell) {
    cv.reinit(cell);
    ev.reinit(cell);
    ep.reinit(cell);
    for (int q = 0; q < cv.n_quadrature_points(); ++q) {
      const double e = ev.value(cv, q) * phi.value(cv.point(q)) - ep.value(cv, q);
      l2 += e * e * cv.JxW(q);
    }
  }
  return std::sqrt(l2);
}

struct InverseProbeOptions
{
  int samples = 50;
  std::uint64_t seed = 20240607;
  bool exact = false; ///< largest generalized eigenvalue instead of random sampling
};

/// max over sampled fields of h ||v||_{H1} / ||v||_2.
template <int Dim>
double inverse_constant_probe(const AssembledForms<Dim>& forms, const InverseProbeOptions& options = {})
{
  const auto& space = *forms.velocity;
  const double h = space.mesh().h();
  const SparseMatrix h1 = forms.scalar_stiffness + forms.scalar_mass;
  if (options.exact) {
    // power iteration on M^{-1}(K+M) for one scalar block (all blocks equal)
    Eigen::SimplicialLDLT<SparseMatrix> mass(forms.scalar_mass);
    Eigen::VectorXd x = Eigen::VectorXd::Ones(space.n_scalar_dofs());
    x[0] = 2.0;
    double lambda = 0.0;
    for (int it = 0; it < 5000; ++it) {
      Eigen::VectorXd y = mass.solve(h1 * x);
      const double next = x.dot(h1 * x) / x.dot(forms.scalar_mass * x);
      x = y / y.norm();
      if (std::abs(next - lambda) <= 1e-13 * next) {
        lambda = next;
        break;
      }
      lambda = next;
    }
    return h * std::sqrt(lambda);
  }
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  const SparseMatrix h1_full = forms.stiffness + forms.mass;
  double worst = 0.0;
  for (int s = 0; s < options.samples; ++s) {
    Eigen::VectorXd v(space.n_dofs());
    for (Eigen::Index i = 0; i < v.size(); ++i)
      v[i] = dist(rng);
    const double ratio = h * std::sqrt(v.dot(h1_full * v) / v.dot(forms.mass * v));
    worst = std::max(worst, ratio);
  }
  return worst;
}

/// Ratio h ||v||_{H1} / ||v||_2 for one given field.
template <int Dim>
double inverse_ratio(const AssembledForms<Dim>& forms, const Field& v)
{
  const double m = v.coefficients.dot(forms.mass * v.coefficients);
  const double k = v.coefficients.dot(forms.stiffness * v.coefficients);
  return forms.velocity->mesh().h() * std::sqrt((m + k) / m);
}

/// min over mean-zero q_h of ||pi_h grad q_h||_2 / ||q_h||_2, from the
/// smallest generalized eigenvalue of (B M^{-1} B^T, M_p) restricted to the
/// mean-zero pressure subspace. Dense; intended for desk-scale meshes.
template <int Dim>
double coercivity_probe(const AssembledForms<Dim>& forms)
{
  const int P = forms.pressure->n_dofs();
  if (P < 2)
    throw ConfigError("coercivity_probe: mean-zero pressure space is trivial (n = 1)");
  const L2Projector<Dim> projector(forms);
  const Eigen::MatrixXd bt = Eigen::MatrixXd(forms.divergence.transpose());
  Eigen::MatrixXd minv_bt(bt.rows(), bt.cols());
  for (int j = 0; j < P; ++j)
    minv_bt.col(j) = projector.solve_velocity_mass(bt.col(j));
  const Eigen::MatrixXd a = Eigen::MatrixXd(forms.divergence) * minv_bt;
  const Eigen::MatrixXd mp = Eigen::MatrixXd(forms.pressure_mass);
  // basis of the mean-zero subspace: e_i - (w_i / w_last) e_last
  const Eigen::VectorXd& w = forms.pressure_integrals;
  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(P, P - 1);
  for (int i = 0; i < P - 1; ++i) {
    z(i, i) = 1.0;
    z(P - 1, i) = -w[i] / w[P - 1];
  }
  const Eigen::MatrixXd az = z.transpose() * a * z;
  const Eigen::MatrixXd mz = z.transpose() * mp * z;
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (az + az.transpose()),
                                                                 0.5 * (mz + mz.transpose()), Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success)
    throw SolverError("coercivity_probe: eigenvalue solve failed");
  return std::sqrt(std::max(0.0, eig.eigenvalues().minCoeff()));
}

} // namespace thnse
