#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <cmath>
#include <string>
#include <vector>

#include "thnse/error.hpp"
#include "thnse/quadrature.hpp"
#include "thnse/spaces.hpp"

namespace thnse {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplets = std::vector<Eigen::Triplet<double>>;

/// Replicates a scalar operator on each of `copies` diagonal blocks.
inline SparseMatrix block_diagonal(const SparseMatrix& block, int copies)
{
  Triplets t;
  t.reserve(block.nonZeros() * copies);
  for (int c = 0; c < copies; ++c)
    for (int k = 0; k < block.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(block, k); it; ++it)
        t.emplace_back(c * block.rows() + it.row(), c * block.cols() + it.col(), it.value());
  SparseMatrix m(block.rows() * copies, block.cols() * copies);
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

/// Mass, stiffness, divergence coupling and mean functionals of the MINI pair.
template <int Dim>
struct AssembledForms
{
  const VelocitySpace<Dim>* velocity = nullptr;
  const PressureSpace<Dim>* pressure = nullptr;
  const SimplexQuadrature<Dim>* quadrature = nullptr;

  SparseMatrix scalar_mass;      // S x S
  SparseMatrix scalar_stiffness; // S x S
  SparseMatrix mass;             // Dim*S x Dim*S
  SparseMatrix stiffness;        // Dim*S x Dim*S, componentwise Laplacian
  SparseMatrix divergence;       // P x Dim*S, (B u)_q = (div u, q)
  SparseMatrix pressure_mass;    // P x P
  Eigen::VectorXd scalar_integrals;   // integral of each scalar velocity shape function
  Eigen::VectorXd pressure_integrals; // integral of each pressure shape function

  /// Mean-constraint rows: Dim velocity component functionals then one
  /// pressure functional, stacked over (velocity, pressure) unknowns.
  Eigen::MatrixXd mean_constraints() const
  {
    const int S = velocity->n_scalar_dofs();
    const int nu = velocity->n_dofs();
    const int np = pressure->n_dofs();
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(Dim + 1, nu + np);
    for (int k = 0; k < Dim; ++k)
      c.block(k, k * S, 1, S) = scalar_integrals.transpose();
    c.block(Dim, nu, 1, np) = pressure_integrals.transpose();
    return c;
  }
};

template <int Dim>
AssembledForms<Dim> assemble_forms(const VelocitySpace<Dim>& velocity, const PressureSpace<Dim>& pressure,
                                   const SimplexQuadrature<Dim>& quadrature)
{
  if (&velocity.mesh() != &pressure.mesh())
    throw ConfigError("assemble_forms: velocity and pressure spaces live on different meshes");
  if (quadrature.degree() < minimum_quadrature_degree<Dim>())
    throw ConfigError("assemble_forms: quadrature degree " + std::to_string(quadrature.degree()) +
                      " is below the exactness floor " + std::to_string(minimum_quadrature_degree<Dim>()) +
                      " required for the skew-symmetric trilinear form");

  const auto& mesh = velocity.mesh();
  const int S = velocity.n_scalar_dofs();
  const int P = pressure.n_dofs();
  constexpr int nl = Dim + 2;

  Triplets tm, tk, tb, tp;
  tm.reserve(mesh.n_cells() * nl * nl);
  tk.reserve(mesh.n_cells() * nl * nl);
  tb.reserve(mesh.n_cells() * Dim * nl * (Dim + 1));
  tp.reserve(mesh.n_cells() * (Dim + 1) * (Dim + 1));

  CellValues<Dim> cv(mesh, quadrature);
  for (int cell = 0; cell < mesh.n_cells(); ++cell) {
    cv.reinit(cell);
    const auto vd = velocity.local_scalar_dofs(cell);
    const auto pd = pressure.local_dofs(cell);
    Eigen::Matrix<double, nl, nl> lm = Eigen::Matrix<double, nl, nl>::Zero();
    Eigen::Matrix<double, nl, nl> lk = Eigen::Matrix<double, nl, nl>::Zero();
    Eigen::Matrix<double, Dim + 1, Dim + 1> lp = Eigen::Matrix<double, Dim + 1, Dim + 1>::Zero();
    // lb[c](i, j) = int d_c phi_j * psi_i
    std::array<Eigen::Matrix<double, Dim + 1, nl>, Dim> lb;
    for (auto& b : lb)
      b.setZero();
    for (int q = 0; q < cv.n_quadrature_points(); ++q) {
      const double w = cv.JxW(q);
      for (int i = 0; i < nl; ++i)
        for (int j = 0; j < nl; ++j) {
          lm(i, j) += cv.value(i, q) * cv.value(j, q) * w;
          lk(i, j) += cv.gradient(i, q).dot(cv.gradient(j, q)) * w;
        }
      for (int i = 0; i <= Dim; ++i) {
        for (int j = 0; j <= Dim; ++j)
          lp(i, j) += cv.value(i, q) * cv.value(j, q) * w;
        for (int j = 0; j < nl; ++j)
          for (int c = 0; c < Dim; ++c)
            lb[c](i, j) += cv.gradient(j, q)[c] * cv.value(i, q) * w;
      }
    }
    for (int i = 0; i < nl; ++i)
      for (int j = 0; j < nl; ++j) {
        tm.emplace_back(vd[i], vd[j], lm(i, j));
        tk.emplace_back(vd[i], vd[j], lk(i, j));
      }
    for (int i = 0; i <= Dim; ++i) {
      for (int j = 0; j <= Dim; ++j)
        tp.emplace_back(pd[i], pd[j], lp(i, j));
      for (int c = 0; c < Dim; ++c)
        for (int j = 0; j < nl; ++j)
          tb.emplace_back(pd[i], velocity.dof(c, vd[j]), lb[c](i, j));
    }
  }

  AssembledForms<Dim> forms;
  forms.velocity = &velocity;
  forms.pressure = &pressure;
  forms.quadrature = &quadrature;
  forms.scalar_mass.resize(S, S);
  forms.scalar_mass.setFromTriplets(tm.begin(), tm.end());
  forms.scalar_stiffness.resize(S, S);
  forms.scalar_stiffness.setFromTriplets(tk.begin(), tk.end());
  forms.mass = block_diagonal(forms.scalar_mass, Dim);
  forms.stiffness = block_diagonal(forms.scalar_stiffness, Dim);
  forms.divergence.resize(P, Dim * S);
  forms.divergence.setFromTriplets(tb.begin(), tb.end());
  forms.pressure_mass.resize(P, P);
  forms.pressure_mass.setFromTriplets(tp.begin(), tp.end());
  forms.scalar_integrals = scalar_velocity_integrals(velocity, quadrature);
  forms.pressure_integrals = pressure_integrals(pressure, quadrature);
  return forms;
}

/// Dual vector w -> b_h(u, v, w) with nl_h(u, v) = (u.grad) v + 1/2 v div u.
template <int Dim>
Eigen::VectorXd apply_nl(const AssembledForms<Dim>& forms, const Field& u, const Field& v)
{
  const auto& space = *forms.velocity;
  if (u.size() != space.n_dofs() || v.size() != space.n_dofs() || u.kind != SpaceKind::velocity ||
      v.kind != SpaceKind::velocity)
    throw ConfigError("apply_nl: fields do not belong to the velocity space");
  Eigen::VectorXd r = Eigen::VectorXd::Zero(space.n_dofs());
  CellValues<Dim> cv(space.mesh(), *forms.quadrature);
  VelocityEvaluator<Dim> eu(space, u.coefficients), ev(space, v.coefficients);
  for (int cell = 0; cell < space.mesh().n_cells(); ++cell) {
    cv.reinit(cell);
    eu.reinit(cell);
    ev.reinit(cell);
    const auto dofs = space.local_scalar_dofs(cell);
    for (int q = 0; q < cv.n_quadrature_points(); ++q) {
      const auto uq = eu.value(cv, q);
      const auto vq = ev.value(cv, q);
      const auto gu = eu.gradient(cv, q);
      const auto gv = ev.gradient(cv, q);
      const Eigen::Matrix<double, Dim, 1> nl = gv * uq + 0.5 * gu.trace() * vq;
      for (int k = 0; k < Dim + 2; ++k) {
        const double phi = cv.value(k, q) * cv.JxW(q);
        for (int c = 0; c < Dim; ++c)
          r[space.dof(c, dofs[k])] += nl[c] * phi;
      }
    }
  }
  return r;
}

/// b_h(u, v, w) as a scalar.
template <int Dim>
double trilinear(const AssembledForms<Dim>& forms, const Field& u, const Field& v, const Field& w)
{
  return apply_nl(forms, u, v).dot(w.coefficients);
}

/// Scalar block of the linear map v -> b_h(w, v, .):
/// N(i, j) = int (w . grad phi_j + 1/2 div w phi_j) phi_i. The sparsity
/// pattern equals that of the scalar mass matrix for every w.
template <int Dim>
SparseMatrix scalar_convection_matrix(const AssembledForms<Dim>& forms, const Field& w)
{
  const auto& space = *forms.velocity;
  constexpr int nl = Dim + 2;
  Triplets t;
  t.reserve(space.mesh().n_cells() * nl * nl);
  CellValues<Dim> cv(space.mesh(), *forms.quadrature);
  VelocityEvaluator<Dim> ew(space, w.coefficients);
  for (int cell = 0; cell < space.mesh().n_cells(); ++cell) {
    cv.reinit(cell);
    ew.reinit(cell);
    const auto dofs = space.local_scalar_dofs(cell);
    Eigen::Matrix<double, nl, nl> local = Eigen::Matrix<double, nl, nl>::Zero();
    for (int q = 0; q < cv.n_quadrature_points(); ++q) {
      const auto wq = ew.value(cv, q);
      const double half_div = 0.5 * ew.gradient(cv, q).trace();
      for (int j = 0; j < nl; ++j) {
        const double a = (wq.dot(cv.gradient(j, q)) + half_div * cv.value(j, q)) * cv.JxW(q);
        for (int i = 0; i < nl; ++i)
          local(i, j) += a * cv.value(i, q);
      }
    }
    for (int i = 0; i < nl; ++i)
      for (int j = 0; j < nl; ++j)
        t.emplace_back(dofs[i], dofs[j], local(i, j));
  }
  SparseMatrix n(space.n_scalar_dofs(), space.n_scalar_dofs());
  n.setFromTriplets(t.begin(), t.end());
  return n;
}

/// Discrete H^{-1} norm on mean-zero velocity fields: sup over mean-zero
/// w of r.w / ||w||_{H1}, i.e. sqrt(r^T (K+M)^{-1} r) on the constrained
/// space. Factorizes the scalar K+M once; the mean constraint is handled
/// by a rank-one Schur complement per component.
template <int Dim>
class DualNormSolver
{
public:
  explicit DualNormSolver(const AssembledForms<Dim>& forms)
    : S_(forms.velocity->n_scalar_dofs()), c_(forms.scalar_integrals)
  {
    SparseMatrix a = forms.scalar_stiffness + forms.scalar_mass;
    solver_.compute(a);
    if (solver_.info() != Eigen::Success)
      throw SolverError("DualNormSolver: factorization of K+M failed");
    ainv_c_ = solver_.solve(c_);
    c_ainv_c_ = c_.dot(ainv_c_);
  }

  /// Mean-zero H1-Riesz representative of the functional r.
  Eigen::VectorXd riesz(const Eigen::VectorXd& r) const
  {
    Eigen::VectorXd z(r.size());
    for (int comp = 0; comp < Dim; ++comp) {
      const Eigen::VectorXd rc = r.segment(comp * S_, S_);
      Eigen::VectorXd y = solver_.solve(rc);
      const double lambda = c_.dot(y) / c_ainv_c_;
      z.segment(comp * S_, S_) = y - lambda * ainv_c_;
    }
    return z;
  }

  double norm(const Eigen::VectorXd& r) const { return std::sqrt(std::max(0.0, r.dot(riesz(r)))); }

private:
  int S_;
  Eigen::VectorXd c_;
  Eigen::VectorXd ainv_c_;
  double c_ainv_c_ = 1.0;
  Eigen::SimplicialLDLT<SparseMatrix> solver_;
};

struct NlDualNorm
{
  double dual_norm = 0.0; ///< discrete ||nl_h(u, v)||_{H^-1}
  double bound = 0.0;     ///< ||u||_{L3} ||v||_{H1}
};

template <int Dim>
NlDualNorm nl_dual_norm(const AssembledForms<Dim>& forms, const Field& u, const Field& v)
{
  const DualNormSolver<Dim> solver(forms);
  NlDualNorm out;
  out.dual_norm = solver.norm(apply_nl(forms, u, v));
  out.bound = norm(*forms.velocity, u, NormKind::L3, *forms.quadrature) *
              norm(*forms.velocity, v, NormKind::H1, *forms.quadrature);
  return out;
}

} // namespace thnse
