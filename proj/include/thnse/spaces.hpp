#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "thnse/error.hpp"
#include "thnse/mesh.hpp"
#include "thnse/quadrature.hpp"

namespace thnse {

enum class SpaceKind
{
  velocity,
  pressure
};

/// Coefficient vector over one of the two finite element spaces.
struct Field
{
  SpaceKind kind = SpaceKind::velocity;
  Eigen::VectorXd coefficients;
  bool mean_zero = false;

  Eigen::Index size() const { return coefficients.size(); }
};

/// Scalar MINI layout shared by every velocity component: one dof per
/// vertex followed by one bubble dof per cell. Local shape functions on a
/// cell are lambda_0..lambda_Dim and the bubble (Dim+1)^(Dim+1) prod lambda_i.
template <int Dim>
class VelocitySpace
{
public:
  static constexpr int n_local = Dim + 2;

  explicit VelocitySpace(const PeriodicMesh<Dim>& mesh) : mesh_(&mesh) {}

  const PeriodicMesh<Dim>& mesh() const { return *mesh_; }
  int n_scalar_dofs() const { return mesh_->n_vertices() + mesh_->n_cells(); }
  int n_dofs() const { return Dim * n_scalar_dofs(); }
  int n_components() const { return Dim; }
  int dof(int component, int scalar_dof) const { return component * n_scalar_dofs() + scalar_dof; }
  int bubble_dof(int cell) const { return mesh_->n_vertices() + cell; }

  std::array<int, n_local> local_scalar_dofs(int cell) const
  {
    std::array<int, n_local> d{};
    const auto& c = mesh_->cell(cell);
    for (int i = 0; i <= Dim; ++i)
      d[i] = c.vertices[i];
    d[Dim + 1] = bubble_dof(cell);
    return d;
  }

  Field zero() const { return Field{SpaceKind::velocity, Eigen::VectorXd::Zero(n_dofs()), true}; }

  bool same_mesh(const PeriodicMesh<Dim>& other) const { return mesh_ == &other; }

private:
  const PeriodicMesh<Dim>* mesh_;
};

/// Continuous piecewise-linear pressure space: one dof per vertex.
template <int Dim>
class PressureSpace
{
public:
  static constexpr int n_local = Dim + 1;

  explicit PressureSpace(const PeriodicMesh<Dim>& mesh) : mesh_(&mesh) {}

  const PeriodicMesh<Dim>& mesh() const { return *mesh_; }
  int n_dofs() const { return mesh_->n_vertices(); }

  std::array<int, n_local> local_dofs(int cell) const { return mesh_->cell(cell).vertices; }

  Field zero() const { return Field{SpaceKind::pressure, Eigen::VectorXd::Zero(n_dofs()), true}; }

  bool same_mesh(const PeriodicMesh<Dim>& other) const { return mesh_ == &other; }

private:
  const PeriodicMesh<Dim>* mesh_;
};

/// Shape function values, physical gradients, quadrature points and JxW on
/// one cell. Local index k < Dim+1 is the vertex function lambda_k; k = Dim+1
/// is the bubble. Pressure shape functions are the first Dim+1 entries.
template <int Dim>
class CellValues
{
public:
  using Point = Eigen::Matrix<double, Dim, 1>;
  static constexpr int n_shape = Dim + 2;
  static constexpr double bubble_scale = Dim == 2 ? 27.0 : 256.0;

  CellValues(const PeriodicMesh<Dim>& mesh, const SimplexQuadrature<Dim>& quadrature)
    : mesh_(&mesh), quadrature_(&quadrature)
  {
    const int nq = quadrature.size();
    values_.resize(nq);
    others_.resize(nq);
    grads_.resize(nq);
    points_.resize(nq);
    jxw_.resize(nq);
    for (int q = 0; q < nq; ++q) {
      const auto& lam = quadrature.barycentric(q);
      double prod = 1.0;
      for (int i = 0; i <= Dim; ++i) {
        values_[q][i] = lam[i];
        prod *= lam[i];
        double other = 1.0;
        for (int j = 0; j <= Dim; ++j)
          if (j != i)
            other *= lam[j];
        others_[q][i] = bubble_scale * other;
      }
      values_[q][Dim + 1] = bubble_scale * prod;
    }
  }

  void reinit(int cell)
  {
    cell_ = cell;
    geometry_ = mesh_->geometry(cell);
    const auto lam_grad = geometry_.barycentric_gradients();
    for (int q = 0; q < n_quadrature_points(); ++q) {
      Point bubble = Point::Zero();
      for (int i = 0; i <= Dim; ++i) {
        grads_[q][i] = lam_grad[i];
        bubble += others_[q][i] * lam_grad[i];
      }
      grads_[q][Dim + 1] = bubble;
      points_[q] = geometry_.map(quadrature_->point(q));
      jxw_[q] = quadrature_->weight(q) * std::abs(geometry_.det);
    }
  }

  int cell() const { return cell_; }
  int n_quadrature_points() const { return quadrature_->size(); }
  double value(int k, int q) const { return values_[q][k]; }
  const Point& gradient(int k, int q) const { return grads_[q][k]; }
  const Point& point(int q) const { return points_[q]; }
  double JxW(int q) const { return jxw_[q]; }
  const CellGeometry<Dim>& geometry() const { return geometry_; }
  const SimplexQuadrature<Dim>& quadrature() const { return *quadrature_; }

private:
  const PeriodicMesh<Dim>* mesh_;
  const SimplexQuadrature<Dim>* quadrature_;
  std::vector<std::array<double, n_shape>> values_;
  std::vector<std::array<double, Dim + 1>> others_;
  std::vector<std::array<Point, n_shape>> grads_;
  std::vector<Point> points_;
  std::vector<double> jxw_;
  CellGeometry<Dim> geometry_;
  int cell_ = -1;
};

/// Pointwise evaluation of a velocity coefficient vector on the current cell.
template <int Dim>
struct VelocityEvaluator
{
  using Point = Eigen::Matrix<double, Dim, 1>;
  using Matrix = Eigen::Matrix<double, Dim, Dim>;

  const VelocitySpace<Dim>& space;
  const Eigen::VectorXd& coefficients;
  std::array<int, Dim + 2> dofs{};

  VelocityEvaluator(const VelocitySpace<Dim>& s, const Eigen::VectorXd& u) : space(s), coefficients(u) {}

  void reinit(int cell) { dofs = space.local_scalar_dofs(cell); }

  double local(int component, int k) const { return coefficients[space.dof(component, dofs[k])]; }

  Point value(const CellValues<Dim>& cv, int q) const
  {
    Point u = Point::Zero();
    for (int k = 0; k < Dim + 2; ++k) {
      const double phi = cv.value(k, q);
      for (int c = 0; c < Dim; ++c)
        u[c] += local(c, k) * phi;
    }
    return u;
  }

  /// grad(c, j) = d u_c / d x_j
  Matrix gradient(const CellValues<Dim>& cv, int q) const
  {
    Matrix g = Matrix::Zero();
    for (int k = 0; k < Dim + 2; ++k) {
      const Point& dphi = cv.gradient(k, q);
      for (int c = 0; c < Dim; ++c)
        g.row(c) += local(c, k) * dphi.transpose();
    }
    return g;
  }
};

template <int Dim>
struct PressureEvaluator
{
  using Point = Eigen::Matrix<double, Dim, 1>;

  const PressureSpace<Dim>& space;
  const Eigen::VectorXd& coefficients;
  std::array<int, Dim + 1> dofs{};

  PressureEvaluator(const PressureSpace<Dim>& s, const Eigen::VectorXd& p) : space(s), coefficients(p) {}

  void reinit(int cell) { dofs = space.local_dofs(cell); }

  double value(const CellValues<Dim>& cv, int q) const
  {
    double p = 0.0;
    for (int k = 0; k <= Dim; ++k)
      p += coefficients[dofs[k]] * cv.value(k, q);
    return p;
  }

  Point gradient(const CellValues<Dim>& cv, int q) const
  {
    Point g = Point::Zero();
    for (int k = 0; k <= Dim; ++k)
      g += coefficients[dofs[k]] * cv.gradient(k, q);
    return g;
  }
};

template <int Dim>
using VectorFunction = std::function<Eigen::Matrix<double, Dim, 1>(const Eigen::Matrix<double, Dim, 1>&)>;

template <int Dim>
using ScalarFunction = std::function<double(const Eigen::Matrix<double, Dim, 1>&)>;

/// Nodal interpolation: vertex dofs take point values, bubbles are zero.
template <int Dim>
Field interpolate(const VelocitySpace<Dim>& space, const VectorFunction<Dim>& f)
{
  Field u = space.zero();
  u.mean_zero = false;
  const auto& mesh = space.mesh();
  for (int v = 0; v < mesh.n_vertices(); ++v) {
    const auto value = f(mesh.vertex(v));
    for (int c = 0; c < Dim; ++c)
      u.coefficients[space.dof(c, v)] = value[c];
  }
  return u;
}

template <int Dim>
Field interpolate(const PressureSpace<Dim>& space, const ScalarFunction<Dim>& f)
{
  Field p = space.zero();
  p.mean_zero = false;
  const auto& mesh = space.mesh();
  for (int v = 0; v < mesh.n_vertices(); ++v)
    p.coefficients[v] = f(mesh.vertex(v));
  return p;
}

/// Integrals of the scalar velocity shape functions (one per scalar dof).
template <int Dim>
Eigen::VectorXd scalar_velocity_integrals(const VelocitySpace<Dim>& space, const SimplexQuadrature<Dim>& quad)
{
  Eigen::VectorXd w = Eigen::VectorXd::Zero(space.n_scalar_dofs());
  CellValues<Dim> cv(space.mesh(), quad);
  for (int cell = 0; cell < space.mesh().n_cells(); ++cell) {
    cv.reinit(cell);
    const auto dofs = space.local_scalar_dofs(cell);
    for (int q = 0; q < cv.n_quadrature_points(); ++q)
      for (int k = 0; k < Dim + 2; ++k)
        w[dofs[k]] += cv.value(k, q) * cv.JxW(q);
  }
  return w;
}

template <int Dim>
Eigen::VectorXd pressure_integrals(const PressureSpace<Dim>& space, const SimplexQuadrature<Dim>& quad)
{
  Eigen::VectorXd w = Eigen::VectorXd::Zero(space.n_dofs());
  CellValues<Dim> cv(space.mesh(), quad);
  for (int cell = 0; cell < space.mesh().n_cells(); ++cell) {
    cv.reinit(cell);
    const auto dofs = space.local_dofs(cell);
    for (int q = 0; q < cv.n_quadrature_points(); ++q)
      for (int k = 0; k <= Dim; ++k)
        w[dofs[k]] += cv.value(k, q) * cv.JxW(q);
  }
  return w;
}

inline double torus_volume(int dim) { return std::pow(two_pi, dim); }

/// Component means (integral / |torus|) of a velocity field.
template <int Dim>
Eigen::Matrix<double, Dim, 1> component_means(const VelocitySpace<Dim>& space, const Field& u,
                                              const Eigen::VectorXd& scalar_integrals)
{
  Eigen::Matrix<double, Dim, 1> m;
  const int S = space.n_scalar_dofs();
  for (int c = 0; c < Dim; ++c)
    m[c] = scalar_integrals.dot(u.coefficients.segment(c * S, S)) / torus_volume(Dim);
  return m;
}

/// Removes the mean of each component (constants live on the vertex dofs).
template <int Dim>
void subtract_mean(const VelocitySpace<Dim>& space, Field& u, const Eigen::VectorXd& scalar_integrals)
{
  const auto m = component_means(space, u, scalar_integrals);
  const int nv = space.mesh().n_vertices();
  for (int c = 0; c < Dim; ++c)
    for (int v = 0; v < nv; ++v)
      u.coefficients[space.dof(c, v)] -= m[c];
  u.mean_zero = true;
}

template <int Dim>
void subtract_mean(const PressureSpace<Dim>& space, Field& p, const Eigen::VectorXd& integrals)
{
  (void)space;
  const double m = integrals.dot(p.coefficients) / torus_volume(Dim);
  p.coefficients.array() -= m;
  p.mean_zero = true;
}

enum class NormKind
{
  L2,
  H1_semi,
  H1,
  L3,
  mean
};

inline NormKind parse_norm_kind(const std::string& s)
{
  if (s == "L2")
    return NormKind::L2;
  if (s == "H1_semi")
    return NormKind::H1_semi;
  if (s == "H1")
    return NormKind::H1;
  if (s == "L3")
    return NormKind::L3;
  if (s == "mean")
    return NormKind::mean;
  throw ConfigError("unknown norm kind '" + s + "'");
}

/// Norms by quadrature. L3 of a MINI field is quadrature-approximate (|u|^3
/// is not polynomial); all other kinds are exact at the default degree.
/// `mean` returns the largest absolute component mean.
template <int Dim>
double norm(const VelocitySpace<Dim>& space, const Field& u, NormKind kind, const SimplexQuadrature<Dim>& quad)
{
  if (u.kind != SpaceKind::velocity || u.size() != space.n_dofs())
    throw ConfigError("norm: field does not belong to the velocity space");
  CellValues<Dim> cv(space.mesh(), quad);
  VelocityEvaluator<Dim> ev(space, u.coefficients);
  double l2 = 0.0, semi = 0.0, l3 = 0.0;
  Eigen::Matrix<double, Dim, 1> integral = Eigen::Matrix<double, Dim, 1>::Zero();
  for (int cell = 0; cell < space.mesh().n_cells(); ++cell) {
    cv.reinit(cell);
    ev.reinit(cell);
    for (int q = 0; q < cv.n_quadrature_points(); ++q) {
      const auto val = ev.value(cv, q);
      const double sq = val.squaredNorm();
      l2 += sq * cv.JxW(q);
      l3 += sq * std::sqrt(sq) * cv.JxW(q);
      integral += val * cv.JxW(q);
      if (kind == NormKind::H1 || kind == NormKind::H1_semi)
        semi += ev.gradient(cv, q).squaredNorm() * cv.JxW(q);
    }
  }
  switch (kind) {
    case NormKind::L2: return std::sqrt(l2);
    case NormKind::H1_semi: return std::sqrt(semi);
    case NormKind::H1: return std::sqrt(l2 + semi);
    case NormKind::L3: return std::cbrt(l3);
    case NormKind::mean: return integral.cwiseAbs().maxCoeff() / torus_volume(Dim);
  }
  throw ConfigError("norm: unknown kind");
}

template <int Dim>
double norm(const PressureSpace<Dim>& space, const Field& p, NormKind kind, const SimplexQuadrature<Dim>& quad)
{
  if (p.kind != SpaceKind::pressure || p.size() != space.n_dofs())
    throw ConfigError("norm: field does not belong to the pressure space");
  CellValues<Dim> cv(space.mesh(), quad);
  PressureEvaluator<Dim> ev(space, p.coefficients);
  double l2 = 0.0, semi = 0.0, l3 = 0.0, integral = 0.0;
  for (int cell = 0; cell < space.mesh().n_cells(); ++cell) {
    cv.reinit(cell);
    ev.reinit(cell);
    for (int q = 0; q < cv.n_quadrature_points(); ++q) {
      const double val = ev.value(cv, q);
      l2 += val * val * cv.JxW(q);
      l3 += std::abs(val) * val * val * cv.JxW(q);
      integral += val * cv.JxW(q);
      semi += ev.gradient(cv, q).squaredNorm() * cv.JxW(q);
    }
  }
  switch (kind) {
    case NormKind::L2: return std::sqrt(l2);
    case NormKind::H1_semi: return std::sqrt(semi);
    case NormKind::H1: return std::sqrt(l2 + semi);
    case NormKind::L3: return std::cbrt(l3);
    case NormKind::mean: return std::abs(integral) / torus_volume(Dim);
  }
  throw ConfigError("norm: unknown kind");
}

/// L2 distance between a velocity field and a closed-form function.
template <int Dim>
double l2_error(const VelocitySpace<Dim>& space, const Field& u, const VectorFunction<Dim>& exact,
                const SimplexQuadrature<Dim>& quad)
{
  CellValues<Dim> cv(space.mesh(), quad);
  VelocityEvaluator<Dim> ev(space, u.coefficients);
  double err = 0.0;
  for (int cell = 0; cell < space.mesh().n_cells(); ++cell) {
    cv.reinit(cell);
    ev.reinit(cell);
    for (int q = 0; q < cv.n_quadrature_points(); ++q)
      err += (ev.value(cv, q) - exact(cv.point(q))).squaredNorm() * cv.JxW(q);
  }
  return std::sqrt(err);
}

/// H1-seminorm distance to a closed-form gradient, grad(c, j) = d u_c / d x_j.
template <int Dim>
double h1_semi_error(const VelocitySpace<Dim>& space, const Field& u,
                     const std::function<Eigen::Matrix<double, Dim, Dim>(const Eigen::Matrix<double, Dim, 1>&)>& exact_grad,
                     const SimplexQuadrature<Dim>& quad)
{
  CellValues<Dim> cv(space.mesh(), quad);
  VelocityEvaluator<Dim> ev(space, u.coefficients);
  double err = 0.0;
  for (int cell = 0; cell < space.mesh().n_cells(); ++cell) {
    cv.reinit(cell);
    ev.reinit(cell);
    for (int q = 0; q < cv.n_quadrature_points(); ++q)
      err += (ev.gradient(cv, q) - exact_grad(cv.point(q))).squaredNorm() * cv.JxW(q);
  }
  return std::sqrt(err);
}

/// L2 norm of div u.
template <int Dim>
double divergence_norm(const VelocitySpace<Dim>& space, const Field& u, const SimplexQuadrature<Dim>& quad)
{
  CellValues<Dim> cv(space.mesh(), quad);
  VelocityEvaluator<Dim> ev(space, u.coefficients);
  double s = 0.0;
  for (int cell = 0; cell < space.mesh().n_cells(); ++cell) {
    cv.reinit(cell);
    ev.reinit(cell);
    for (int q = 0; q < cv.n_quadrature_points(); ++q) {
      const double d = ev.gradient(cv, q).trace();
      s += d * d * cv.JxW(q);
    }
  }
  return std::sqrt(s);
}

} // namespace thnse
