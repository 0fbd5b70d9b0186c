#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "thnse/error.hpp"
#include "thnse/operators.hpp"
#include "thnse/parallel.hpp"
#include "thnse/projection.hpp"
#include "thnse/quadrature.hpp"
#include "thnse/spaces.hpp"
#include "thnse/stepper.hpp"

namespace thnse {

// ---------------------------------------------------------------------------
// Time reconstructions
// ---------------------------------------------------------------------------

/// v: piecewise linear in time through u^m; u: u^{m,theta} on [t_{m-1}, t_m);
/// p: p^m on the same interval. At t = T the closing values u^N,
/// u^{N,theta}, p^N are used.
struct Reconstruction
{
  Field v;
  Field u;
  Field p;
  int interval = 0; ///< m such that t lies in [t_{m-1}, t_m)
};

class ReconstructedTrajectory
{
public:
  explicit ReconstructedTrajectory(const SnapshotSequence& snapshots) : seq_(&snapshots)
  {
    if (snapshots.steps() < 1)
      throw ConfigError("ReconstructedTrajectory: snapshot sequence has no steps");
  }

  const SnapshotSequence& snapshots() const { return *seq_; }
  double final_time() const { return seq_->config.T; }

  int interval_of(double t) const
  {
    const double T = final_time();
    if (!(t >= 0.0) || t > T)
      throw ConfigError("reconstruct_eval: t = " + std::to_string(t) + " outside [0, " + std::to_string(T) + "]");
    const int N = seq_->steps();
    if (t == T)
      return N;
    const int m = static_cast<int>(std::floor(t / seq_->dt())) + 1;
    return std::min(std::max(m, 1), N);
  }

  Reconstruction eval(double t) const
  {
    const int N = seq_->steps();
    const int m = interval_of(t);
    Reconstruction r;
    r.interval = m;
    if (t == final_time()) {
      r.v = seq_->velocity(N);
    } else {
      const double s = (t - seq_->config.time(m - 1)) / seq_->dt();
      r.v = Field{SpaceKind::velocity, seq_->velocities[m - 1] + s * (seq_->velocities[m] - seq_->velocities[m - 1]),
                  true};
    }
    r.u = Field{SpaceKind::velocity, seq_->theta_velocity(m), true};
    r.p = seq_->pressure(m);
    return r;
  }

private:
  const SnapshotSequence* seq_;
};

inline Reconstruction reconstruct_eval(const ReconstructedTrajectory& traj, double t) { return traj.eval(t); }

// ---------------------------------------------------------------------------
// Energy identity
// ---------------------------------------------------------------------------

/// Per-step terms of
///   1/2(|u^m|^2 - |u^{m-1}|^2) + (2 theta - 1)/2 |u^m - u^{m-1}|^2 + dt |grad u^{m,theta}|^2 = 0.
/// Vectors are indexed by m; entry 0 of the step-wise families is zero.
struct EnergyLedger
{
  double theta = 1.0;
  double dt = 0.0;
  std::vector<double> kinetic;     ///< 1/2 |u^m|^2, m = 0..N
  std::vector<double> increment;   ///< (2 theta - 1)/2 |u^m - u^{m-1}|^2
  std::vector<double> dissipation; ///< dt |grad u^{m,theta}|^2
  std::vector<double> residual;    ///< left-hand side of the identity
  std::vector<int> picard_iterations;
  std::vector<double> picard_residuals;

  int steps() const { return static_cast<int>(kinetic.size()) - 1; }
  double increment_sum() const { return sum(increment); }
  double dissipation_sum() const { return sum(dissipation); }
  /// 1/2|u^N|^2 + sum increments + sum dissipation - 1/2|u^0|^2
  double cumulative_residual() const
  {
    return kinetic.back() + increment_sum() + dissipation_sum() - kinetic.front();
  }
  double max_abs_residual() const
  {
    double r = 0.0;
    for (double x : residual)
      r = std::max(r, std::abs(x));
    return r;
  }
  /// |u^m - u^{m-1}|^2 recovered from the increment term (theta > 1/2).
  double increment_norm_squared(int m) const { return 2.0 * increment[m] / (2.0 * theta - 1.0); }

private:
  static double sum(const std::vector<double>& v)
  {
    double s = 0.0;
    for (std::size_t i = 1; i < v.size(); ++i)
      s += v[i];
    return s;
  }
};

template <int Dim>
EnergyLedger energy_ledger(const AssembledForms<Dim>& forms, const SnapshotSequence& seq)
{
  if (seq.velocities.empty())
    throw ConfigError("energy_ledger: empty snapshot sequence");
  EnergyLedger l;
  l.theta = seq.theta();
  l.dt = seq.dt();
  const int N = seq.steps();
  const auto sq = [](const SparseMatrix& a, const Eigen::VectorXd& x) { return x.dot(a * x); };
  l.kinetic.resize(N + 1);
  l.increment.assign(N + 1, 0.0);
  l.dissipation.assign(N + 1, 0.0);
  l.residual.assign(N + 1, 0.0);
  l.picard_iterations = seq.picard_iterations;
  l.picard_residuals = seq.picard_residuals;
  l.kinetic[0] = 0.5 * sq(forms.mass, seq.velocities[0]);
  for (int m = 1; m <= N; ++m) {
    const Eigen::VectorXd delta = seq.velocities[m] - seq.velocities[m - 1];
    l.kinetic[m] = 0.5 * sq(forms.mass, seq.velocities[m]);
    l.increment[m] = 0.5 * (2.0 * l.theta - 1.0) * sq(forms.mass, delta);
    l.dissipation[m] = l.dt * sq(forms.stiffness, seq.theta_velocity(m));
    l.residual[m] = l.kinetic[m] - l.kinetic[m - 1] + l.increment[m] + l.dissipation[m];
  }
  return l;
}

// ---------------------------------------------------------------------------
// Interpolation gap between v^dt and u^dt
// ---------------------------------------------------------------------------

struct InterpolationGap
{
  double lhs = 0.0;    ///< int_0^T |v^dt - u^dt|^2 dt, by Gauss quadrature in time
  double factor = 0.0; ///< theta^2 - theta + 1/3
  double rhs = 0.0;    ///< dt * factor * sum_m |u^m - u^{m-1}|^2
};

inline double interpolation_gap_factor(double theta) { return theta * theta - theta + 1.0 / 3.0; }

template <int Dim>
InterpolationGap interpolation_gap(const AssembledForms<Dim>& forms, const SnapshotSequence& seq)
{
  if (seq.velocities.empty())
    throw ConfigError("interpolation_gap: empty snapshot sequence");
  InterpolationGap g;
  g.factor = interpolation_gap_factor(seq.theta());
  const int N = seq.steps();
  if (N < 1)
    return g;
  const ReconstructedTrajectory traj(seq);
  const GaussLegendre gl(4);
  const double dt = seq.dt();
  double increments = 0.0;
  for (int m = 1; m <= N; ++m) {
    const Eigen::VectorXd delta = seq.velocities[m] - seq.velocities[m - 1];
    increments += delta.dot(forms.mass * delta);
    const double t0 = seq.config.time(m - 1);
    for (int q = 0; q < gl.size(); ++q) {
      const auto r = traj.eval(t0 + gl.points[q] * dt);
      const Eigen::VectorXd diff = r.v.coefficients - r.u.coefficients;
      g.lhs += gl.weights[q] * dt * diff.dot(forms.mass * diff);
    }
  }
  g.rhs = dt * g.factor * increments;
  return g;
}

// ---------------------------------------------------------------------------
// Uniform-bound diagnostics
// ---------------------------------------------------------------------------

struct PressureRatio
{
  std::vector<double> ratio; ///< index m = 1..N; entry 0 unused
  std::vector<bool> skipped; ///< zero-denominator steps

  double max() const
  {
    double r = 0.0;
    for (std::size_t m = 1; m < ratio.size(); ++m)
      if (!skipped[m])
        r = std::max(r, ratio[m]);
    return r;
  }
};

/// |p^m|_2 / (|u^{m,theta}|_{H1} + |u^{m,theta}|_{L3} |u^{m,theta}|_{H1}).
template <int Dim>
PressureRatio pressure_ratio(const AssembledForms<Dim>& forms, const SnapshotSequence& seq)
{
  PressureRatio out;
  const int N = seq.steps();
  out.ratio.assign(N + 1, 0.0);
  out.skipped.assign(N + 1, true);
  for (int m = 1; m <= N; ++m) {
    const Field u{SpaceKind::velocity, seq.theta_velocity(m), true};
    const double h1 = norm(*forms.velocity, u, NormKind::H1, *forms.quadrature);
    const double l3 = norm(*forms.velocity, u, NormKind::L3, *forms.quadrature);
    const double denom = h1 + l3 * h1;
    if (!(denom > 0.0)) {
      out.ratio[m] = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    const double p = std::sqrt(std::max(0.0, seq.pressures[m].dot(forms.pressure_mass * seq.pressures[m])));
    out.ratio[m] = p / denom;
    out.skipped[m] = false;
  }
  return out;
}

/// (dt sum_m |(u^m - u^{m-1})/dt|_{H^-1}^{4/3})^{3/4}.
template <int Dim>
double dual_norm_time_derivative(const AssembledForms<Dim>& forms, const SnapshotSequence& seq)
{
  const int N = seq.steps();
  if (N < 1)
    return 0.0;
  const DualNormSolver<Dim> dual(forms);
  const double dt = seq.dt();
  double s = 0.0;
  for (int m = 1; m <= N; ++m) {
    const Eigen::VectorXd r = forms.mass * (seq.velocities[m] - seq.velocities[m - 1]) / dt;
    s += dt * std::pow(dual.norm(r), 4.0 / 3.0);
  }
  return std::pow(s, 0.75);
}

// ---------------------------------------------------------------------------
// Test functions for the local energy balance
// ---------------------------------------------------------------------------

/// Nonnegative phi(t, x), 2*pi-periodic in x and vanishing at t = 0 and t = T,
/// with closed-form time derivative, gradient and Laplacian.
template <int Dim>
struct TestFunction
{
  using Point = Eigen::Matrix<double, Dim, 1>;

  std::string id;
  double T = 1.0;
  std::function<double(double, const Point&)> value;
  std::function<double(double, const Point&)> time_derivative;
  std::function<Point(double, const Point&)> gradient;
  std::function<double(double, const Point&)> laplacian;
  bool space_constant = false;
};

/// Quartic bump s(t) = (4 t (T - t) / T^2)^2.
struct QuarticBump
{
  double T = 1.0;

  double value(double t) const
  {
    const double b = 4.0 * t * (T - t) / (T * T);
    return b * b;
  }
  double derivative(double t) const
  {
    const double b = 4.0 * t * (T - t) / (T * T);
    return 2.0 * b * 4.0 * (T - 2.0 * t) / (T * T);
  }
  /// Antiderivative vanishing at t = 0.
  double primitive(double t) const
  {
    const double t3 = t * t * t;
    return 16.0 / (T * T * T * T) * (T * T * t3 / 3.0 - T * t3 * t / 2.0 + t3 * t * t / 5.0);
  }
};

/// Standard family phi = s(t) g(x):
///   0: g = 1,  1: g = 1 + cos(x1)/2,  2: g = 1 + cos(x1) cos(x2)/2.
template <int Dim>
TestFunction<Dim> standard_test_function(int which, double T)
{
  using Point = Eigen::Matrix<double, Dim, 1>;
  const QuarticBump s{T};
  TestFunction<Dim> f;
  f.T = T;
  std::function<double(const Point&)> g, lap;
  std::function<Point(const Point&)> grad;
  switch (which) {
    case 0:
      f.id = "s";
      f.space_constant = true;
      g = [](const Point&) { return 1.0; };
      grad = [](const Point&) { return Point::Zero().eval(); };
      lap = [](const Point&) { return 0.0; };
      break;
    case 1:
      f.id = "s_cos1";
      g = [](const Point& x) { return 1.0 + 0.5 * std::cos(x[0]); };
      grad = [](const Point& x) {
        Point r = Point::Zero();
        r[0] = -0.5 * std::sin(x[0]);
        return r;
      };
      lap = [](const Point& x) { return -0.5 * std::cos(x[0]); };
      break;
    case 2:
      f.id = "s_cos1cos2";
      g = [](const Point& x) { return 1.0 + 0.5 * std::cos(x[0]) * std::cos(x[1]); };
      grad = [](const Point& x) {
        Point r = Point::Zero();
        r[0] = -0.5 * std::sin(x[0]) * std::cos(x[1]);
        r[1] = -0.5 * std::cos(x[0]) * std::sin(x[1]);
        return r;
      };
      lap = [](const Point& x) { return -std::cos(x[0]) * std::cos(x[1]); };
      break;
    default: throw ConfigError("standard_test_function: selector must be 0, 1 or 2");
  }
  f.value = [s, g](double t, const Point& x) { return s.value(t) * g(x); };
  f.time_derivative = [s, g](double t, const Point& x) { return s.derivative(t) * g(x); };
  f.gradient = [s, grad](double t, const Point& x) { return (s.value(t) * grad(x)).eval(); };
  f.laplacian = [s, lap](double t, const Point& x) { return s.value(t) * lap(x); };
  return f;
}

inline int standard_test_function_count() { return 3; }

template <int Dim>
void validate_test_function(const TestFunction<Dim>& phi, const PeriodicMesh<Dim>& mesh, double T)
{
  if (!phi.value || !phi.time_derivative || !phi.gradient || !phi.laplacian)
    throw ConfigError("test function '" + phi.id + "' is missing closed-form derivatives");
  if (std::abs(phi.T - T) > 1e-12 * T)
    throw ConfigError("test function '" + phi.id + "' is built for a different final time");
  for (int v = 0; v < mesh.n_vertices(); ++v) {
    const auto& x = mesh.vertex(v);
    if (phi.value(0.0, x) != 0.0 || phi.value(T, x) != 0.0)
      throw ConfigError("test function '" + phi.id + "' does not vanish at t = 0 and t = T");
  }
}

// ---------------------------------------------------------------------------
// Local energy balance and the remainders of the limit argument
// ---------------------------------------------------------------------------

/// All space-time integrals use the assembly quadrature in space and
/// 4-point Gauss-Legendre per time step. P_h(u phi) is the L2 projection onto
/// the mean-zero velocity space.
struct LeiReport
{
  std::string phi_id;
  double defect = 0.0;      ///< D(phi) = transport - dissipation
  double dissipation = 0.0; ///< int int |grad u|^2 phi
  double transport = 0.0;   ///< int int |u|^2/2 (phi_t + lap phi) + (|u|^2/2 + p) u . grad phi
  double r_visc = 0.0;      ///< int (grad u, grad[P_h(u phi) - u phi])
  double r_nl = 0.0;        ///< int b_h(u, u, P_h(u phi) - u phi)
  double r_p1 = 0.0;        ///< int (p, div[P_h(u phi) - u phi])
  double r_p2 = 0.0;        ///< int (phi p, div u)
  double i2 = 0.0;          ///< int (d_t v, P_h(u phi) - u phi)
  double i12 = 0.0;         ///< int (d_t v, (u - v) phi)
  double i11 = 0.0;         ///< int (d_t v, v phi)
  double i11_telescoped = 0.0; ///< -int (|v|^2/2, phi_t)
  /// Momentum equation tested with P_h(u phi), reassembled from the pieces
  /// above; vanishes up to the nonlinear-solver tolerance.
  double balance = 0.0;
  double balance_scale = 0.0;
  double dual_norm_dtv = 0.0; ///< |d_t v|_{L^{4/3}(H^{-1})}
};

namespace detail {

struct LeiInterval
{
  double dissipation = 0, transport = 0, r_visc = 0, r_nl = 0, r_p1 = 0, r_p2 = 0, i2 = 0, i12 = 0, i11 = 0,
         i11_tel = 0, visc_direct = 0, nl_direct = 0, p_direct = 0, scale = 0;
};

} // namespace detail

template <int Dim>
LeiReport lei_functional(const L2Projector<Dim>& projector, const SnapshotSequence& seq, const TestFunction<Dim>& phi)
{
  using Point = Eigen::Matrix<double, Dim, 1>;
  using Matrix = Eigen::Matrix<double, Dim, Dim>;
  const auto& forms = projector.forms();
  const auto& space = *forms.velocity;
  const auto& pspace = *forms.pressure;
  const auto& mesh = space.mesh();
  const int N = seq.steps();
  if (N < 1)
    throw ConfigError("lei_functional: snapshot sequence has no steps");
  validate_test_function(phi, mesh, seq.config.T);

  const double dt = seq.dt();
  const double theta = seq.theta();
  const GaussLegendre gl(4);
  const int G = gl.size();
  std::vector<detail::LeiInterval> parts(N);

  parallel_for(N, [&](int idx) {
    const int m = idx + 1;
    const double t0 = seq.config.time(m - 1);
    const Eigen::VectorXd& u0 = seq.velocities[m - 1];
    const Eigen::VectorXd& u1 = seq.velocities[m];
    const Eigen::VectorXd ut = seq.theta_velocity(m);
    const Eigen::VectorXd dtv = (u1 - u0) / dt;
    const Eigen::VectorXd& p = seq.pressures[m];

    std::vector<Eigen::VectorXd> proj(G);
    VelocityEvaluator<Dim> et_load(space, ut);
    for (int g = 0; g < G; ++g) {
      const double t = t0 + gl.points[g] * dt;
      Field f = projector.project_velocity(VelocityIntegrand<Dim>([&](const CellValues<Dim>& cv, int q) {
        et_load.reinit(cv.cell());
        return (et_load.value(cv, q) * phi.value(t, cv.point(q))).eval();
      }));
      subtract_mean(space, f, forms.scalar_integrals);
      proj[g] = std::move(f.coefficients);
    }

    CellValues<Dim> cv(mesh, *forms.quadrature);
    VelocityEvaluator<Dim> e0(space, u0), e1(space, u1), et(space, ut), ed(space, dtv);
    PressureEvaluator<Dim> ep(pspace, p);
    std::vector<VelocityEvaluator<Dim>> eproj;
    eproj.reserve(G);
    for (int g = 0; g < G; ++g)
      eproj.emplace_back(space, proj[g]);

    detail::LeiInterval r;
    for (int cell = 0; cell < mesh.n_cells(); ++cell) {
      cv.reinit(cell);
      e0.reinit(cell);
      e1.reinit(cell);
      et.reinit(cell);
      ed.reinit(cell);
      ep.reinit(cell);
      for (auto& e : eproj)
        e.reinit(cell);
      for (int q = 0; q < cv.n_quadrature_points(); ++q) {
        const Point& x = cv.point(q);
        const Point v0 = e0.value(cv, q);
        const Point v1 = e1.value(cv, q);
        const Point u = et.value(cv, q);
        const Matrix gu = et.gradient(cv, q);
        const Point d = ed.value(cv, q);
        const double pq = ep.value(cv, q);
        const double divu = gu.trace();
        const Point nl = gu * u + 0.5 * divu * u;
        const double half_u2 = 0.5 * u.squaredNorm();
        for (int g = 0; g < G; ++g) {
          const double s = gl.points[g];
          const double t = t0 + s * dt;
          const double w = gl.weights[g] * dt * cv.JxW(q);
          const double f = phi.value(t, x);
          if (f < 0.0)
            throw ConfigError("test function '" + phi.id + "' is negative at a quadrature point");
          const double ft = phi.time_derivative(t, x);
          const Point fg = phi.gradient(t, x);
          const double fl = phi.laplacian(t, x);
          const Point v = v0 + s * (v1 - v0);
          const Point pv = eproj[g].value(cv, q);
          const Matrix gpv = eproj[g].gradient(cv, q);
          const Matrix g_uphi = gu * f + u * fg.transpose();
          const Point e = pv - u * f;
          const Matrix ge = gpv - g_uphi;

          r.dissipation += w * gu.squaredNorm() * f;
          r.transport += w * (half_u2 * (ft + fl) + (half_u2 + pq) * u.dot(fg));
          r.r_visc += w * (gu.array() * ge.array()).sum();
          r.r_nl += w * nl.dot(e);
          r.r_p1 += w * pq * ge.trace();
          r.r_p2 += w * f * pq * divu;
          r.i2 += w * d.dot(e);
          r.i12 += w * d.dot(u - v) * f;
          r.i11 += w * d.dot(v) * f;
          r.i11_tel += -w * 0.5 * v.squaredNorm() * ft;
          r.visc_direct += w * (gu.array() * g_uphi.array()).sum();
          r.nl_direct += w * nl.dot(u) * f;
          r.p_direct += w * pq * g_uphi.trace();
          r.scale += w * (std::abs(d.dot(pv)) + std::abs((gu.array() * gpv.array()).sum()) + std::abs(nl.dot(pv)) +
                          std::abs(pq * gpv.trace()));
        }
      }
    }
    parts[idx] = r;
  });

  LeiReport out;
  out.phi_id = phi.id;
  double visc_direct = 0.0, nl_direct = 0.0, p_direct = 0.0;
  for (const auto& r : parts) {
    out.dissipation += r.dissipation;
    out.transport += r.transport;
    out.r_visc += r.r_visc;
    out.r_nl += r.r_nl;
    out.r_p1 += r.r_p1;
    out.r_p2 += r.r_p2;
    out.i2 += r.i2;
    out.i12 += r.i12;
    out.i11 += r.i11;
    out.i11_telescoped += r.i11_tel;
    visc_direct += r.visc_direct;
    nl_direct += r.nl_direct;
    p_direct += r.p_direct;
    out.balance_scale += r.scale;
  }
  (void)theta;
  out.defect = out.transport - out.dissipation;
  out.balance = out.i11 + out.i12 + out.i2 + visc_direct + out.r_visc + nl_direct + out.r_nl - p_direct - out.r_p1;
  out.dual_norm_dtv = dual_norm_time_derivative(forms, seq);
  return out;
}

struct TelescopingCheck
{
  double lhs = 0.0; ///< int (d_t v, v phi) dt
  double rhs = 0.0; ///< -int (|v|^2/2, phi_t) dt
};

template <int Dim>
TelescopingCheck telescoping_check(const AssembledForms<Dim>& forms, const SnapshotSequence& seq,
                                   const TestFunction<Dim>& phi)
{
  using Point = Eigen::Matrix<double, Dim, 1>;
  const auto& space = *forms.velocity;
  const auto& mesh = space.mesh();
  const int N = seq.steps();
  if (N < 1)
    throw ConfigError("telescoping_check: snapshot sequence has no steps");
  validate_test_function(phi, mesh, seq.config.T);
  const double dt = seq.dt();
  const GaussLegendre gl(4);
  std::vector<TelescopingCheck> parts(N);
  parallel_for(N, [&](int idx) {
    const int m = idx + 1;
    const double t0 = seq.config.time(m - 1);
    const Eigen::VectorXd& u0 = seq.velocities[m - 1];
    const Eigen::VectorXd& u1 = seq.velocities[m];
    CellValues<Dim> cv(mesh, *forms.quadrature);
    VelocityEvaluator<Dim> e0(space, u0), e1(space, u1);
    TelescopingCheck r;
    for (int cell = 0; cell < mesh.n_cells(); ++cell) {
      cv.reinit(cell);
      e0.reinit(cell);
      e1.reinit(cell);
      for (int q = 0; q < cv.n_quadrature_points(); ++q) {
        const Point v0 = e0.value(cv, q);
        const Point v1 = e1.value(cv, q);
        const Point d = (v1 - v0) / dt;
        for (int g = 0; g < gl.size(); ++g) {
          const double s = gl.points[g];
          const double t = t0 + s * dt;
          const double w = gl.weights[g] * dt * cv.JxW(q);
          const Point v = v0 + s * (v1 - v0);
          r.lhs += w * d.dot(v) * phi.value(t, cv.point(q));
          r.rhs -= w * 0.5 * v.squaredNorm() * phi.time_derivative(t, cv.point(q));
        }
      }
    }
    parts[idx] = r;
  });
  TelescopingCheck out;
  for (const auto& r : parts) {
    out.lhs += r.lhs;
    out.rhs += r.rhs;
  }
  return out;
}

/// D(phi) for phi = s(t) (quartic bump, no space dependence) rebuilt from
/// the energy ledger alone: on each step u^dt is constant, so
///   D = sum_m 1/2|u^{m,theta}|^2 (s(t_m) - s(t_{m-1})) - sum_m |grad u^{m,theta}|^2 int s.
inline double lei_defect_from_ledger(const EnergyLedger& l, double T)
{
  const QuarticBump s{T};
  const double theta = l.theta;
  double d = 0.0;
  for (int m = 1; m <= l.steps(); ++m) {
    const double t0 = (m - 1) * l.dt, t1 = m * l.dt;
    const double cross = theta == 1.0 ? 0.0 : theta * (1.0 - theta) * 0.5 * l.increment_norm_squared(m);
    const double half_ut2 = theta * l.kinetic[m] + (1.0 - theta) * l.kinetic[m - 1] - cross;
    d += half_ut2 * (s.value(t1) - s.value(t0));
    d -= l.dissipation[m] / l.dt * (s.primitive(t1) - s.primitive(t0));
  }
  return d;
}

} // namespace thnse
