#include <gtest/gtest.h>

#include <cmath>
#include <string>

#include "support.hpp"

using namespace thnse;
using thnse::testing::random_velocity;

TEST(SchemeConfig, ThetaRange)
{
  SchemeConfig c;
  c.theta = 0.4;
  try {
    c.validate();
    FAIL() << "theta = 0.4 accepted";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("outside the admissible range (1/2, 1]"), std::string::npos) << e.what();
  }
  c.theta = 0.5;
  EXPECT_THROW(c.validate(), ConfigError);
  c.force_theta_half = true;
  EXPECT_NO_THROW(c.validate());
  c.theta = 1.0 + 1e-12;
  EXPECT_THROW(c.validate(), ConfigError);
  c.theta = 1.0;
  c.picard_tol = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(SchemeConfig, FromStep)
{
  const auto c = SchemeConfig::from_step(0.75, 0.01, 0.1);
  EXPECT_EQ(c.N, 10);
  EXPECT_DOUBLE_EQ(c.dt(), 0.01);
  EXPECT_THROW(SchemeConfig::from_step(1.0, 0.03, 0.1), ConfigError);
  EXPECT_THROW(SchemeConfig::from_step(1.0, 0.0, 0.1), ConfigError);
  EXPECT_THROW(parse_nonlinear_argument("explicit"), ConfigError);
}

namespace {

// Dense monolithic system with explicit multipliers for the velocity means and
// the pressure mean:
//   [ A  -B^T  C^T  0 ] [u]   [f]
//   [-B   0    0    c ] [p] = [0]
//   [ C   0    0    0 ] [l]   [0]
//   [ 0   c^T  0    0 ] [m]   [0]
template <int Dim>
Eigen::VectorXd dense_oracle(const AssembledForms<Dim>& f, const SparseMatrix& a, const Eigen::VectorXd& rhs)
{
  const int nu = f.velocity->n_dofs();
  const int np = f.pressure->n_dofs();
  const int S = f.velocity->n_scalar_dofs();
  const int n = nu + np + Dim + 1;
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(n, n);
  k.topLeftCorner(nu, nu) = Eigen::MatrixXd(a);
  const Eigen::MatrixXd b(f.divergence);
  k.block(0, nu, nu, np) = -b.transpose();
  k.block(nu, 0, np, nu) = -b;
  for (int c = 0; c < Dim; ++c) {
    k.block(c * S, nu + np + c, S, 1) = f.scalar_integrals;
    k.block(nu + np + c, c * S, 1, S) = f.scalar_integrals.transpose();
  }
  k.block(nu, n - 1, np, 1) = f.pressure_integrals;
  k.block(n - 1, nu, 1, np) = f.pressure_integrals.transpose();
  Eigen::VectorXd r = Eigen::VectorXd::Zero(n);
  r.head(nu) = rhs;
  return k.fullPivLu().solve(r).head(nu + np);
}

template <int Dim>
void check_against_dense(int n, unsigned seed)
{
  const auto d = make_discretization<Dim>(n, 0);
  const auto& f = d->forms;
  std::mt19937_64 rng(seed);
  const Field w = random_velocity(d->velocity, rng);
  const Field g = random_velocity(d->velocity, rng);
  const SparseMatrix a =
      f.mass / 0.05 + 0.8 * f.stiffness + 0.8 * block_diagonal(scalar_convection_matrix(f, w), Dim);
  SaddlePointSolver<Dim> solver(f);
  solver.factorize(a);
  const Eigen::VectorXd x = solver.solve(g.coefficients);
  const Eigen::VectorXd y = dense_oracle(f, a, g.coefficients);
  EXPECT_LT((x - y).norm(), 1e-10 * y.norm());

  // second factorization with another matrix on the same pattern
  const SparseMatrix a2 = f.mass + f.stiffness + block_diagonal(scalar_convection_matrix(f, g), Dim);
  solver.factorize(a2);
  const Eigen::VectorXd x2 = solver.solve(w.coefficients);
  const Eigen::VectorXd y2 = dense_oracle(f, a2, w.coefficients);
  EXPECT_LT((x2 - y2).norm(), 1e-10 * y2.norm());
}

} // namespace

TEST(SaddlePointSolver, MatchesDenseSystem2D) { check_against_dense<2>(3, 5); }

TEST(SaddlePointSolver, MatchesDenseSystem3D) { check_against_dense<3>(2, 6); }

TEST(SaddlePointSolver, ConstraintsHold)
{
  const auto d = make_discretization<2>(6, 0);
  const auto& f = d->forms;
  std::mt19937_64 rng(3);
  const Field g = random_velocity(d->velocity, rng);
  SaddlePointSolver<2> solver(f);
  solver.factorize(f.mass + f.stiffness);
  const Eigen::VectorXd x = solver.solve(g.coefficients);
  const int nu = d->velocity.n_dofs();
  const int S = d->velocity.n_scalar_dofs();
  const Eigen::VectorXd u = x.head(nu);
  const Eigen::VectorXd p = x.tail(d->pressure.n_dofs());
  EXPECT_LT((f.divergence * u).norm(), 1e-12 * u.norm());
  EXPECT_NEAR(f.scalar_integrals.dot(u.head(S)), 0.0, 1e-12);
  EXPECT_NEAR(f.scalar_integrals.dot(u.tail(S)), 0.0, 1e-12);
  EXPECT_NEAR(f.pressure_integrals.dot(p), 0.0, 1e-12);
}

TEST(ProjectInitial, DiscretelyDivergenceFree)
{
  const auto d = make_discretization<2>(8, 0);
  const auto& f = d->forms;
  const Field u = project_initial(f, TaylorGreen<2>::at(0.0));
  EXPECT_LT((f.divergence * u.coefficients).norm(), 1e-12 * u.coefficients.norm());
  // energy() is the full squared L2 norm
  EXPECT_NEAR(u.coefficients.dot(f.mass * u.coefficients) / TaylorGreen<2>::energy(0.0), 1.0, 0.02);

  // projecting an element of V_h returns it
  const Field again = project_initial(f, u);
  EXPECT_LT((again.coefficients - u.coefficients).norm(), 1e-10 * u.coefficients.norm());

  // the plain L2 projection of a generic solenoidal field is not in V_h
  const auto random = RandomDivFree<2>(5, 2).function();
  const Field plain = project_initial(f, random, InitialProjection::l2);
  const Field constrained = project_initial(f, random);
  EXPECT_GT((f.divergence * plain.coefficients).norm(), 1e-6 * plain.coefficients.norm());
  EXPECT_LT((f.divergence * constrained.coefficients).norm(), 1e-12 * constrained.coefficients.norm());
  EXPECT_THROW(project_initial(f, d->pressure.zero()), ConfigError);
}

TEST(ThetaStepper, ZeroStaysZero)
{
  const auto d = make_discretization<2>(4, 0);
  const auto seq = run_scheme(d->forms, d->velocity.zero(), SchemeConfig::from_step(0.75, 0.05, 0.2));
  ASSERT_EQ(seq.steps(), 4);
  for (int m = 1; m <= 4; ++m) {
    EXPECT_EQ(seq.velocities[m].norm(), 0.0);
    EXPECT_EQ(seq.pressures[m].norm(), 0.0);
  }
}

TEST(ThetaStepper, TaylorGreenStep)
{
  const auto d = make_discretization<2>(8, 0);
  const auto& f = d->forms;
  const Field u0 = project_initial(f, TaylorGreen<2>::at(0.0));
  for (double theta : {0.6, 1.0}) {
    auto cfg = SchemeConfig::from_step(theta, 0.01, 0.01);
    const StepResult r = theta_step(u0, f, cfg);
    EXPECT_GT(r.iterations, 1);
    EXPECT_LE(r.picard_residual, cfg.picard_tol);
    EXPECT_LT(r.momentum_residual, 1e-10);
    EXPECT_LT((f.divergence * r.velocity.coefficients).norm(), 1e-12);
    const double e0 = 0.5 * u0.coefficients.dot(f.mass * u0.coefficients);
    const double e1 = 0.5 * r.velocity.coefficients.dot(f.mass * r.velocity.coefficients);
    EXPECT_LT(e1, e0);
    // exact decay factor e^{-4 dt}, up to discretization error
    EXPECT_NEAR(e1 / e0, std::exp(-0.04), 0.01);
  }
}

TEST(ThetaStepper, PicardFailureReportsHistory)
{
  const auto d = make_discretization<2>(4, 0);
  const Field u0 = project_initial(d->forms, TaylorGreen<2>::at(0.0));
  auto cfg = SchemeConfig::from_step(1.0, 0.1, 0.2);
  cfg.picard_max_iters = 1;
  try {
    run_scheme(d->forms, u0, cfg);
    FAIL() << "expected SolverError";
  } catch (const SolverError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("step m = 1"), std::string::npos) << msg;
    EXPECT_NE(msg.find("Try a smaller time step"), std::string::npos) << msg;
  }
}

TEST(ThetaStepper, StokesModeSingleSolve)
{
  const auto d = make_discretization<2>(4, 0);
  const Field u0 = project_initial(d->forms, TaylorGreen<2>::at(0.0));
  auto cfg = SchemeConfig::from_step(1.0, 0.05, 0.1);
  cfg.nonlinearity = NonlinearArgument::none;
  const auto seq = run_scheme(d->forms, u0, cfg);
  EXPECT_EQ(seq.picard_iterations[1], 1);
  EXPECT_EQ(seq.picard_iterations[2], 1);
  EXPECT_LT(seq.momentum_residuals[2], 1e-12);
}

TEST(ThetaStepper, ThreeDimensionalRun)
{
  const auto d = make_discretization<3>(2, 0);
  const Field u0 = project_initial(d->forms, RandomDivFree<3>(11, 1).function());
  const auto seq = run_scheme(d->forms, u0, SchemeConfig::from_step(0.75, 0.05, 0.1));
  EXPECT_EQ(seq.steps(), 2);
  for (int m = 1; m <= 2; ++m)
    EXPECT_LT(seq.momentum_residuals[m], 1e-10);
}
