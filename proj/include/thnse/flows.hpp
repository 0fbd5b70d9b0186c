#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "thnse/spaces.hpp"

namespace thnse {

/// Taylor-Green vortex with unit viscosity,
///   u = (sin x1 cos x2, -cos x1 sin x2 [, 0]) e^{-2t},
///   p = (cos 2x1 + cos 2x2) e^{-4t} / 4.
/// In 3D the field is extruded along x3 (still an exact solution).
template <int Dim>
struct TaylorGreen
{
  using Point = Eigen::Matrix<double, Dim, 1>;
  using Matrix = Eigen::Matrix<double, Dim, Dim>;

  static Point velocity(const Point& x, double t)
  {
    const double decay = std::exp(-2.0 * t);
    Point u = Point::Zero();
    u[0] = std::sin(x[0]) * std::cos(x[1]) * decay;
    u[1] = -std::cos(x[0]) * std::sin(x[1]) * decay;
    return u;
  }

  static Matrix velocity_gradient(const Point& x, double t)
  {
    const double decay = std::exp(-2.0 * t);
    Matrix g = Matrix::Zero();
    g(0, 0) = std::cos(x[0]) * std::cos(x[1]) * decay;
    g(0, 1) = -std::sin(x[0]) * std::sin(x[1]) * decay;
    g(1, 0) = std::sin(x[0]) * std::sin(x[1]) * decay;
    g(1, 1) = -std::cos(x[0]) * std::cos(x[1]) * decay;
    return g;
  }

  static double pressure(const Point& x, double t)
  {
    return 0.25 * (std::cos(2.0 * x[0]) + std::cos(2.0 * x[1])) * std::exp(-4.0 * t);
  }

  /// (u . grad) u, the classical convection term.
  static Point convection(const Point& x, double t) { return velocity_gradient(x, t) * velocity(x, t); }

  static VectorFunction<Dim> at(double t)
  {
    return [t](const Point& x) { return velocity(x, t); };
  }

  /// ||u(t)||_2^2 over the torus.
  static double energy(double t) { return 0.5 * std::pow(two_pi, Dim) * std::exp(-4.0 * t); }
};

/// Random smooth divergence-free field: curl of a low-wavenumber
/// trigonometric stream function (2D) or vector potential (3D) with seeded
/// Gaussian coefficients.
template <int Dim>
class RandomDivFree
{
public:
  using Point = Eigen::Matrix<double, Dim, 1>;

  explicit RandomDivFree(std::uint64_t seed, int max_wavenumber = 2)
  {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::array<int, 3> k{};
    const int K = max_wavenumber;
    for (k[0] = -K; k[0] <= K; ++k[0])
      for (k[1] = -K; k[1] <= K; ++k[1])
        for (k[2] = (Dim == 3 ? -K : 0); k[2] <= (Dim == 3 ? K : 0); ++k[2]) {
          if (k[0] == 0 && k[1] == 0 && k[2] == 0)
            continue;
          Mode m;
          for (int c = 0; c < Dim; ++c)
            m.k[c] = k[c];
          const double scale = 1.0 / m.k.squaredNorm();
          for (int c = 0; c < (Dim == 2 ? 1 : 3); ++c) {
            m.a[c] = scale * normal(rng);
            m.b[c] = scale * normal(rng);
          }
          modes_.push_back(m);
        }
  }

  Point operator()(const Point& x) const
  {
    Point u = Point::Zero();
    for (const auto& m : modes_) {
      const double arg = m.k.dot(x);
      const double s = std::sin(arg), c = std::cos(arg);
      if constexpr (Dim == 2) {
        // psi = a cos + b sin ; u = (d2 psi, -d1 psi)
        const double dpsi = -m.a[0] * s + m.b[0] * c;
        u[0] += m.k[1] * dpsi;
        u[1] -= m.k[0] * dpsi;
      } else {
        // A_c = a_c cos + b_c sin ; grad A_c = k (-a_c s + b_c c) ; u = curl A
        Eigen::Vector3d dA;
        for (int cc = 0; cc < 3; ++cc)
          dA[cc] = -m.a[cc] * s + m.b[cc] * c;
        const Eigen::Vector3d kk(m.k[0], m.k[1], m.k[2]);
        const Eigen::Vector3d curl = kk.cross(dA);
        for (int cc = 0; cc < 3; ++cc)
          u[cc] += curl[cc];
      }
    }
    return u;
  }

  VectorFunction<Dim> function() const
  {
    return [self = *this](const Point& x) { return self(x); };
  }

private:
  struct Mode
  {
    Point k;
    std::array<double, 3> a{};
    std::array<double, 3> b{};
  };
  std::vector<Mode> modes_;
};

} // namespace thnse
