#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "thnse/error.hpp"

namespace thnse {

/// Gauss-Legendre nodes and weights on [0, 1].
struct GaussLegendre
{
  std::vector<double> points;
  std::vector<double> weights;

  explicit GaussLegendre(int n_points)
  {
    if (n_points < 1)
      throw ConfigError("GaussLegendre: need at least one point");
    points.resize(n_points);
    weights.resize(n_points);
    const int n = n_points;
    for (int i = 0; i < (n + 1) / 2; ++i) {
      // Chebyshev-type initial guess, then Newton on P_n.
      double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
      double dp = 0.0;
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= n; ++k) {
          const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
          p0 = p1;
          p1 = pk;
        }
        if (n == 1)
          p0 = 1.0;
        dp = n * (x * p1 - p0) / (x * x - 1.0);
        const double dx = p1 / dp;
        x -= dx;
        if (std::abs(dx) < 1e-16)
          break;
      }
      // recompute derivative at the converged node
      {
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= n; ++k) {
          const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
          p0 = p1;
          p1 = pk;
        }
        if (n == 1)
          p0 = 1.0;
        dp = n * (x * p1 - p0) / (x * x - 1.0);
      }
      const double w = 2.0 / ((1.0 - x * x) * dp * dp);
      // map [-1,1] -> [0,1]
      points[i] = 0.5 * (1.0 - x);
      points[n - 1 - i] = 0.5 * (1.0 + x);
      weights[i] = 0.5 * w;
      weights[n - 1 - i] = 0.5 * w;
    }
  }

  int size() const { return static_cast<int>(points.size()); }
};

/// Quadrature on the reference simplex conv{0, e_1, ..., e_Dim}, built as a
/// collapsed (conical) product of Gauss-Legendre rules. All weights are
/// positive; the weights sum to 1/Dim!.
template <int Dim>
class SimplexQuadrature
{
public:
  using Point = Eigen::Matrix<double, Dim, 1>;

  explicit SimplexQuadrature(int degree) : degree_(degree)
  {
    static_assert(Dim == 2 || Dim == 3);
    if (degree < 0)
      throw ConfigError("SimplexQuadrature: negative exactness degree");
    // The collapse Jacobian adds Dim-1 to the polynomial degree in the
    // outermost variable.
    const int n = (degree + Dim) / 2 + 1;
    const GaussLegendre gl(n);
    if constexpr (Dim == 2) {
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          const double a = gl.points[i], b = gl.points[j];
          Point x;
          x << a, b * (1.0 - a);
          points_.push_back(x);
          weights_.push_back(gl.weights[i] * gl.weights[j] * (1.0 - a));
        }
    } else {
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          for (int k = 0; k < n; ++k) {
            const double a = gl.points[i], b = gl.points[j], c = gl.points[k];
            Point x;
            x << a, b * (1.0 - a), c * (1.0 - a) * (1.0 - b);
            points_.push_back(x);
            weights_.push_back(gl.weights[i] * gl.weights[j] * gl.weights[k] *
                               (1.0 - a) * (1.0 - a) * (1.0 - b));
          }
    }
    for (const auto& x : points_) {
      std::array<double, Dim + 1> lam{};
      lam[0] = 1.0 - x.sum();
      for (int c = 0; c < Dim; ++c)
        lam[c + 1] = x[c];
      barycentric_.push_back(lam);
    }
  }

  int degree() const { return degree_; }
  int size() const { return static_cast<int>(weights_.size()); }
  const Point& point(int q) const { return points_[q]; }
  double weight(int q) const { return weights_[q]; }
  const std::array<double, Dim + 1>& barycentric(int q) const { return barycentric_[q]; }

private:
  int degree_;
  std::vector<Point> points_;
  std::vector<double> weights_;
  std::vector<std::array<double, Dim + 1>> barycentric_;
};

/// Minimum exactness degree for the trilinear form on MINI fields:
/// bubble (Dim+1) * gradient of bubble (Dim) * bubble (Dim+1).
template <int Dim>
constexpr int minimum_quadrature_degree()
{
  return 3 * (Dim + 1) - 1;
}

template <int Dim>
constexpr int default_quadrature_degree()
{
  return Dim == 2 ? 8 : 12;
}

} // namespace thnse
