#include <gtest/gtest.h>

#include <boost/math/special_functions/factorials.hpp>

#include <cmath>

#include "thnse/quadrature.hpp"

using namespace thnse;

namespace {

double factorial(int k) { return boost::math::factorial<double>(static_cast<unsigned>(k)); }

// Exact moments on the reference simplex: a! b! (c!) / (a + b (+ c) + d)!
double simplex_moment(int a, int b) { return factorial(a) * factorial(b) / factorial(a + b + 2); }
double simplex_moment(int a, int b, int c)
{
  return factorial(a) * factorial(b) * factorial(c) / factorial(a + b + c + 3);
}

} // namespace

TEST(GaussLegendre, IntegratesPolynomialsUpToDegree2nMinus1)
{
  for (int n = 1; n <= 8; ++n) {
    const GaussLegendre gl(n);
    for (int k = 0; k <= 2 * n - 1; ++k) {
      double s = 0.0;
      for (int q = 0; q < gl.size(); ++q)
        s += gl.weights[q] * std::pow(gl.points[q], k);
      EXPECT_NEAR(s, 1.0 / (k + 1), 1e-15) << "n = " << n << ", k = " << k;
    }
  }
}

TEST(GaussLegendre, RejectsEmptyRule) { EXPECT_THROW(GaussLegendre(0), ConfigError); }

TEST(SimplexQuadrature, TriangleMomentsExactToDegree)
{
  for (int degree : {1, 3, 5, 8, 11}) {
    const SimplexQuadrature<2> quad(degree);
    for (int a = 0; a <= degree; ++a)
      for (int b = 0; a + b <= degree; ++b) {
        double s = 0.0;
        for (int q = 0; q < quad.size(); ++q)
          s += quad.weight(q) * std::pow(quad.point(q)[0], a) * std::pow(quad.point(q)[1], b);
        EXPECT_NEAR(s, simplex_moment(a, b), 1e-14 * simplex_moment(a, b)) << "degree " << degree << " x^" << a << " y^" << b;
      }
  }
}

TEST(SimplexQuadrature, TetrahedronMomentsExactToDegree)
{
  for (int degree : {2, 7, 12}) {
    const SimplexQuadrature<3> quad(degree);
    for (int a = 0; a <= degree; ++a)
      for (int b = 0; a + b <= degree; ++b)
        for (int c = 0; a + b + c <= degree; ++c) {
          double s = 0.0;
          for (int q = 0; q < quad.size(); ++q)
            s += quad.weight(q) * std::pow(quad.point(q)[0], a) * std::pow(quad.point(q)[1], b) *
                 std::pow(quad.point(q)[2], c);
          EXPECT_NEAR(s, simplex_moment(a, b, c), 1e-14 * simplex_moment(a, b, c)) << a << " " << b << " " << c;
        }
  }
}

TEST(SimplexQuadrature, PositiveWeightsAndConsistentBarycentrics)
{
  const SimplexQuadrature<3> quad(12);
  double sum = 0.0;
  for (int q = 0; q < quad.size(); ++q) {
    EXPECT_GT(quad.weight(q), 0.0);
    sum += quad.weight(q);
    const auto& l = quad.barycentric(q);
    EXPECT_NEAR(l[0] + l[1] + l[2] + l[3], 1.0, 1e-15);
    for (int i = 0; i < 3; ++i)
      EXPECT_DOUBLE_EQ(l[i + 1], quad.point(q)[i]);
  }
  EXPECT_NEAR(sum, 1.0 / 6.0, 1e-15);
}

TEST(SimplexQuadrature, DefaultDegreesCoverTheTrilinearForm)
{
  EXPECT_EQ(minimum_quadrature_degree<2>(), 8);
  EXPECT_EQ(minimum_quadrature_degree<3>(), 11);
  EXPECT_GE(default_quadrature_degree<2>(), minimum_quadrature_degree<2>());
  EXPECT_GE(default_quadrature_degree<3>(), minimum_quadrature_degree<3>());
}
