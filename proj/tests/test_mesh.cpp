#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <set>
#include <vector>

#include "thnse/mesh.hpp"

using namespace thnse;

TEST(PeriodicMesh, CountsIn2D)
{
  for (int n : {1, 2, 5, 8}) {
    const auto mesh = build_periodic_mesh<2>(n);
    EXPECT_EQ(mesh.n_vertices(), n * n);
    EXPECT_EQ(mesh.n_cells(), 2 * n * n);
    EXPECT_DOUBLE_EQ(mesh.h(), two_pi / n);
  }
}

TEST(PeriodicMesh, CountsIn3D)
{
  for (int n : {1, 2, 3}) {
    const auto mesh = build_periodic_mesh<3>(n);
    EXPECT_EQ(mesh.n_vertices(), n * n * n);
    EXPECT_EQ(mesh.n_cells(), 6 * n * n * n);
  }
}

template <int Dim>
void check_volumes(int n)
{
  const auto mesh = build_periodic_mesh<Dim>(n);
  double total = 0.0;
  const double cell = std::pow(mesh.h(), Dim) / (Dim == 2 ? 2.0 : 6.0);
  for (int c = 0; c < mesh.n_cells(); ++c) {
    const auto g = mesh.geometry(c);
    EXPECT_GT(g.det, 0.0) << "cell " << c;
    EXPECT_NEAR(g.volume, cell, 1e-14 * cell);
    total += g.volume;
  }
  EXPECT_NEAR(total, std::pow(two_pi, Dim), 1e-12);
}

TEST(PeriodicMesh, PositiveOrientationAndTotalVolume)
{
  check_volumes<2>(4);
  check_volumes<2>(7);
  check_volumes<3>(2);
  check_volumes<3>(3);
}

TEST(PeriodicMesh, VertexIndexWrapsLattice)
{
  const auto mesh = build_periodic_mesh<2>(4);
  EXPECT_EQ(mesh.vertex_index({0, 0}), mesh.vertex_index({4, -4}));
  EXPECT_EQ(mesh.vertex_index({5, 1}), mesh.vertex_index({1, 1}));
  EXPECT_EQ(mesh.vertex_index({-1, 0}), mesh.vertex_index({3, 0}));
  for (int v = 0; v < mesh.n_vertices(); ++v)
    for (int c = 0; c < 2; ++c) {
      EXPECT_GE(mesh.vertex(v)[c], 0.0);
      EXPECT_LT(mesh.vertex(v)[c], two_pi);
    }
}

TEST(PeriodicMesh, CellLatticeMatchesVertexIds)
{
  const auto mesh = build_periodic_mesh<3>(3);
  for (const auto& cell : mesh.cells())
    for (int k = 0; k < 4; ++k)
      EXPECT_EQ(cell.vertices[k], mesh.vertex_index(cell.lattice[k]));
}

// Every facet of a closed periodic triangulation is shared by exactly two
// cells, and the two cells see it with opposite induced orientation.
template <int Dim>
void check_conforming(int n)
{
  const auto mesh = build_periodic_mesh<Dim>(n);
  std::map<std::vector<std::array<int, Dim>>, int> facets;
  for (int c = 0; c < mesh.n_cells(); ++c) {
    const auto& cell = mesh.cell(c);
    for (int skip = 0; skip <= Dim; ++skip) {
      // facet keyed by lattice coordinates shifted so the smallest is in [0, n)
      std::vector<std::array<int, Dim>> f;
      for (int k = 0; k <= Dim; ++k)
        if (k != skip)
          f.push_back(cell.lattice[k]);
      std::sort(f.begin(), f.end());
      std::array<int, Dim> shift;
      for (int d = 0; d < Dim; ++d)
        shift[d] = ((f[0][d] % n) + n) % n - f[0][d];
      for (auto& p : f)
        for (int d = 0; d < Dim; ++d)
          p[d] += shift[d];
      ++facets[f];
    }
  }
  EXPECT_EQ(facets.size(), static_cast<std::size_t>((Dim + 1) * mesh.n_cells() / 2));
  for (const auto& [f, count] : facets)
    EXPECT_EQ(count, 2);
}

TEST(PeriodicMesh, ConformingClosedTriangulation)
{
  check_conforming<2>(3);
  check_conforming<2>(4);
  check_conforming<3>(2);
  check_conforming<3>(3);
}

TEST(PeriodicMesh, BarycentricGradientsSumToZero)
{
  const auto mesh = build_periodic_mesh<3>(2);
  for (int c = 0; c < mesh.n_cells(); ++c) {
    const auto g = cell_geometry(mesh, c).barycentric_gradients();
    Eigen::Vector3d s = Eigen::Vector3d::Zero();
    for (const auto& x : g)
      s += x;
    EXPECT_LT(s.norm(), 1e-13);
  }
}

TEST(PeriodicMesh, Errors)
{
  EXPECT_THROW(build_periodic_mesh<2>(0), ConfigError);
  EXPECT_THROW(check_mesh_parameters(4, 2), ConfigError);
  EXPECT_THROW(check_mesh_parameters(2, -1), ConfigError);
  const auto mesh = build_periodic_mesh<2>(2);
  EXPECT_THROW(mesh.geometry(-1), ConfigError);
  EXPECT_THROW(mesh.geometry(mesh.n_cells()), ConfigError);
}
