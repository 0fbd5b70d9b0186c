#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "thnse/error.hpp"

namespace thnse {

inline constexpr double two_pi = 2.0 * std::numbers::pi;

template <int Dim>
constexpr int factorial_of_dim()
{
  return Dim == 2 ? 2 : 6;
}

/// Cell of a periodic mesh. Vertices are stored as unwrapped lattice
/// coordinates; the periodic shift of local vertex i is
/// 2*pi * floor(lattice[i] / n) per component.
template <int Dim>
struct PeriodicCell
{
  std::array<int, Dim + 1> vertices;
  std::array<std::array<int, Dim>, Dim + 1> lattice;
};

/// Affine map from the reference simplex onto a cell (periodic shift applied).
template <int Dim>
struct CellGeometry
{
  using Matrix = Eigen::Matrix<double, Dim, Dim>;
  using Point = Eigen::Matrix<double, Dim, 1>;

  Matrix jacobian;
  Point translation;
  Matrix inverse_jacobian_transpose;
  double det = 0.0;
  double volume = 0.0;

  Point map(const Point& reference) const { return translation + jacobian * reference; }

  /// Physical gradients of the barycentric coordinates lambda_0..lambda_Dim.
  std::array<Point, Dim + 1> barycentric_gradients() const
  {
    std::array<Point, Dim + 1> g;
    g[0] = Point::Zero();
    for (int i = 0; i < Dim; ++i) {
      g[i + 1] = inverse_jacobian_transpose.col(i);
      g[0] -= g[i + 1];
    }
    return g;
  }
};

/// Uniform simplicial triangulation of the flat torus [0, 2*pi)^Dim:
/// n cells per axis, each lattice square split into 2 triangles or each
/// lattice cube into 6 Kuhn tetrahedra.
template <int Dim>
class PeriodicMesh
{
public:
  using Point = Eigen::Matrix<double, Dim, 1>;

  PeriodicMesh(int n) : n_(n)
  {
    static_assert(Dim == 2 || Dim == 3, "PeriodicMesh supports Dim = 2 or 3");
    if (n < 1)
      throw ConfigError("PeriodicMesh: cells per axis must be >= 1, got " + std::to_string(n));
    h_ = two_pi / n;
    build();
  }

  int n() const { return n_; }
  double h() const { return h_; }
  static constexpr int dim() { return Dim; }
  int n_vertices() const { return static_cast<int>(vertices_.size()); }
  int n_cells() const { return static_cast<int>(cells_.size()); }
  const Point& vertex(int i) const { return vertices_[i]; }
  const PeriodicCell<Dim>& cell(int c) const { return cells_[c]; }
  const std::vector<PeriodicCell<Dim>>& cells() const { return cells_; }

  /// Global vertex index of a lattice coordinate (wrapped mod n).
  int vertex_index(const std::array<int, Dim>& lattice) const
  {
    int idx = 0;
    int stride = 1;
    for (int c = 0; c < Dim; ++c) {
      const int w = ((lattice[c] % n_) + n_) % n_;
      idx += w * stride;
      stride *= n_;
    }
    return idx;
  }

  CellGeometry<Dim> geometry(int cell_index) const
  {
    if (cell_index < 0 || cell_index >= n_cells())
      throw ConfigError("cell index " + std::to_string(cell_index) + " out of range [0, " +
                        std::to_string(n_cells()) + ")");
    const auto& cell = cells_[cell_index];
    CellGeometry<Dim> g;
    Point x0;
    for (int c = 0; c < Dim; ++c)
      x0[c] = h_ * cell.lattice[0][c];
    for (int i = 1; i <= Dim; ++i)
      for (int c = 0; c < Dim; ++c)
        g.jacobian(c, i - 1) = h_ * cell.lattice[i][c] - x0[c];
    g.translation = x0;
    g.det = g.jacobian.determinant();
    g.volume = std::abs(g.det) / factorial_of_dim<Dim>();
    g.inverse_jacobian_transpose = g.jacobian.inverse().transpose();
    return g;
  }

private:
  void build()
  {
    const int nv = Dim == 2 ? n_ * n_ : n_ * n_ * n_;
    vertices_.resize(nv);
    for (int v = 0; v < nv; ++v) {
      int r = v;
      for (int c = 0; c < Dim; ++c) {
        vertices_[v][c] = h_ * (r % n_);
        r /= n_;
      }
    }

    // Reference split of the unit lattice cube along its main diagonal.
    // Each entry lists offsets of the simplex vertices; orientation positive.
    std::vector<std::array<std::array<int, Dim>, Dim + 1>> pattern;
    if constexpr (Dim == 2) {
      pattern.push_back({{{0, 0}, {1, 0}, {1, 1}}});
      pattern.push_back({{{0, 0}, {1, 1}, {0, 1}}});
    } else {
      std::array<int, 3> perm{0, 1, 2};
      do {
        std::array<std::array<int, 3>, 4> s{};
        for (int k = 1; k <= 3; ++k) {
          s[k] = s[k - 1];
          s[k][perm[k - 1]] = 1;
        }
        // parity of the permutation decides the orientation
        int inversions = 0;
        for (int a = 0; a < 3; ++a)
          for (int b = a + 1; b < 3; ++b)
            if (perm[a] > perm[b])
              ++inversions;
        if (inversions % 2 == 1)
          std::swap(s[1], s[2]);
        pattern.push_back(s);
      } while (std::next_permutation(perm.begin(), perm.end()));
    }

    const int n_cubes = nv;
    cells_.reserve(n_cubes * pattern.size());
    for (int q = 0; q < n_cubes; ++q) {
      std::array<int, Dim> base{};
      int r = q;
      for (int c = 0; c < Dim; ++c) {
        base[c] = r % n_;
        r /= n_;
      }
      for (const auto& simplex : pattern) {
        PeriodicCell<Dim> cell;
        for (int i = 0; i <= Dim; ++i) {
          for (int c = 0; c < Dim; ++c)
            cell.lattice[i][c] = base[c] + simplex[i][c];
          cell.vertices[i] = vertex_index(cell.lattice[i]);
        }
        cells_.push_back(cell);
      }
    }
  }

  int n_;
  double h_;
  std::vector<Point> vertices_;
  std::vector<PeriodicCell<Dim>> cells_;
};

template <int Dim>
PeriodicMesh<Dim> build_periodic_mesh(int n)
{
  return PeriodicMesh<Dim>(n);
}

template <int Dim>
CellGeometry<Dim> cell_geometry(const PeriodicMesh<Dim>& mesh, int cell_index)
{
  return mesh.geometry(cell_index);
}

/// Runtime-dimension guard used by the CLI before dispatching on Dim.
inline void check_mesh_parameters(int dim, int n)
{
  if (dim != 2 && dim != 3)
    throw ConfigError("mesh dimension must be 2 or 3, got " + std::to_string(dim));
  if (n < 1)
    throw ConfigError("cells per axis must be >= 1, got " + std::to_string(n));
}

} // namespace thnse
