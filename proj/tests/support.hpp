#pragma once

#include <random>

#include "thnse/experiments.hpp"

namespace thnse::testing {

/// Uniform random coefficients in [-1, 1], bubbles included.
template <int Dim>
Field random_velocity(const VelocitySpace<Dim>& space, std::mt19937_64& rng)
{
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Field u = space.zero();
  for (Eigen::Index i = 0; i < u.size(); ++i)
    u.coefficients[i] = dist(rng);
  u.mean_zero = false;
  return u;
}

template <int Dim>
Field random_pressure(const PressureSpace<Dim>& space, std::mt19937_64& rng)
{
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Field p = space.zero();
  for (Eigen::Index i = 0; i < p.size(); ++i)
    p.coefficients[i] = dist(rng);
  p.mean_zero = false;
  return p;
}

inline double relative(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); }

} // namespace thnse::testing
