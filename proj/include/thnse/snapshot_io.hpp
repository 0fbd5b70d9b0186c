#pragma once

#include <Eigen/Dense>

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "thnse/error.hpp"
#include "thnse/stepper.hpp"

namespace thnse {

// Layout (all little-endian):
//   0  char[6]  "THNSE1"
//   6  char[2]  "LE"
//   8  u32      dim
//  12  u32      n
//  16  f64      theta
//  24  f64      dt
//  32  u64      N
//  40  u64      velocity dofs
//  48  u64      pressure dofs
//  56  f64[]    u^0, then (u^m, p^m) for m = 1..N

struct SnapshotHeader
{
  std::uint32_t dim = 0;
  std::uint32_t n = 0;
  double theta = 0.0;
  double dt = 0.0;
  std::uint64_t steps = 0;
  std::uint64_t velocity_dofs = 0;
  std::uint64_t pressure_dofs = 0;

  static constexpr std::size_t size = 56;

  std::uint64_t payload_doubles() const { return velocity_dofs + steps * (velocity_dofs + pressure_dofs); }
  std::uint64_t file_size() const { return size + 8 * payload_doubles(); }
};

struct SnapshotFile
{
  SnapshotHeader header;
  SnapshotSequence sequence;
};

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v)
{
  for (int i = 0; i < 4; ++i)
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u64(std::string& out, std::uint64_t v)
{
  for (int i = 0; i < 8; ++i)
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

inline std::uint64_t get_le(const unsigned char* p, int bytes)
{
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i)
    v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

inline void put_block(std::string& out, const Eigen::VectorXd& x)
{
  for (Eigen::Index i = 0; i < x.size(); ++i)
    put_f64(out, x[i]);
}

inline Eigen::VectorXd get_block(const unsigned char*& p, std::uint64_t count)
{
  Eigen::VectorXd x(static_cast<Eigen::Index>(count));
  for (std::uint64_t i = 0; i < count; ++i, p += 8)
    x[static_cast<Eigen::Index>(i)] = std::bit_cast<double>(get_le(p, 8));
  return x;
}

} // namespace detail

inline std::string encode_snapshots(const SnapshotSequence& seq, int dim, int n)
{
  const int N = seq.steps();
  if (N < 0)
    throw IoError("write_snapshots: empty snapshot sequence");
  SnapshotHeader h;
  h.dim = static_cast<std::uint32_t>(dim);
  h.n = static_cast<std::uint32_t>(n);
  h.theta = seq.theta();
  h.dt = seq.dt();
  h.steps = static_cast<std::uint64_t>(N);
  h.velocity_dofs = static_cast<std::uint64_t>(seq.velocities[0].size());
  h.pressure_dofs = N > 0 ? static_cast<std::uint64_t>(seq.pressures[1].size()) : 0;
  for (int m = 0; m <= N; ++m) {
    if (static_cast<std::uint64_t>(seq.velocities[m].size()) != h.velocity_dofs ||
        (m > 0 && static_cast<std::uint64_t>(seq.pressures[m].size()) != h.pressure_dofs))
      throw IoError("write_snapshots: inconsistent block sizes at m = " + std::to_string(m));
  }

  std::string out;
  out.reserve(h.file_size());
  out.append("THNSE1LE", 8);
  detail::put_u32(out, h.dim);
  detail::put_u32(out, h.n);
  detail::put_f64(out, h.theta);
  detail::put_f64(out, h.dt);
  detail::put_u64(out, h.steps);
  detail::put_u64(out, h.velocity_dofs);
  detail::put_u64(out, h.pressure_dofs);
  detail::put_block(out, seq.velocities[0]);
  for (int m = 1; m <= N; ++m) {
    detail::put_block(out, seq.velocities[m]);
    detail::put_block(out, seq.pressures[m]);
  }
  return out;
}

inline SnapshotFile decode_snapshots(const std::string& bytes, const std::string& origin = "snapshot")
{
  if (bytes.size() < SnapshotHeader::size)
    throw IoError(origin + ": file too short for a snapshot header");
  if (bytes.compare(0, 6, "THNSE1") != 0)
    throw IoError(origin + ": bad magic (expected THNSE1)");
  if (bytes.compare(6, 2, "LE") != 0)
    throw IoError(origin + ": unsupported endianness tag");
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  SnapshotHeader h;
  h.dim = static_cast<std::uint32_t>(detail::get_le(p + 8, 4));
  h.n = static_cast<std::uint32_t>(detail::get_le(p + 12, 4));
  h.theta = std::bit_cast<double>(detail::get_le(p + 16, 8));
  h.dt = std::bit_cast<double>(detail::get_le(p + 24, 8));
  h.steps = detail::get_le(p + 32, 8);
  h.velocity_dofs = detail::get_le(p + 40, 8);
  h.pressure_dofs = detail::get_le(p + 48, 8);
  if (h.dim != 2 && h.dim != 3)
    throw IoError(origin + ": dim = " + std::to_string(h.dim) + " in header");
  // Guard the size arithmetic before trusting it.
  const std::uint64_t limit = bytes.size() / 8 + 1;
  if (h.velocity_dofs > limit || h.pressure_dofs > limit || h.steps > limit)
    throw IoError(origin + ": header sizes exceed file length");
  if (bytes.size() != h.file_size())
    throw IoError(origin + ": file length " + std::to_string(bytes.size()) + " does not match header (" +
                  std::to_string(h.file_size()) + " bytes)");

  SnapshotFile f;
  f.header = h;
  auto& seq = f.sequence;
  seq.config.theta = h.theta;
  seq.config.N = static_cast<int>(h.steps);
  seq.config.T = h.dt * static_cast<double>(h.steps);
  const unsigned char* cursor = p + SnapshotHeader::size;
  seq.velocities.push_back(detail::get_block(cursor, h.velocity_dofs));
  seq.pressures.emplace_back();
  for (std::uint64_t m = 1; m <= h.steps; ++m) {
    seq.velocities.push_back(detail::get_block(cursor, h.velocity_dofs));
    seq.pressures.push_back(detail::get_block(cursor, h.pressure_dofs));
  }
  seq.picard_iterations.assign(h.steps + 1, 0);
  seq.picard_residuals.assign(h.steps + 1, 0.0);
  seq.momentum_residuals.assign(h.steps + 1, 0.0);
  return f;
}

inline void write_snapshots(const std::filesystem::path& path, const SnapshotSequence& seq, int dim, int n)
{
  const std::string bytes = encode_snapshots(seq, dim, n);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out)
    throw IoError("write to '" + path.string() + "' failed");
}

inline SnapshotFile read_snapshots(const std::filesystem::path& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError("cannot open snapshot '" + path.string() + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_snapshots(bytes, path.string());
}

} // namespace thnse
