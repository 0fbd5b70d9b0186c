#pragma once

#include "CLI11.hpp"

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "thnse/error.hpp"
#include "thnse/mesh.hpp"
#include "thnse/stepper.hpp"

namespace thnse {

// Experiment files are flat TOML-style `key = value` lines with `#`
// comments. Schema 1 keys:
//
//   schema            1 (required)
//   dim, n            mesh
//   theta, dt, T      scheme; T must be a multiple of dt
//   picard_tol, picard_max_iters
//   nonlinearity      theta_average | current | previous | none
//   quadrature_degree 0 selects the default rule
//   initial           taylor_green | zero | random_divfree | file
//   initial_file      snapshot file for initial = file (final velocity is used)
//   seed, modes       random_divfree generator
//   ladder            n:dt pairs, e.g. 4:0.04, 8:0.02, 16:0.01
//   probe_levels      mesh sizes for the probe command
//   phi               test functions for lei: all, or a list of 0, 1, 2
//   snapshots         true | false, write the snapshot file in run
//   out               output directory

enum class InitialCondition
{
  taylor_green,
  zero,
  random_divfree,
  file
};

inline InitialCondition parse_initial_condition(const std::string& s)
{
  if (s == "taylor_green")
    return InitialCondition::taylor_green;
  if (s == "zero")
    return InitialCondition::zero;
  if (s == "random_divfree")
    return InitialCondition::random_divfree;
  if (s == "file")
    return InitialCondition::file;
  throw ConfigError("unknown initial condition '" + s + "' (expected taylor_green, zero, random_divfree or file)");
}

struct LadderLevel
{
  int n = 0;
  double dt = 0.0;
};

struct ExperimentConfig
{
  int schema = 1;
  int dim = 2;
  int n = 8;
  double theta = 1.0;
  double dt = 0.01;
  double T = 0.1;
  double picard_tol = 1e-12;
  int picard_max_iters = 50;
  std::string nonlinearity = "theta_average";
  int quadrature_degree = 0;
  InitialCondition initial = InitialCondition::taylor_green;
  std::string initial_file;
  std::uint64_t seed = 20240607;
  int modes = 2;
  std::vector<LadderLevel> ladder;
  std::vector<int> probe_levels{2, 4, 8};
  std::vector<int> phi{0, 1, 2};
  bool snapshots = true;
  bool force_theta_half = false;
  std::string out = "out";

  SchemeConfig scheme(double step) const
  {
    SchemeConfig c = SchemeConfig::from_step(theta, step, T);
    c.picard_tol = picard_tol;
    c.picard_max_iters = picard_max_iters;
    c.nonlinearity = parse_nonlinear_argument(nonlinearity);
    c.force_theta_half = force_theta_half;
    c.validate();
    return c;
  }
  SchemeConfig scheme() const { return scheme(dt); }

  void validate() const
  {
    if (schema != 1)
      throw ConfigError("unsupported config schema " + std::to_string(schema) + " (expected 1)");
    check_mesh_parameters(dim, n);
    scheme();
    if (quadrature_degree < 0)
      throw ConfigError("quadrature_degree must be >= 0");
    if (initial == InitialCondition::file && initial_file.empty())
      throw ConfigError("initial = file requires initial_file");
    if (modes < 1)
      throw ConfigError("modes must be >= 1");
    for (std::size_t k = 0; k < ladder.size(); ++k) {
      check_mesh_parameters(dim, ladder[k].n);
      scheme(ladder[k].dt);
      if (k > 0) {
        const auto& a = ladder[k - 1];
        const auto& b = ladder[k];
        if (b.n < a.n || b.dt > a.dt || (b.n == a.n && b.dt == a.dt))
          throw ConfigError("ladder level " + std::to_string(k) + " (" + std::to_string(b.n) + ":" +
                            std::to_string(b.dt) + ") does not refine the previous level");
      }
    }
    for (int p : probe_levels)
      check_mesh_parameters(dim, p);
    for (int p : phi)
      if (p < 0 || p > 2)
        throw ConfigError("phi selector " + std::to_string(p) + " is not in {0, 1, 2}");
  }
};

namespace detail {

inline std::string trim(std::string s)
{
  const auto b = s.find_first_not_of(" \t");
  const auto e = s.find_last_not_of(" \t");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& raw)
{
  const std::string s = trim(raw);
  T value{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw ConfigError("config key '" + key + "': cannot parse '" + raw + "'");
  return value;
}

inline bool parse_bool(const std::string& key, const std::string& raw)
{
  const std::string s = trim(raw);
  if (s == "true" || s == "1")
    return true;
  if (s == "false" || s == "0")
    return false;
  throw ConfigError("config key '" + key + "': expected true or false, got '" + raw + "'");
}

inline std::vector<std::string> split_list(const std::vector<std::string>& inputs)
{
  std::vector<std::string> out;
  for (const auto& in : inputs) {
    std::stringstream ss(in);
    std::string tok;
    while (std::getline(ss, tok, ','))
      if (!trim(tok).empty())
        out.push_back(trim(tok));
  }
  return out;
}

} // namespace detail

/// Accepts "4:0.04, 8:0.02" style lists.
inline std::vector<LadderLevel> parse_ladder(const std::vector<std::string>& inputs)
{
  std::vector<LadderLevel> out;
  for (const auto& tok : detail::split_list(inputs)) {
    const auto colon = tok.find(':');
    if (colon == std::string::npos)
      throw ConfigError("ladder entry '" + tok + "' is not of the form n:dt");
    out.push_back({detail::parse_number<int>("ladder", tok.substr(0, colon)),
                   detail::parse_number<double>("ladder", tok.substr(colon + 1))});
  }
  return out;
}

inline std::vector<LadderLevel> parse_ladder(const std::string& s) { return parse_ladder(std::vector<std::string>{s}); }

inline void apply_config_value(ExperimentConfig& c, const std::string& key, const std::vector<std::string>& inputs)
{
  using detail::parse_number;
  const auto one = [&]() -> std::string {
    if (inputs.size() != 1)
      throw ConfigError("config key '" + key + "' expects a single value");
    return inputs.front();
  };
  if (key == "schema") {
    c.schema = parse_number<int>(key, one());
    if (c.schema != 1)
      throw ConfigError("unsupported config schema " + std::to_string(c.schema) + " (expected 1)");
  } else if (key == "dim")
    c.dim = parse_number<int>(key, one());
  else if (key == "n")
    c.n = parse_number<int>(key, one());
  else if (key == "theta")
    c.theta = parse_number<double>(key, one());
  else if (key == "dt")
    c.dt = parse_number<double>(key, one());
  else if (key == "T")
    c.T = parse_number<double>(key, one());
  else if (key == "picard_tol")
    c.picard_tol = parse_number<double>(key, one());
  else if (key == "picard_max_iters")
    c.picard_max_iters = parse_number<int>(key, one());
  else if (key == "nonlinearity") {
    c.nonlinearity = detail::trim(one());
    parse_nonlinear_argument(c.nonlinearity);
  } else if (key == "quadrature_degree")
    c.quadrature_degree = parse_number<int>(key, one());
  else if (key == "initial")
    c.initial = parse_initial_condition(detail::trim(one()));
  else if (key == "initial_file")
    c.initial_file = detail::trim(one());
  else if (key == "seed")
    c.seed = parse_number<std::uint64_t>(key, one());
  else if (key == "modes")
    c.modes = parse_number<int>(key, one());
  else if (key == "ladder")
    c.ladder = parse_ladder(inputs);
  else if (key == "probe_levels") {
    c.probe_levels.clear();
    for (const auto& s : detail::split_list(inputs))
      c.probe_levels.push_back(parse_number<int>(key, s));
  } else if (key == "phi") {
    const auto items = detail::split_list(inputs);
    c.phi.clear();
    if (items.size() == 1 && items[0] == "all")
      c.phi = {0, 1, 2};
    else
      for (const auto& s : items)
        c.phi.push_back(parse_number<int>(key, s));
  } else if (key == "snapshots")
    c.snapshots = detail::parse_bool(key, one());
  else if (key == "force_theta_half")
    c.force_theta_half = detail::parse_bool(key, one());
  else if (key == "out")
    c.out = detail::trim(one());
  else
    throw ConfigError("unknown config key '" + key + "'");
}

/// Parses without validating; callers apply command-line overrides first.
inline ExperimentConfig parse_config(std::istream& in, const std::string& origin = "config")
{
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigTOML().from_config(in);
  } catch (const CLI::Error& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  ExperimentConfig c;
  bool has_schema = false;
  for (const auto& item : items) {
    if (item.name == "++" || item.name == "--")
      continue;
    if (!item.parents.empty())
      throw ConfigError(origin + ": sections are not part of config schema 1 ('" + item.fullname() + "')");
    try {
      apply_config_value(c, item.name, item.inputs);
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ": " + e.what());
    }
    has_schema = has_schema || item.name == "schema";
  }
  if (!has_schema)
    throw ConfigError(origin + ": missing 'schema = 1'");
  return c;
}

inline ExperimentConfig parse_config_string(const std::string& text)
{
  std::istringstream in(text);
  return parse_config(in);
}

inline ExperimentConfig load_config(const std::filesystem::path& path)
{
  std::ifstream in(path);
  if (!in)
    throw ConfigError("cannot open config file '" + path.string() + "'");
  return parse_config(in, path.string());
}

} // namespace thnse
