#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <limits>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "thnse/config.hpp"
#include "thnse/csv.hpp"
#include "thnse/diagnostics.hpp"
#include "thnse/error.hpp"
#include "thnse/flows.hpp"
#include "thnse/snapshot_io.hpp"
#include "thnse/stepper.hpp"

namespace thnse {

enum ExitCode : int
{
  exit_ok = 0,
  exit_config = 1,
  exit_solver = 2
};

/// Mesh, spaces, quadrature and assembled forms for one level. Not movable:
/// the forms hold pointers into the other members.
template <int Dim>
struct Discretization
{
  PeriodicMesh<Dim> mesh;
  VelocitySpace<Dim> velocity;
  PressureSpace<Dim> pressure;
  SimplexQuadrature<Dim> quadrature;
  AssembledForms<Dim> forms;

  Discretization(int n, int quadrature_degree)
      : mesh(build_periodic_mesh<Dim>(n)), velocity(mesh), pressure(mesh),
        quadrature(quadrature_degree > 0 ? quadrature_degree : default_quadrature_degree<Dim>()),
        forms(assemble_forms(velocity, pressure, quadrature))
  {
  }
  Discretization(const Discretization&) = delete;
  Discretization& operator=(const Discretization&) = delete;
};

template <int Dim>
std::unique_ptr<Discretization<Dim>> make_discretization(int n, int quadrature_degree)
{
  return std::make_unique<Discretization<Dim>>(n, quadrature_degree);
}

template <int Dim>
Field initial_velocity(const ExperimentConfig& cfg, const Discretization<Dim>& d)
{
  switch (cfg.initial) {
    case InitialCondition::zero: return d.velocity.zero();
    case InitialCondition::taylor_green: return project_initial(d.forms, TaylorGreen<Dim>::at(0.0));
    case InitialCondition::random_divfree:
      return project_initial(d.forms, RandomDivFree<Dim>(cfg.seed, cfg.modes).function());
    case InitialCondition::file: {
      const auto f = read_snapshots(cfg.initial_file);
      if (static_cast<int>(f.header.dim) != Dim || static_cast<int>(f.header.n) != d.mesh.n())
        throw ConfigError("initial_file '" + cfg.initial_file + "' has dim = " + std::to_string(f.header.dim) +
                          ", n = " + std::to_string(f.header.n) + "; config has dim = " + std::to_string(Dim) +
                          ", n = " + std::to_string(d.mesh.n()));
      const Field last = f.sequence.velocity(f.sequence.steps());
      return project_initial(d.forms, last);
    }
  }
  throw ConfigError("unknown initial condition");
}

/// Least-squares slope of log|y| against log h. Entries at or below `floor`
/// are raised to it; returns NaN when every entry sits on the floor.
inline double fitted_slope(const std::vector<double>& h, const std::vector<double>& y, double floor = 0.0)
{
  const std::size_t k = h.size();
  if (k < 2 || y.size() != k)
    return std::numeric_limits<double>::quiet_NaN();
  bool above = false;
  std::vector<double> lx(k), ly(k);
  for (std::size_t i = 0; i < k; ++i) {
    const double v = std::abs(y[i]);
    above = above || v > floor;
    lx[i] = std::log(h[i]);
    ly[i] = std::log(std::max(v, floor));
  }
  if (!above || !std::isfinite(ly[0]))
    return std::numeric_limits<double>::quiet_NaN();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    mx += lx[i] / k;
    my += ly[i] / k;
  }
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  return sxy / sxx;
}

/// Roundoff floor for time-integrated remainders: relative to 1/2|u^0|^2.
inline double remainder_floor(double energy_scale) { return 1e-12 * std::max(energy_scale, 1e-300); }

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& energy_ledger_columns()
{
  static const std::vector<std::string> c{"m",         "t_m",           "kinetic",        "increment_term",
                                          "dissipation_term", "identity_residual", "picard_iters", "picard_residual"};
  return c;
}

inline CsvTable energy_ledger_table(const EnergyLedger& l)
{
  CsvTable t(energy_ledger_columns());
  for (int m = 0; m <= l.steps(); ++m) {
    CsvTable::Row r;
    r << m << m * l.dt << l.kinetic[m] << l.increment[m] << l.dissipation[m] << l.residual[m]
      << (m < static_cast<int>(l.picard_iterations.size()) ? l.picard_iterations[m] : 0)
      << (m < static_cast<int>(l.picard_residuals.size()) ? l.picard_residuals[m] : 0.0);
    t.add(r);
  }
  return t;
}

template <int Dim>
int cmd_run_dim(const ExperimentConfig& cfg, std::ostream& log)
{
  const auto scheme = cfg.scheme();
  const auto d = make_discretization<Dim>(cfg.n, cfg.quadrature_degree);
  const Field u0 = initial_velocity(cfg, *d);
  const auto seq = run_scheme(d->forms, u0, scheme);

  const std::filesystem::path out(cfg.out);
  std::filesystem::create_directories(out);
  if (cfg.snapshots)
    write_snapshots(out / "snapshots.bin", seq, Dim, cfg.n);
  const auto ledger = energy_ledger(d->forms, seq);
  energy_ledger_table(ledger).write(out / "energy_ledger.csv");

  const auto gap = interpolation_gap(d->forms, seq);
  const auto pr = pressure_ratio(d->forms, seq);
  const double dual = dual_norm_time_derivative(d->forms, seq);
  CsvTable summary({"quantity", "value"});
  const auto put = [&summary](const char* k, double v) {
    CsvTable::Row r;
    r << k << v;
    summary.add(r);
  };
  put("initial_kinetic", ledger.kinetic.front());
  put("final_kinetic", ledger.kinetic.back());
  put("increment_sum", ledger.increment_sum());
  put("dissipation_sum", ledger.dissipation_sum());
  put("cumulative_residual", ledger.cumulative_residual());
  put("max_identity_residual", ledger.max_abs_residual());
  put("gap_lhs", gap.lhs);
  put("gap_rhs", gap.rhs);
  put("gap_factor", gap.factor);
  put("dual_norm_dtv", dual);
  put("pressure_ratio_max", pr.max());
  summary.write(out / "summary.csv");

  log << "run: dim = " << Dim << ", n = " << cfg.n << ", theta = " << format_number(scheme.theta)
      << ", dt = " << format_number(scheme.dt()) << ", N = " << scheme.N << "\n"
      << "  kinetic " << format_number(ledger.kinetic.front()) << " -> " << format_number(ledger.kinetic.back())
      << ", max identity residual " << format_number(ledger.max_abs_residual()) << "\n"
      << "  wrote " << (out / "energy_ledger.csv").string() << (cfg.snapshots ? ", snapshots.bin" : "")
      << ", summary.csv\n";
  return exit_ok;
}

inline int cmd_run(const ExperimentConfig& cfg, std::ostream& log)
{
  cfg.validate();
  return cfg.dim == 2 ? cmd_run_dim<2>(cfg, log) : cmd_run_dim<3>(cfg, log);
}

// ---------------------------------------------------------------------------
// converge
// ---------------------------------------------------------------------------

struct ConvergenceLevel
{
  int n = 0;
  double h = 0.0;
  double dt = 0.0;
  int steps = 0;
  double l2l2 = 0.0; ///< (dt sum_m |u^m - u(t_m)|_2^2)^{1/2}
  double l2h1 = 0.0; ///< (dt sum_m |grad(u^m - u(t_m))|_2^2)^{1/2}
  double order_l2l2 = std::numeric_limits<double>::quiet_NaN();
  double order_l2h1 = std::numeric_limits<double>::quiet_NaN();
  std::string order_parameter = "none"; ///< h, or dt when n is unchanged
  InterpolationGap gap;
  double dual_norm = 0.0;
  double pressure_ratio_max = 0.0;
  double max_identity_residual = 0.0;
};

template <int Dim>
ConvergenceLevel taylor_green_level(const ExperimentConfig& cfg, int n, double dt)
{
  const auto scheme = cfg.scheme(dt);
  const auto d = make_discretization<Dim>(n, cfg.quadrature_degree);
  const Field u0 = project_initial(d->forms, TaylorGreen<Dim>::at(0.0));
  const auto seq = run_scheme(d->forms, u0, scheme);
  ConvergenceLevel L;
  L.n = n;
  L.h = d->mesh.h();
  L.dt = scheme.dt();
  L.steps = scheme.N;
  for (int m = 1; m <= scheme.N; ++m) {
    const double t = scheme.time(m);
    const Field u = seq.velocity(m);
    const double e0 = l2_error(d->velocity, u, TaylorGreen<Dim>::at(t), d->quadrature);
    const std::function<Eigen::Matrix<double, Dim, Dim>(const Eigen::Matrix<double, Dim, 1>&)> grad =
        [t](const Eigen::Matrix<double, Dim, 1>& x) { return TaylorGreen<Dim>::velocity_gradient(x, t); };
    const double e1 = h1_semi_error(d->velocity, u, grad, d->quadrature);
    L.l2l2 += L.dt * e0 * e0;
    L.l2h1 += L.dt * e1 * e1;
  }
  L.l2l2 = std::sqrt(L.l2l2);
  L.l2h1 = std::sqrt(L.l2h1);
  L.gap = interpolation_gap(d->forms, seq);
  L.dual_norm = dual_norm_time_derivative(d->forms, seq);
  L.pressure_ratio_max = pressure_ratio(d->forms, seq).max();
  L.max_identity_residual = energy_ledger(d->forms, seq).max_abs_residual();
  return L;
}

inline void fill_orders(std::vector<ConvergenceLevel>& levels)
{
  for (std::size_t k = 1; k < levels.size(); ++k) {
    auto& a = levels[k - 1];
    auto& b = levels[k];
    const bool spatial = b.n != a.n;
    const double ratio = spatial ? a.h / b.h : a.dt / b.dt;
    b.order_parameter = spatial ? "h" : "dt";
    b.order_l2l2 = std::log(a.l2l2 / b.l2l2) / std::log(ratio);
    b.order_l2h1 = std::log(a.l2h1 / b.l2h1) / std::log(ratio);
  }
}

inline CsvTable convergence_table(const std::vector<ConvergenceLevel>& levels)
{
  CsvTable t({"level", "n", "h", "dt", "steps", "l2l2_error", "l2h1_error", "order_parameter", "order_l2l2",
              "order_l2h1", "gap_lhs", "gap_rhs", "gap_factor", "dual_norm", "pressure_ratio_max",
              "max_identity_residual"});
  for (std::size_t k = 0; k < levels.size(); ++k) {
    const auto& L = levels[k];
    CsvTable::Row r;
    r << static_cast<int>(k) << L.n << L.h << L.dt << L.steps << L.l2l2 << L.l2h1 << L.order_parameter
      << L.order_l2l2 << L.order_l2h1 << L.gap.lhs << L.gap.rhs << L.gap.factor << L.dual_norm
      << L.pressure_ratio_max << L.max_identity_residual;
    t.add(r);
  }
  return t;
}

template <int Dim>
std::vector<ConvergenceLevel> converge_ladder(const ExperimentConfig& cfg, std::ostream& log)
{
  std::vector<ConvergenceLevel> levels;
  for (std::size_t k = 0; k < cfg.ladder.size(); ++k) {
    const auto& lv = cfg.ladder[k];
    try {
      levels.push_back(taylor_green_level<Dim>(cfg, lv.n, lv.dt));
    } catch (const SolverError& e) {
      throw SolverError("ladder level " + std::to_string(k) + " (n = " + std::to_string(lv.n) + "): " + e.what());
    }
    log << "  level " << k << ": n = " << lv.n << ", dt = " << format_number(lv.dt)
        << ", L2(L2) error = " << format_number(levels.back().l2l2) << "\n";
  }
  fill_orders(levels);
  return levels;
}

inline int cmd_converge(const ExperimentConfig& cfg, std::ostream& log)
{
  cfg.validate();
  if (cfg.ladder.empty())
    throw ConfigError("converge requires a ladder (e.g. ladder = 4:0.04, 8:0.01)");
  if (cfg.initial != InitialCondition::taylor_green)
    throw ConfigError("converge measures errors against the Taylor-Green solution; set initial = taylor_green");
  log << "converge: dim = " << cfg.dim << ", theta = " << format_number(cfg.theta) << ", T = " << format_number(cfg.T)
      << "\n";
  const auto levels = cfg.dim == 2 ? converge_ladder<2>(cfg, log) : converge_ladder<3>(cfg, log);
  const std::filesystem::path out(cfg.out);
  std::filesystem::create_directories(out);
  convergence_table(levels).write(out / "convergence.csv");
  for (std::size_t k = 1; k < levels.size(); ++k)
    log << "  order (" << levels[k].order_parameter << ") L2(L2) " << format_number(levels[k].order_l2l2)
        << ", L2(H1) " << format_number(levels[k].order_l2h1) << "\n";
  log << "  wrote " << (out / "convergence.csv").string() << "\n";
  return exit_ok;
}

// ---------------------------------------------------------------------------
// lei
// ---------------------------------------------------------------------------

struct LeiLevel
{
  int n = 0;
  double h = 0.0;
  double dt = 0.0;
  double energy_scale = 0.0; ///< 1/2 |u^0|^2
  std::vector<LeiReport> reports;
  double ledger_defect = std::numeric_limits<double>::quiet_NaN(); ///< D(s) rebuilt from the energy ledger
  double space_constant_defect = std::numeric_limits<double>::quiet_NaN(); ///< D(s) from lei_functional
};

template <int Dim>
LeiLevel lei_level(const SnapshotFile& file, const std::vector<int>& phis, int quadrature_degree)
{
  const auto d = make_discretization<Dim>(static_cast<int>(file.header.n), quadrature_degree);
  const auto& seq = file.sequence;
  if (seq.velocities[0].size() != d->velocity.n_dofs() ||
      (seq.steps() > 0 && seq.pressures[1].size() != d->pressure.n_dofs()))
    throw IoError("snapshot dof counts do not match dim = " + std::to_string(Dim) +
                  ", n = " + std::to_string(file.header.n));
  const L2Projector<Dim> projector(d->forms);
  const auto ledger = energy_ledger(d->forms, seq);
  LeiLevel L;
  L.n = d->mesh.n();
  L.h = d->mesh.h();
  L.dt = seq.dt();
  L.energy_scale = ledger.kinetic.front();
  for (int k : phis) {
    L.reports.push_back(lei_functional(projector, seq, standard_test_function<Dim>(k, seq.config.T)));
    if (k == 0) {
      L.ledger_defect = lei_defect_from_ledger(ledger, seq.config.T);
      L.space_constant_defect = L.reports.back().defect;
    }
  }
  return L;
}

inline std::vector<std::string> lei_columns()
{
  return {"phi_id", "D", "dissipation", "transport", "R_visc", "R_nl", "R_p1", "R_p2", "I2", "I12",
          "n",      "h", "dt",          "balance_residual"};
}

/// One row per (level, phi); with more than one level, one slope row per
/// phi ("slope:<id>") follows. Slope rows hold the fitted log-log slope
/// against h of max(0, -D) in the D column and of |remainder| in the
/// remainder columns; "floor" marks a quantity at roundoff on every level.
inline CsvTable lei_table(const std::vector<LeiLevel>& levels)
{
  CsvTable t(lei_columns());
  for (const auto& L : levels)
    for (const auto& r : L.reports) {
      CsvTable::Row row;
      row << r.phi_id << r.defect << r.dissipation << r.transport << r.r_visc << r.r_nl << r.r_p1 << r.r_p2 << r.i2
          << r.i12 << L.n << L.h << L.dt << r.balance;
      t.add(row);
    }
  if (levels.size() < 2)
    return t;
  const std::size_t nphi = levels.front().reports.size();
  std::vector<double> h;
  for (const auto& L : levels)
    h.push_back(L.h);
  const auto nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t j = 0; j < nphi; ++j) {
    const auto slope_of = [&](auto get) -> std::string {
      std::vector<double> y;
      double floor = 0.0;
      for (const auto& L : levels) {
        y.push_back(get(L.reports[j]));
        floor = std::max(floor, remainder_floor(L.energy_scale));
      }
      const double s = fitted_slope(h, y, floor);
      return std::isnan(s) ? std::string("floor") : format_number(s);
    };
    CsvTable::Row row;
    row << "slope:" + levels.front().reports[j].phi_id
        << slope_of([](const LeiReport& r) { return std::max(0.0, -r.defect); }) << nan << nan
        << slope_of([](const LeiReport& r) { return r.r_visc; }) << slope_of([](const LeiReport& r) { return r.r_nl; })
        << slope_of([](const LeiReport& r) { return r.r_p1; }) << slope_of([](const LeiReport& r) { return r.r_p2; })
        << slope_of([](const LeiReport& r) { return r.i2; }) << slope_of([](const LeiReport& r) { return r.i12; })
        << 0 << nan << nan << nan;
    t.add(row);
  }
  return t;
}

inline LeiLevel lei_from_snapshot(const std::filesystem::path& path, const std::vector<int>& phis,
                                  int quadrature_degree)
{
  const auto file = read_snapshots(path);
  return file.header.dim == 2 ? lei_level<2>(file, phis, quadrature_degree)
                              : lei_level<3>(file, phis, quadrature_degree);
}

/// Snapshots are processed in the given order, which should refine.
inline int cmd_lei(const ExperimentConfig& cfg, const std::vector<std::string>& snapshots, std::ostream& log)
{
  if (cfg.phi.empty())
    throw ConfigError("lei: no test function selected");
  for (int p : cfg.phi)
    if (p < 0 || p > 2)
      throw ConfigError("phi selector " + std::to_string(p) + " is not in {0, 1, 2}");
  std::vector<std::string> paths = snapshots;
  if (paths.empty())
    paths.push_back((std::filesystem::path(cfg.out) / "snapshots.bin").string());
  std::vector<LeiLevel> levels;
  for (const auto& p : paths) {
    levels.push_back(lei_from_snapshot(p, cfg.phi, cfg.quadrature_degree));
    const auto& L = levels.back();
    log << "lei: " << p << " (n = " << L.n << ", dt = " << format_number(L.dt) << ")\n";
    for (const auto& r : L.reports)
      log << "  " << r.phi_id << ": D = " << format_number(r.defect)
          << ", balance residual = " << format_number(r.balance) << "\n";
    if (!std::isnan(L.ledger_defect)) {
      const double d = L.space_constant_defect;
      log << "  ledger cross-check for s: D = " << format_number(L.ledger_defect) << ", relative difference "
          << format_number(std::abs(d - L.ledger_defect) / std::max(std::abs(L.ledger_defect), 1e-300)) << "\n";
    }
  }
  const std::filesystem::path out(cfg.out);
  std::filesystem::create_directories(out);
  lei_table(levels).write(out / "lei_report.csv");
  log << "  wrote " << (out / "lei_report.csv").string() << "\n";
  return exit_ok;
}

// ---------------------------------------------------------------------------
// probe
// ---------------------------------------------------------------------------

struct ProbeLevel
{
  int n = 0;
  double h = 0.0;
  double coercivity = 0.0;
  double inverse_constant = 0.0;
  double comm_l0_m0 = 0.0;
  double comm_l0_m1 = 0.0;
  double comm_l1_m1 = 0.0;
  double comm_unit_phi = 0.0; ///< phi = 1, l = m = 1
  double pressure_comm = 0.0;
};

template <int Dim>
ProbeLevel probe_level(const ExperimentConfig& cfg, int n)
{
  using Point = Eigen::Matrix<double, Dim, 1>;
  const auto d = make_discretization<Dim>(n, cfg.quadrature_degree);
  const L2Projector<Dim> projector(d->forms);
  ProbeLevel P;
  P.n = n;
  P.h = d->mesh.h();
  P.coercivity = coercivity_probe(d->forms);
  InverseProbeOptions opt;
  opt.seed = cfg.seed;
  P.inverse_constant = inverse_constant_probe(d->forms, opt);
  const Field v = interpolate(d->velocity, RandomDivFree<Dim>(cfg.seed, cfg.modes).function());
  const auto bump = SmoothScalar<Dim>::cosine_bump(0.5);
  P.comm_l0_m0 = commutator_defect(projector, v, bump, 0, 0);
  P.comm_l0_m1 = commutator_defect(projector, v, bump, 0, 1);
  P.comm_l1_m1 = commutator_defect(projector, v, bump, 1, 1);
  P.comm_unit_phi = commutator_defect(projector, v, SmoothScalar<Dim>::constant(1.0), 1, 1);
  const Field q = interpolate(d->pressure, ScalarFunction<Dim>([](const Point& x) {
                                return std::sin(x[0]) * std::cos(x[1]) + 0.5 * std::cos(2.0 * x[1]);
                              }));
  P.pressure_comm = pressure_commutator_defect(projector, q, bump);
  return P;
}

inline CsvTable probe_table(const std::vector<ProbeLevel>& levels)
{
  CsvTable t({"n", "h", "coercivity", "inverse_constant", "comm_l0_m0", "comm_l0_m1", "comm_l1_m1", "comm_unit_phi",
              "pressure_comm"});
  for (const auto& P : levels) {
    CsvTable::Row r;
    r << P.n << P.h << P.coercivity << P.inverse_constant << P.comm_l0_m0 << P.comm_l0_m1 << P.comm_l1_m1
      << P.comm_unit_phi << P.pressure_comm;
    t.add(r);
  }
  return t;
}

inline int cmd_probe(const ExperimentConfig& cfg, std::ostream& log)
{
  check_mesh_parameters(cfg.dim, 1);
  if (cfg.probe_levels.empty())
    throw ConfigError("probe: probe_levels is empty");
  std::vector<ProbeLevel> levels;
  for (int n : cfg.probe_levels) {
    check_mesh_parameters(cfg.dim, n);
    levels.push_back(cfg.dim == 2 ? probe_level<2>(cfg, n) : probe_level<3>(cfg, n));
    const auto& P = levels.back();
    log << "probe: n = " << n << ", coercivity " << format_number(P.coercivity) << ", inverse constant "
        << format_number(P.inverse_constant) << "\n";
  }
  const std::filesystem::path out(cfg.out);
  std::filesystem::create_directories(out);
  probe_table(levels).write(out / "probes.csv");
  log << "  wrote " << (out / "probes.csv").string() << "\n";
  return exit_ok;
}

/// Maps exceptions to exit codes and prints the message.
inline int run_guarded(const std::function<int()>& body, std::ostream& err)
{
  try {
    return body();
  } catch (const SolverError& e) {
    err << "error: " << e.what() << "\n";
    return exit_solver;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return exit_config;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return exit_config;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return exit_config;
  }
}

} // namespace thnse
