// mmflow: command-line runner for spaces, flows, checks and sweeps.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "mmflow/drift.hpp"
#include "mmflow/generators.hpp"
#include "mmflow/named_fields.hpp"
#include "mmflow/space_io.hpp"
#include "mmflow/trajectory.hpp"
#include "mmflow/verify.hpp"

namespace fs = std::filesystem;
using namespace mmflow;

namespace {

enum Exit : int { kPass = 0, kFail = 1, kBadArgs = 2, kIo = 3, kSolver = 4, kMalformed = 5 };

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::IoFailure:
      return kIo;
    case ErrorCode::SchemaViolation:
      return kMalformed;
    case ErrorCode::InnerSolverFailure:
    case ErrorCode::SolverFailure:
    case ErrorCode::NoConvergence:
    case ErrorCode::EigFailure:
    case ErrorCode::Infeasible:
      return kSolver;
    default:
      return kBadArgs;
  }
}

struct Global {
  std::uint64_t seed = 0;
  std::string out_dir = ".";
  int threads = 1;
};

struct SpaceArgs {
  std::string file;
  std::string kind;
  std::size_t n = 0;
  int subdivision = -1;
  double radius = 1.0;
  double side = 1.0;
  double total_angle = 0.0;
  std::size_t n_r = 0;
  std::size_t n_theta = 0;
};

void add_space_options(CLI::App* app, SpaceArgs& a) {
  app->add_option("--space", a.file, "space file");
  app->add_option("--kind", a.kind, "generator family: cycle, icosphere, flat_torus, cone, cube_boundary, two_point");
  app->add_option("--n", a.n, "point count (cycle), grid size (flat_torus) or cells per face edge (cube_boundary)");
  app->add_option("--subdiv", a.subdivision, "icosphere subdivision level");
  app->add_option("--radius", a.radius, "radius");
  app->add_option("--side", a.side, "side length");
  app->add_option("--angle", a.total_angle, "cone total angle");
  app->add_option("--nr", a.n_r, "cone radial rings");
  app->add_option("--ntheta", a.n_theta, "cone angular samples");
}

// The generator parameters; `size` overrides the primary count of the family.
nlohmann::json generator_params(const SpaceArgs& a, std::size_t size = 0) {
  const std::size_t n = size != 0 ? size : a.n;
  if (a.kind == "cycle") return {{"n", n}, {"radius", a.radius}};
  if (a.kind == "icosphere") return {{"subdivision", size != 0 ? static_cast<int>(size) : a.subdivision}, {"radius", a.radius}};
  if (a.kind == "flat_torus") return {{"n", n}, {"side", a.side}};
  if (a.kind == "cube_boundary") return {{"n_per_face", n}, {"side", a.side}};
  if (a.kind == "cone")
    return {{"total_angle", a.total_angle}, {"n_r", size != 0 ? size : a.n_r},
            {"n_theta", size != 0 ? 2 * size : a.n_theta}, {"radius", a.radius}};
  return nlohmann::json::object();
}

DiscreteMMSpace resolve_space(const SpaceArgs& a) {
  if (!a.file.empty() && !a.kind.empty()) throw Error(ErrorCode::BadParams, "give either --space or --kind, not both");
  if (!a.file.empty()) return load_space(a.file);
  if (a.kind.empty()) throw Error(ErrorCode::BadParams, "a space source is required (--space or --kind)");
  return generate(a.kind, generator_params(a));
}

std::vector<DiscreteMMSpace> resolve_family(const SpaceArgs& a, const std::vector<std::size_t>& sizes) {
  if (sizes.empty()) return {resolve_space(a)};
  if (a.kind.empty()) throw Error(ErrorCode::BadParams, "a refinement family needs --kind");
  std::vector<DiscreteMMSpace> out;
  for (std::size_t s : sizes) out.push_back(generate(a.kind, generator_params(a, s)));
  return out;
}

std::string output_path(const Global& g, const std::string& path) {
  fs::path p(path);
  if (p.is_relative() && g.out_dir != ".") p = fs::path(g.out_dir) / p;
  if (p.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(p.parent_path(), ec);
    if (ec) throw Error(ErrorCode::IoFailure, "cannot create directory " + p.parent_path().string());
  }
  return p.string();
}

void write_json(const nlohmann::json& doc, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open " + path + " for writing");
  out << doc.dump(1) << '\n';
  if (!out) throw Error(ErrorCode::IoFailure, "write to " + path + " failed");
}

std::string sidecar_path(const std::string& csv) {
  fs::path p(csv);
  p.replace_extension(".diagnostics.json");
  return p.string();
}

// ---------------------------------------------------------------------------

struct FlowArgs {
  SpaceArgs space;
  std::string init = "cos";
  std::string potential = "zero";
  double tau = 1e-2;
  double horizon = 0.5;
  double dt = 1e-2;
  std::string solver = "exact";
  double tol_inner = 1e-8;
  std::string out;
};

JkoConfig jko_config(const std::string& solver, double tau, double tol_inner) {
  JkoConfig cfg;
  cfg.tau = tau;
  cfg.tol_inner = tol_inner;
  if (solver == "exact") cfg.inner_solver = InnerSolver::ExactConvex;
  else if (solver == "entropic") cfg.inner_solver = InnerSolver::Entropic;
  else throw Error(ErrorCode::BadParams, "solver must be exact or entropic");
  return cfg;
}

int run_flow(const Global& g, const FlowArgs& a, bool jko) {
  const DiscreteMMSpace space = resolve_space(a.space);
  const Field v = named_potential(space, a.potential);
  const Field* vp = a.potential == "zero" ? nullptr : &v;
  const ProbMeasure mu0 = ProbMeasure::from_density(space, named_density(space, a.init, &v));
  const std::string csv = output_path(g, a.out);
  FlowTrajectory traj;
  if (!jko) {
    if (vp != nullptr) {
      // Fokker-Planck flow: heat flow of the weighted space.
      const DiscreteMMSpace weighted = weighted_space(space, v);
      const SpectralData spec = spectral_decompose(weighted);
      const Field rho_v = mu0.masses().cwiseQuotient(weighted.measure());
      for (double t : time_grid(0.0, a.horizon, a.dt)) {
        traj.times.push_back(t);
        traj.densities.push_back(heat_density(weighted, spec, t, rho_v).cwiseProduct(weighted.measure()).cwiseQuotient(space.measure()));
      }
      fill_diagnostics(space, traj, vp, true);
    } else {
      traj = heat_trajectory(space, spectral_decompose(space), mu0.density(), time_grid(0.0, a.horizon, a.dt), true);
    }
  } else {
    const JkoConfig cfg = jko_config(a.solver, a.tau, a.tol_inner);
    const auto steps = static_cast<std::size_t>(std::ceil(a.horizon / cfg.tau - 1e-9));
    if (steps > cfg.max_outer_steps) throw Error(ErrorCode::BadParams, "too many JKO steps");
    traj.times.push_back(0.0);
    traj.densities.push_back(mu0.density());
    ProbMeasure mu = mu0;
    for (std::size_t k = 1; k <= steps; ++k) {
      try {
        mu = jko_step(space, mu, cfg, vp).next;
      } catch (const Error& e) {
        fill_diagnostics(space, traj, vp, true);
        write_trajectory_csv(traj, csv);
        write_diagnostics_json(traj, sidecar_path(csv));
        std::cerr << "mmflow: step " << k << ": " << e.what() << " (partial trajectory written to " << csv << ")\n";
        return exit_code(e.code());
      }
      traj.times.push_back(static_cast<double>(k) * cfg.tau);
      traj.densities.push_back(mu.density());
    }
    fill_diagnostics(space, traj, vp, true);
  }
  write_trajectory_csv(traj, csv);
  write_diagnostics_json(traj, sidecar_path(csv));
  std::cout << "wrote " << traj.size() << " time steps to " << csv << '\n';
  return kPass;
}

// ---------------------------------------------------------------------------

struct CheckArgs {
  std::string name;
  SpaceArgs space;
  std::string init = "cos";
  std::string potential = "zero";
  std::string field = "cos";
  std::string test_fn = "uniform";
  std::vector<double> taus;
  std::vector<double> times;
  std::vector<std::size_t> sizes;
  double horizon = 0.5;
  double t = 0.1;
  double dt = -1.0;
  double k = 0.0;
  bool k_given = false;
  double p = 2.0;
  double q = 1.5;
  double alpha = 1.0;
  std::size_t budget = 8;
  std::size_t trials = 10;
  std::size_t pairs = 10;
  std::size_t eigen_k = 1;
  double tol = -1.0;
  double stationary_tol = -1.0;
  std::string solver = "exact";
  double tol_inner = 1e-8;
  std::string heat_file;
  std::string jko_file;
  std::string report;
};

std::vector<std::pair<ProbMeasure, ProbMeasure>> random_pairs(const DiscreteMMSpace& space, std::size_t count,
                                                              std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.05, 1.0);
  const auto n = static_cast<Eigen::Index>(space.size());
  std::vector<std::pair<ProbMeasure, ProbMeasure>> out;
  for (std::size_t i = 0; i < count; ++i) {
    Field a(n);
    Field b(n);
    for (Eigen::Index x = 0; x < n; ++x) a[x] = unit(rng);
    for (Eigen::Index x = 0; x < n; ++x) b[x] = unit(rng);
    out.emplace_back(ProbMeasure::from_density(space, a), ProbMeasure::from_density(space, b));
  }
  return out;
}

double curvature_or_sweep(const CheckArgs& a, const DiscreteMMSpace& space, const SpectralData& spec) {
  if (a.k_given) return a.k;
  return gamma2_sweep(space, smooth_test_fields(spec, 8, 0, 0));
}

const std::vector<std::string>& check_names() {
  static const std::vector<std::string> names{"identify", "dissipation", "speed",  "contraction",   "be",
                                              "gamma2",   "ricci",       "kernel-lip", "kernel-bound", "riesz",
                                              "linsym",   "drift-identify", "fp",   "cd"};
  return names;
}

CheckReport run_check(const Global& g, const CheckArgs& a) {
  const std::string& name = a.name;
  if (name == "kernel-bound" || name == "riesz" || name == "fp") {
    const std::vector<DiscreteMMSpace> family = resolve_family(a.space, a.sizes);
    if (name == "kernel-bound")
      return kernel_upper_check(family, a.times.empty() ? std::vector<double>{0.01, 0.05, 0.1} : a.times);
    if (name == "riesz") {
      const SpectralData spec = spectral_decompose(family.front());
      return riesz_probe(family, a.p, a.q, a.alpha, curvature_or_sweep(a, family.front(), spec));
    }
    std::vector<FpLevel> levels;
    for (const DiscreteMMSpace& s : family)
      levels.push_back({s, named_potential(s, a.potential), {named_density(s, a.field)}});
    return fp_consistency_check(levels);
  }

  if (name == "identify" && !a.heat_file.empty()) {
    const DiscreteMMSpace space = resolve_space(a.space);
    if (a.jko_file.empty()) throw Error(ErrorCode::BadParams, "--heat needs --jko");
    return identify_trajectories(space, read_trajectory_csv(a.heat_file), read_trajectory_csv(a.jko_file),
                                 a.tol >= 0.0 ? a.tol : 0.05 * space.diam());
  }

  const DiscreteMMSpace space = resolve_space(a.space);
  const Field v = named_potential(space, a.potential);
  const Field rho0 = named_density(space, a.init, &v);
  const std::vector<double> taus = a.taus.empty() ? std::vector<double>{1e-2, 5e-3, 2.5e-3} : a.taus;

  if (name == "drift-identify") {
    DriftIdentifyOptions opt;
    opt.tolerance = a.tol;
    opt.jko = jko_config(a.solver, taus.front(), a.tol_inner);
    if (a.stationary_tol >= 0.0) {
      opt.require_stationary = true;
      opt.stationary_tol = a.stationary_tol;
    }
    return drift_identify(space, v, rho0, taus, a.horizon, opt);
  }
  if (name == "cd") {
    const auto pairs = random_pairs(space, a.pairs, g.seed);
    const std::vector<double> grid = a.times.empty() ? std::vector<double>{0.25, 0.5, 0.75} : a.times;
    const double tol = a.tol >= 0.0 ? a.tol : 1e-6;
    if (a.potential != "zero") return convexity_shift_probe(space, v, a.k, pairs, grid, tol);
    detail::Stopwatch clock;
    const ConvexityReport c = cd_convexity_probe(space, a.k, pairs, grid, tol);
    CheckReport r;
    r.name = "cd";
    r.space = space.name();
    r.params = {{"K", a.k}, {"pairs", pairs.size()}, {"times", grid}};
    auto num = [](double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr); };
    r.observed = {{"worst_deficit", num(c.worst_deficit)}, {"largest_passing_K", num(c.largest_passing_k)},
                  {"samples", c.samples}};
    r.expected = {{"worst_deficit_max", tol}};
    r.tolerance = tol;
    r.pass = c.pass;
    r.seed = g.seed;
    r.runtime_ms = clock.ms();
    return r;
  }

  const SpectralData spec = spectral_decompose(space);
  CheckReport r;
  if (name == "identify") {
    IdentifyOptions opt;
    opt.tolerance = a.tol;
    opt.jko = jko_config(a.solver, taus.front(), a.tol_inner);
    r = identify(space, spec, rho0, taus, a.horizon, opt);
  } else if (name == "dissipation") {
    r = dissipation_check(space, spec, rho0, a.times.empty() ? std::vector<double>{0.05, 0.1, 0.2, 0.5} : a.times,
                          a.dt > 0.0 ? a.dt : 1e-4, a.tol >= 0.0 ? a.tol : 1e-3);
  } else if (name == "speed") {
    const std::vector<double> grid = a.times.empty() ? time_grid(0.01, 1.0, a.dt > 0.0 ? a.dt : 0.01) : a.times;
    r = speed_bound_check(space, spec, rho0, grid, a.tol >= 0.0 ? a.tol : 1e-6);
  } else if (name == "contraction") {
    r = contraction_check(space, spec, random_pairs(space, a.pairs, g.seed), a.p, a.k,
                          a.times.empty() ? std::vector<double>{0.01, 0.1, 1.0} : a.times, a.tol >= 0.0 ? a.tol : 1e-6);
  } else if (name == "be") {
    const Field f = named_density(space, a.field, &v);
    r = be_check(space, spec, f, a.t, a.k, a.tol >= 0.0 ? a.tol : 1e-12);
    r.observed["K_BE"] = be_sweep(space, spec, {f}, {a.t});
  } else if (name == "gamma2") {
    const Field f = named_density(space, a.field, &v);
    r = gamma2_check(space, f, named_density(space, a.test_fn, &v), a.k, a.tol >= 0.0 ? a.tol : 1e-10);
    r.observed["K_Gamma2"] = gamma2_sweep(space, {f});
  } else if (name == "ricci") {
    RicciOptions opt;
    opt.budget = a.budget;
    opt.seed = g.seed;
    if (!a.times.empty()) opt.t_set = a.times;
    r = ricci_equivalence(space, spec, opt);
  } else if (name == "kernel-lip") {
    r = eigen_lipschitz_check(space, spec, a.eigen_k, a.t, curvature_or_sweep(a, space, spec));
    r.observed["kernel_lipschitz"] = kernel_lipschitz(space, spec, a.t);
  } else if (name == "linsym") {
    r = linearity_symmetry_check(space, spec, a.t, a.trials, g.seed, a.tol >= 0.0 ? a.tol : 1e-10);
  } else {
    throw Error(ErrorCode::SchemaViolation, "unknown check '" + name + "'");
  }
  r.seed = g.seed;
  return r;
}

// ---------------------------------------------------------------------------

struct SweepArgs {
  CheckArgs check;
  std::string axis;
  std::vector<std::string> raw_values;
  std::vector<double> values;
  std::string out;
};

std::string csv_number(double v) { return std::isfinite(v) ? detail::fmt17(v) : std::string("nan"); }

int run_sweep(const Global& g, SweepArgs& a) {
  for (const std::string& v : a.raw_values)
    if (!v.empty()) a.values.push_back(detail::parse_number(v, "--values"));
  if (a.values.empty()) throw Error(ErrorCode::SchemaViolation, "sweep range is empty");
  const std::string& check = a.check.name;
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  if (a.axis == "tau") {
    if (check != "identify" && check != "drift-identify")
      throw Error(ErrorCode::SchemaViolation, "tau sweeps support identify and drift-identify");
    header = {"tau", "discrepancy", "pass"};
    for (double tau : a.values) {
      CheckArgs c = a.check;
      c.taus = {tau};
      const CheckReport r = run_check(g, c);
      rows.push_back({tau, r.observed["finest"].get<double>(), r.pass ? 1.0 : 0.0});
    }
  } else if (a.axis == "mesh") {
    header = {"size", "h", check == "fp" ? "defect" : check == "kernel-bound" ? "C_meas" : "chain_rule_defect"};
    for (double size : a.values) {
      if (!(size >= 1.0) || size != std::floor(size)) throw Error(ErrorCode::SchemaViolation, "mesh values must be counts");
      SpaceArgs s = a.check.space;
      const DiscreteMMSpace space = resolve_family(s, {static_cast<std::size_t>(size)}).front();
      double value = 0.0;
      if (check == "fp") {
        value = fp_defect(space, named_potential(space, a.check.potential), named_density(space, a.check.field));
      } else if (check == "kernel-bound") {
        value = kernel_upper_constant(space, spectral_decompose(space),
                                      a.check.times.empty() ? std::vector<double>{0.01, 0.05, 0.1} : a.check.times);
      } else if (check == "dissipation") {
        const SpectralData spec = spectral_decompose(space);
        value = chain_rule_defect(space, heat_density(space, spec, a.check.t, named_density(space, a.check.init)));
      } else {
        throw Error(ErrorCode::SchemaViolation, "mesh sweeps support fp, kernel-bound and dissipation");
      }
      rows.push_back({size, space.mesh_size(), value});
    }
  } else if (a.axis == "t") {
    const DiscreteMMSpace space = resolve_space(a.check.space);
    const SpectralData spec = spectral_decompose(space);
    if (check == "be") {
      header = {"t", "K_BE"};
      const std::vector<Field> fields = smooth_test_fields(spec, a.check.budget, a.check.budget, g.seed);
      for (double t : a.values) rows.push_back({t, be_sweep(space, spec, fields, {t})});
    } else if (check == "kernel-lip") {
      header = {"t", "kernel_lipschitz"};
      for (double t : a.values) rows.push_back({t, kernel_lipschitz(space, spec, t)});
    } else if (check == "contraction") {
      header = {"t", "fitted_K", "worst_excess"};
      const auto pairs = random_pairs(space, a.check.pairs, g.seed);
      for (double t : a.values) {
        const ContractionResult c = contraction_scan(space, spec, pairs, a.check.p, a.check.k, {t}, 1e-6);
        rows.push_back({t, c.fitted_k, c.worst_excess});
      }
    } else {
      throw Error(ErrorCode::SchemaViolation, "t sweeps support be, kernel-lip and contraction");
    }
  } else if (a.axis == "K") {
    if (check != "cd" && check != "be" && check != "gamma2")
      throw Error(ErrorCode::SchemaViolation, "K sweeps support cd, be and gamma2");
    header = {"K", "pass"};
    for (double k : a.values) {
      CheckArgs c = a.check;
      c.k = k;
      c.k_given = true;
      rows.push_back({k, run_check(g, c).pass ? 1.0 : 0.0});
    }
  } else {
    throw Error(ErrorCode::SchemaViolation, "unknown sweep axis '" + a.axis + "'");
  }
  const std::string path = output_path(g, a.out.empty() ? "sweep_" + a.axis + ".csv" : a.out);
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open " + path + " for writing");
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << csv_number(row[i]);
    out << '\n';
  }
  if (!out) throw Error(ErrorCode::IoFailure, "write to " + path + " failed");
  std::cout << "wrote " << rows.size() << " rows to " << path << '\n';
  return kPass;
}

void add_check_options(CLI::App* app, CheckArgs& a) {
  add_space_options(app, a.space);
  app->add_option("--init", a.init, "initial density: uniform, cos, bump, gibbs, dirac:i, vec:..., file:path");
  app->add_option("--potential", a.potential, "potential: zero, cos:A, sin:A, quad:A, vec:..., file:path");
  app->add_option("--field", a.field, "test function (same names as --init)");
  app->add_option("--test-fn", a.test_fn, "nonnegative test function for gamma2");
  app->add_option("--tau", a.taus, "JKO step sizes")->delimiter(',');
  app->add_option("--times", a.times, "time samples")->delimiter(',');
  app->add_option("--sizes", a.sizes, "refinement family sizes")->delimiter(',');
  app->add_option("--T", a.horizon, "flow horizon");
  app->add_option("--t", a.t, "time");
  app->add_option("--dt", a.dt, "time step of finite differences / grids");
  app->add_option("--K", a.k, "curvature parameter")->each([&a](const std::string&) { a.k_given = true; });
  app->add_option("--p", a.p, "exponent p");
  app->add_option("--q", a.q, "resolvent power q");
  app->add_option("--alpha", a.alpha, "resolvent shift alpha");
  app->add_option("--budget", a.budget, "test-set budget");
  app->add_option("--trials", a.trials, "random trials");
  app->add_option("--pairs", a.pairs, "random measure pairs");
  app->add_option("--k", a.eigen_k, "eigenfunction index");
  app->add_option("--tol", a.tol, "tolerance override");
  app->add_option("--stationary-tol", a.stationary_tol, "required W_2 distance to the Gibbs measure");
  app->add_option("--solver", a.solver, "JKO inner solver: exact or entropic");
  app->add_option("--tol-inner", a.tol_inner, "JKO inner tolerance");
  app->add_option("--heat", a.heat_file, "heat trajectory CSV (identify from files)");
  app->add_option("--jko", a.jko_file, "JKO trajectory CSV (identify from files)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mmflow: heat flow, JKO flow and curvature checks on discrete metric-measure spaces"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML/INI file with option values; command-line flags take precedence");
  Global g;
  app.add_option("--seed", g.seed, "seed for sampled checks");
  app.add_option("--out-dir", g.out_dir, "directory for relative output paths and reports");
  app.add_option("--threads", g.threads, "worker threads")->check(CLI::PositiveNumber);

  CLI::App* space_cmd = app.add_subcommand("space", "generate or inspect spaces");
  space_cmd->require_subcommand(1);
  SpaceArgs gen_args;
  std::string gen_out;
  CLI::App* gen = space_cmd->add_subcommand("gen", "generate a space file");
  add_space_options(gen, gen_args);
  gen->add_option("--out", gen_out, "output space file")->required();
  SpaceArgs info_args;
  CLI::App* info = space_cmd->add_subcommand("info", "summarize a space");
  add_space_options(info, info_args);

  CLI::App* flow_cmd = app.add_subcommand("flow", "run a flow and write a trajectory");
  flow_cmd->require_subcommand(1);
  FlowArgs flow_args;
  CLI::App* heat = flow_cmd->add_subcommand("heat", "exact heat flow");
  CLI::App* jko = flow_cmd->add_subcommand("jko", "JKO minimizing movements");
  for (CLI::App* sub : {heat, jko}) {
    add_space_options(sub, flow_args.space);
    sub->add_option("--init", flow_args.init, "initial density");
    sub->add_option("--potential", flow_args.potential, "potential");
    sub->add_option("--T", flow_args.horizon, "horizon");
    sub->add_option("--out", flow_args.out, "trajectory CSV")->required();
  }
  heat->add_option("--dt", flow_args.dt, "sampling step");
  jko->add_option("--tau", flow_args.tau, "step size");
  jko->add_option("--solver", flow_args.solver, "exact or entropic");
  jko->add_option("--tol-inner", flow_args.tol_inner, "inner tolerance");

  CheckArgs check_args;
  CLI::App* check_cmd = app.add_subcommand("check", "run a named check and write its report");
  check_cmd->add_option("name", check_args.name, "check name")->required();
  check_cmd->add_option("--report", check_args.report, "report path (default <out-dir>/<name>.json)");
  add_check_options(check_cmd, check_args);

  SweepArgs sweep_args;
  CLI::App* sweep_cmd = app.add_subcommand("sweep", "sweep a check over tau, mesh, t or K");
  sweep_cmd->add_option("--axis", sweep_args.axis, "tau, mesh, t or K")->required();
  sweep_cmd->add_option("--check", sweep_args.check.name, "check to sweep")->required();
  sweep_cmd->add_option("--values", sweep_args.raw_values, "sweep points")->delimiter(',');
  sweep_cmd->add_option("--out", sweep_args.out, "output CSV");
  add_check_options(sweep_cmd, sweep_args.check);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kPass : kBadArgs;
  }
  Eigen::setNbThreads(g.threads);

  try {
    if (*gen) {
      const DiscreteMMSpace space = resolve_space(gen_args);
      const std::string path = output_path(g, gen_out);
      save_space(space, path);
      std::printf("%s: n=%zu diam=%.17g total_measure=%.17g\n", path.c_str(), space.size(), space.diam(),
                  space.total_measure());
      return kPass;
    }
    if (*info) {
      const DiscreteMMSpace space = resolve_space(info_args);
      nlohmann::json doc{{"name", space.name()},          {"n", space.size()},
                         {"edges", space.edges().size()}, {"diam", space.diam()},
                         {"total_measure", space.total_measure()}, {"mesh_size", space.mesh_size()}};
      std::cout << doc.dump(1) << '\n';
      return kPass;
    }
    if (*heat) return run_flow(g, flow_args, false);
    if (*jko) return run_flow(g, flow_args, true);
    if (*check_cmd) {
      const auto& names = check_names();
      if (std::find(names.begin(), names.end(), check_args.name) == names.end()) {
        std::cerr << "mmflow: unknown check '" << check_args.name << "'\n";
        return kMalformed;
      }
      const CheckReport r = run_check(g, check_args);
      const std::string path = output_path(g, check_args.report.empty() ? check_args.name + ".json" : check_args.report);
      write_json(r.to_json(), path);
      std::cout << r.name << ": " << (r.pass ? "pass" : "fail") << " (" << path << ")\n";
      return r.pass ? kPass : kFail;
    }
    if (*sweep_cmd) return run_sweep(g, sweep_args);
  } catch (const Error& e) {
    std::cerr << "mmflow: " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "mmflow: malformed input: " << e.what() << '\n';
    return kMalformed;
  }
  return kBadArgs;
}
