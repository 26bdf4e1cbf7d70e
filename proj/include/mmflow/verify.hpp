#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "mmflow/dirichlet.hpp"
#include "mmflow/entropy.hpp"
#include "mmflow/error.hpp"
#include "mmflow/jko.hpp"
#include "mmflow/measure.hpp"
#include "mmflow/space.hpp"
#include "mmflow/trajectory.hpp"
#include "mmflow/wasserstein.hpp"

namespace mmflow {

struct CheckReport {
  std::string name;
  std::string space;
  nlohmann::json params = nlohmann::json::object();
  nlohmann::json observed = nlohmann::json::object();
  nlohmann::json expected = nlohmann::json::object();
  bool pass = false;
  double tolerance = 0.0;
  double runtime_ms = 0.0;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const {
    return {{"name", name},         {"space", space},         {"params", params},
            {"observed", observed}, {"expected", expected},   {"pass", pass},
            {"tolerance", tolerance}, {"runtime_ms", runtime_ms}, {"seed", seed}};
  }
};

namespace detail {

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

inline CheckReport start_report(const std::string& name, const DiscreteMMSpace& space) {
  CheckReport r;
  r.name = name;
  r.space = space.name();
  return r;
}

inline double finite_or_max(double v) { return std::isfinite(v) ? v : std::numeric_limits<double>::max(); }

}  // namespace detail

// ---------------------------------------------------------------------------
// Identification of the heat flow and the JKO flow.

/// max_k W_2 between two sequences of point masses.
inline double max_w2_discrepancy(const DiscreteMMSpace& space, const std::vector<Field>& a, const std::vector<Field>& b) {
  const std::size_t count = std::min(a.size(), b.size());
  double worst = 0.0;
  for (std::size_t k = 0; k < count; ++k)
    worst = std::max(worst, w2(space, ProbMeasure::from_masses(space, a[k]), ProbMeasure::from_masses(space, b[k])));
  return worst;
}

inline std::vector<Field> masses_of(const DiscreteMMSpace& space, const std::vector<Field>& densities) {
  std::vector<Field> out;
  out.reserve(densities.size());
  for (const Field& rho : densities) out.push_back(rho.cwiseProduct(space.measure()));
  return out;
}

struct IdentifyOptions {
  double tolerance = -1.0;  // finest-tau bound; negative means 0.05 diam
  JkoConfig jko;
};

/// Runs the JKO flow for every tau and compares with the exact heat flow at
/// the JKO time stamps k tau. Passes when the discrepancy does not grow as tau
/// shrinks and the finest one is within tolerance.
inline CheckReport identify(const DiscreteMMSpace& space, const SpectralData& spec, const Field& rho0,
                            std::vector<double> taus, double horizon, IdentifyOptions options = {}) {
  detail::Stopwatch clock;
  CheckReport r = detail::start_report("identify", space);
  if (taus.empty()) throw Error(ErrorCode::BadParams, "identify needs at least one tau");
  std::sort(taus.begin(), taus.end(), std::greater<>());
  const double tol = options.tolerance >= 0.0 ? options.tolerance : 0.05 * space.diam();
  const ProbMeasure mu0 = ProbMeasure::from_density(space, rho0);
  std::vector<double> disc;
  for (double tau : taus) {
    JkoConfig cfg = options.jko;
    cfg.tau = tau;
    const FlowTrajectory jko = jko_flow(space, mu0, horizon, cfg, nullptr, false);
    std::vector<Field> heat;
    for (double t : jko.times) heat.push_back(heat_density(space, spec, t, mu0.density()).cwiseProduct(space.measure()));
    disc.push_back(max_w2_discrepancy(space, heat, masses_of(space, jko.densities)));
  }
  bool monotone = true;
  for (std::size_t i = 1; i < disc.size(); ++i) monotone = monotone && disc[i] <= disc[i - 1] + 1e-9;
  r.params = {{"taus", taus}, {"T", horizon}};
  r.observed = {{"discrepancy", disc}, {"monotone", monotone}, {"finest", disc.back()}};
  r.expected = {{"finest_max", tol}, {"monotone", true}};
  r.tolerance = tol;
  r.pass = monotone && disc.back() <= tol;
  r.runtime_ms = clock.ms();
  return r;
}

/// Identification from two stored trajectories: max W_2 over the times both
/// files share (matched within 1e-9).
inline CheckReport identify_trajectories(const DiscreteMMSpace& space, const FlowTrajectory& heat,
                                         const FlowTrajectory& jko, double tol) {
  detail::Stopwatch clock;
  CheckReport r = detail::start_report("identify", space);
  double worst = 0.0;
  std::size_t matched = 0;
  std::size_t j = 0;
  for (std::size_t k = 0; k < jko.size(); ++k) {
    while (j < heat.size() && heat.times[j] < jko.times[k] - 1e-9) ++j;
    if (j == heat.size()) break;
    if (std::fabs(heat.times[j] - jko.times[k]) > 1e-9) continue;
    require_same_size(space, heat.densities[j], "heat density");
    require_same_size(space, jko.densities[k], "jko density");
    worst = std::max(worst, w2(space, ProbMeasure::from_density(space, heat.densities[j]),
                               ProbMeasure::from_density(space, jko.densities[k])));
    ++matched;
  }
  if (matched == 0) throw Error(ErrorCode::SchemaViolation, "trajectories share no time stamps");
  r.observed = {{"discrepancy", worst}, {"matched_times", matched}};
  r.expected = {{"max", tol}};
  r.tolerance = tol;
  r.pass = worst <= tol;
  r.runtime_ms = clock.ms();
  return r;
}

// ---------------------------------------------------------------------------
// Entropy dissipation and speed.

/// |d/dt Ent + I|: the gap between the exact discrete dissipation rate and the
/// Fisher information, which vanishes only through the chain rule.
inline double chain_rule_defect(const DiscreteMMSpace& space, const Field& rho) {
  return std::fabs(ent_rate(space, rho) + fisher(space, rho));
}

/// Central difference (Ent(t + dt) - Ent(t - dt)) / (2 dt) along the heat flow
/// against the exact discrete rate sum m (log rho + 1) Delta rho at each time.
inline CheckReport dissipation_check(const DiscreteMMSpace& space, const SpectralData& spec, const Field& rho0,
                                     const std::vector<double>& times, double dt, double tol = 1e-3) {
  detail::Stopwatch clock;
  CheckReport r = detail::start_report("dissipation", space);
  if (times.empty()) throw Error(ErrorCode::GridTooCoarse, "need at least one time");
  if (!(dt > 0.0)) throw Error(ErrorCode::BadParams, "dt must be positive");
  double worst_rel = 0.0;
  double worst_chain = 0.0;
  double worst_chain_rel = 0.0;
  for (double t : times) {
    if (!(t - dt > 0.0)) throw Error(ErrorCode::GridTooCoarse, "times must exceed dt");
    const Field rho = heat_density(space, spec, t, rho0);
    const double exact = ent_rate(space, rho);
    const double cd = (ent(space, heat_density(space, spec, t + dt, rho0)) -
                       ent(space, heat_density(space, spec, t - dt, rho0))) / (2.0 * dt);
    const double err = std::fabs(cd - exact);
    const double rel = err <= 1e-14 ? 0.0 : err / std::fabs(exact);
    worst_rel = std::max(worst_rel, detail::finite_or_max(rel));
    const double chain = chain_rule_defect(space, rho);
    worst_chain = std::max(worst_chain, chain);
    if (std::fabs(exact) > 0.0) worst_chain_rel = std::max(worst_chain_rel, chain / std::fabs(exact));
  }
  r.params = {{"times", times}, {"dt", dt}};
  r.observed = {{"max_relative_error", worst_rel},
                {"chain_rule_defect", worst_chain},
                {"chain_rule_relative", worst_chain_rel}};
  r.expected = {{"max_relative_error", tol}};
  r.tolerance = tol;
  r.pass = worst_rel <= tol;
  r.runtime_ms = clock.ms();
  return r;
}

/// Metric derivative squared against the Fisher information along the heat
/// flow sampled on t_grid (interior points only).
inline CheckReport speed_bound_check(const DiscreteMMSpace& space, const SpectralData& spec, const Field& rho0,
                                     const std::vector<double>& t_grid, double tol = 1e-6) {
  detail::Stopwatch clock;
  CheckReport r = detail::start_report("speed", space);
  if (t_grid.size() < 3) throw Error(ErrorCode::GridTooCoarse, "need at least three times");
  const FlowTrajectory traj = heat_trajectory(space, spec, rho0, t_grid, true);
  double worst_margin = std::numeric_limits<double>::infinity();
  double worst_ratio = 0.0;
  std::size_t violations = 0;
  for (std::size_t k = 1; k + 1 < traj.size(); ++k) {
    const double sq = traj.speed[k] * traj.speed[k];
    const double margin = traj.fisher[k] - sq;
    worst_margin = std::min(worst_margin, margin);
    if (traj.fisher[k] > 0.0) worst_ratio = std::max(worst_ratio, sq / traj.fisher[k]);
    if (margin < -tol) ++violations;
  }
  r.params = {{"t_min", t_grid.front()}, {"t_max", t_grid.back()}, {"points", t_grid.size()}};
  r.observed = {{"worst_margin", worst_margin}, {"worst_ratio", worst_ratio}, {"violations", violations}};
  r.expected = {{"worst_margin_min", -tol}};
  r.tolerance = tol;
  r.pass = violations == 0;
  r.runtime_ms = clock.ms();
  return r;
}

// ---------------------------------------------------------------------------
// Contraction.

struct ContractionResult {
  std::size_t violations = 0;
  double worst_excess = -std::numeric_limits<double>::infinity();
  double fitted_k = std::numeric_limits<double>::infinity();
};

inline ContractionResult contraction_scan(const DiscreteMMSpace& space, const SpectralData& spec,
                                          const std::vector<std::pair<ProbMeasure, ProbMeasure>>& pairs, double p,
                                          double k, const std::vector<double>& t_grid, double tol) {
  ContractionResult out;
  for (const auto& [mu, nu] : pairs) {
    const double w0 = wp(space, mu, nu, p).value;
    for (double t : t_grid) {
      if (!(t > 0.0)) throw Error(ErrorCode::BadParams, "contraction times must be positive");
      const ProbMeasure a = ProbMeasure::from_density(space, heat_density(space, spec, t, mu.density()));
      const ProbMeasure b = ProbMeasure::from_density(space, heat_density(space, spec, t, nu.density()));
      const double wt = wp(space, a, b, p).value;
      const double excess = wt - std::exp(-k * t) * w0;
      out.worst_excess = std::max(out.worst_excess, excess);
      if (excess > tol) ++out.violations;
      if (w0 > tol && wt > 0.0) out.fitted_k = std::min(out.fitted_k, -std::log(wt / w0) / t);
    }
  }
  return out;
}

/// W_p(T_t mu, T_t nu) <= exp(-K t) W_p(mu, nu) + tol on all pairs and times;
/// also fits K_contr = inf -log(W_p ratio) / t.
inline CheckReport contraction_check(const DiscreteMMSpace& space, const SpectralData& spec,
                                     const std::vector<std::pair<ProbMeasure, ProbMeasure>>& pairs, double p, double k,
                                     const std::vector<double>& t_grid, double tol = 1e-6) {
  detail::Stopwatch clock;
  CheckReport r = detail::start_report("contraction", space);
  if (!(p >= 1.0 && p <= 2.0)) throw Error(ErrorCode::BadParams, "p must lie in [1, 2]");
  const ContractionResult scan = contraction_scan(space, spec, pairs, p, k, t_grid, tol);
  r.params = {{"p", p}, {"K", k}, {"times", t_grid}, {"pairs", pairs.size()}};
  r.observed = {{"violations", scan.violations},
                {"worst_excess", scan.worst_excess},
                {"fitted_K", std::isfinite(scan.fitted_k) ? nlohmann::json(scan.fitted_k) : nlohmann::json(nullptr)}};
  r.expected = {{"violations", 0}};
  r.tolerance = tol;
  r.pass = scan.violations == 0;
  r.runtime_ms = clock.ms();
  return r;
}

// ---------------------------------------------------------------------------
// Bakry-Emery gradient estimate and Gamma_2.

/// Gamma(T_t f) <= exp(-2 K t) T_t Gamma(f) pointwise.
inline CheckReport be_check(const DiscreteMMSpace& space, const SpectralData& spec, const Field& f, double t, double k,
                            double tol = 1e-12) {
  detail::Stopwatch clock;
  CheckReport r = detail::start_report("be", space);
  if (!(t > 0.0)) throw Error(ErrorCode::BadParams, "t must be positive");
  const Field lhs = gamma(space, heat_apply(space, spec, t, f));
  const Field rhs = std::exp(-2.0 * k * t) * heat_apply(space, spec, t, gamma(space, f));
  const double excess = (lhs - rhs).maxCoeff();
  r.params = {{"t", t}, {"K", k}};
  r.observed = {{"worst_excess", excess}};
  r.expected = {{"worst_excess_max", tol}};
  r.tolerance = tol;
  r.pass = excess <= tol;
  r.runtime_ms = clock.ms();
  return r;
}

/// K_BE = inf over (f, t, x) of (1 / 2t) log[T_t Gamma(f)(x) / Gamma(T_t f)(x)]
/// over points where Gamma(T_t f)(x) exceeds rel_threshold times its maximum
/// over the whole test set.
inline double be_sweep(const DiscreteMMSpace& space, const SpectralData& spec, const std::vector<Field>& f_set,
                       const std::vector<double>& t_set, double rel_threshold = 1e-8) {
  double scale = 0.0;
  std::vector<std::pair<Field, Field>> terms;
  std::vector<double> ts;
  for (const Field& f : f_set) {
    for (double t : t_set) {
      if (!(t > 0.0)) throw Error(ErrorCode::BadParams, "sweep times must be positive");
      Field lhs = gamma(space, heat_apply(space, spec, t, f));
      Field rhs = heat_apply(space, spec, t, gamma(space, f));
      scale = std::max(scale, lhs.maxCoeff());
      terms.emplace_back(std::move(lhs), std::move(rhs));
      ts.push_back(t);
    }
  }
  double k = std::numeric_limits<double>::infinity();
  bool any = false;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const auto& [lhs, rhs] = terms[i];
    for (Eigen::Index x = 0; x < lhs.size(); ++x) {
      if (!(lhs[x] > rel_threshold * scale) || !(rhs[x] > 0.0)) continue;
      any = true;
      k = std::min(k, std::log(rhs[x] / lhs[x]) / (2.0 * ts[i]));
    }
  }
  if (!any) throw Error(ErrorCode::DegenerateGamma, "every Gamma(T_t f) is below the threshold");
  return k;
}

/// Weak Bochner inequality 1/2 int Delta g Gamma(f) - int g Gamma(Delta f, f) >= K int g Gamma(f)
/// for a nonnegative test function g.
inline CheckReport gamma2_check(const DiscreteMMSpace& space, const Field& f, const Field& g, double k,
                                double tol = 1e-10) {
  detail::Stopwatch clock;
  CheckReport r = detail::start_report("gamma2", space);
  require_same_size(space, g, "g");
  if (g.minCoeff() < 0.0) throw Error(ErrorCode::NegativeTestFunction, "test function must be nonnegative");
  const Field& m = space.measure();
  const Field gf = gamma(space, f);
  const double lhs = 0.5 * m.cwiseProduct(laplacian(space, g)).dot(gf) - m.cwiseProduct(g).dot(gamma(space, laplacian(space, f), f));
  const double rhs = k * m.cwiseProduct(g).dot(gf);
  r.params = {{"K", k}};
  r.observed = {{"lhs", lhs}, {"rhs", rhs}, {"residual", lhs - rhs}};
  r.expected = {{"residual_min", -tol}};
  r.tolerance = tol;
  r.pass = lhs - rhs >= -tol;
  r.runtime_ms = clock.ms();
  return r;
}

/// K_Gamma2 = min over f and x with Gamma(f)(x) above rel_threshold times the
/// largest Gamma in the set of Gamma_2(f)(x) / Gamma(f)(x).
inline double gamma2_sweep(const DiscreteMMSpace& space, const std::vector<Field>& f_set, double rel_threshold = 1e-8) {
  double scale = 0.0;
  std::vector<std::pair<Field, Field>> terms;
  for (const Field& f : f_set) {
    Field g = gamma(space, f);
    scale = std::max(scale, g.maxCoeff());
    terms.emplace_back(gamma2(space, f), std::move(g));
  }
  double k = std::numeric_limits<double>::infinity();
  bool any = false;
  for (const auto& [g2, g] : terms) {
    for (Eigen::Index x = 0; x < g.size(); ++x) {
      if (!(g[x] > rel_threshold * scale)) continue;
      any = true;
      k = std::min(k, g2[x] / g[x]);
    }
  }
  if (!any) throw Error(ErrorCode::DegenerateGamma, "every Gamma(f) is below the threshold");
  return k;
}

// ---------------------------------------------------------------------------
// Test sets shared by the sweeps.

/// The first `count` nonconstant eigenfunctions followed by `random_count`
/// random combinations of the first 2 count + 1 of them (band-limited fields).
inline std::vector<Field> smooth_test_fields(const SpectralData& spec, std::size_t count, std::size_t random_count,
                                             std::uint64_t seed) {
  std::vector<Field> out;
  const std::size_t n = spec.size();
  const std::size_t top = std::min(n - 1, count);
  for (std::size_t k = 1; k <= top; ++k) out.push_back(spec.phi.col(static_cast<Eigen::Index>(k)));
  const std::size_t band = std::min(n - 1, 2 * count + 1);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t r = 0; r < random_count && band >= 1; ++r) {
    Field f = Field::Zero(static_cast<Eigen::Index>(n));
    for (std::size_t k = 1; k <= band; ++k) f += normal(rng) * spec.phi.col(static_cast<Eigen::Index>(k));
    out.push_back(f);
  }
  return out;
}

/// Dirac pairs on the endpoints of edges, first `count` conducting edges in
/// storage order.
inline std::vector<std::pair<ProbMeasure, ProbMeasure>> neighbour_dirac_pairs(const DiscreteMMSpace& space,
                                                                              std::size_t count) {
  std::vector<std::pair<ProbMeasure, ProbMeasure>> out;
  const std::size_t stride = std::max<std::size_t>(1, space.edges().size() / std::max<std::size_t>(1, count));
  for (std::size_t k = 0; k < space.edges().size() && out.size() < count; k += stride) {
    const Edge& e = space.edges()[k];
    if (e.conductance <= 0.0) continue;
    out.emplace_back(ProbMeasure::dirac(space, e.i), ProbMeasure::dirac(space, e.j));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Equivalence of the curvature bounds.

struct RicciOptions {
  std::size_t budget = 8;
  std::vector<double> t_set{0.05, 0.1, 0.2};
  double contraction_p = 1.0;
  std::uint64_t seed = 0;
};

/// K_contr (W_1 contraction of neighbouring Diracs), K_BE and K_Gamma2 on
/// shared smooth test sets; passes when pairwise gaps are within
/// 0.1 (1 + max |K|).
inline CheckReport ricci_equivalence(const DiscreteMMSpace& space, const SpectralData& spec, const RicciOptions& opt = {}) {
  detail::Stopwatch clock;
  CheckReport r = detail::start_report("ricci", space);
  const std::vector<Field> fields = smooth_test_fields(spec, opt.budget, opt.budget, opt.seed);
  const double k_g2 = gamma2_sweep(space, fields);
  const double k_be = be_sweep(space, spec, fields, opt.t_set);
  const auto pairs = neighbour_dirac_pairs(space, opt.budget);
  const double k_contr = contraction_scan(space, spec, pairs, opt.contraction_p, 0.0, opt.t_set, 1e-12).fitted_k;
  const double kmax = std::max({std::fabs(k_g2), std::fabs(k_be), std::fabs(k_contr)});
  const double gap = std::max({std::fabs(k_g2 - k_be), std::fabs(k_be - k_contr), std::fabs(k_g2 - k_contr)});
  const double tol = 0.1 * (1.0 + kmax);
  r.params = {{"budget", opt.budget}, {"times", opt.t_set}, {"p", opt.contraction_p}};
  r.observed = {{"K_contr", k_contr}, {"K_BE", k_be}, {"K_Gamma2", k_g2}, {"max_gap", gap}};
  r.expected = {{"max_gap", tol}};
  r.tolerance = tol;
  r.seed = opt.seed;
  r.pass = gap <= tol;
  r.runtime_ms = clock.ms();
  return r;
}

// ---------------------------------------------------------------------------
// Heat-kernel regularity.

/// max over x and edges (y, y') of |p_t(x, y) - p_t(x, y')| / d(y, y').
inline double kernel_lipschitz(const DiscreteMMSpace& space, const SpectralData& spec, double t) {
  const HeatKernel kernel = heat_kernel(space, spec, t);
  double best = 0.0;
  for (const Edge& e : space.edges()) {
    const auto i = static_cast<Eigen::Index>(e.i);
    const auto j = static_cast<Eigen::Index>(e.j);
    const double d = space.dist()(i, j);
    best = std::max(best, (kernel.p.col(i) - kernel.p.col(j)).cwiseAbs().maxCoeff() / d);
  }
  return best;
}

/// Largest edge quotient |f(x) - f(y)| / d(x, y); the all-pairs quotient is
/// returned through `global` when requested.
inline double edge_lipschitz(const DiscreteMMSpace& space, const Field& f, double* global = nullptr) {
  double best = 0.0;
  for (const Edge& e : space.edges()) {
    const auto i = static_cast<Eigen::Index>(e.i);
    const auto j = static_cast<Eigen::Index>(e.j);
    best = std::max(best, std::fabs(f[i] - f[j]) / space.dist()(i, j));
  }
  if (global != nullptr) {
    *global = 0.0;
    for (Eigen::Index x = 0; x < f.size(); ++x)
      for (Eigen::Index y = x + 1; y < f.size(); ++y)
        *global = std::max(*global, std::fabs(f[x] - f[y]) / space.dist()(x, y));
  }
  return best;
}

/// Lipschitz quotient of phi_k against exp((lambda - K) t) sqrt(lambda ||T_t||_{1->inf}) ||phi_k||_2
/// with ||T_t||_{1->inf} = max p_t.
inline CheckReport eigen_lipschitz_check(const DiscreteMMSpace& space, const SpectralData& spec, std::size_t k, double t,
                                         double curvature) {
  detail::Stopwatch clock;
  CheckReport r = detail::start_report("kernel-lip", space);
  if (k == 0 || k >= spec.size()) throw Error(ErrorCode::ConstantEigenfunction, "k must index a nonconstant eigenfunction");
  if (!(t > 0.0)) throw Error(ErrorCode::BadParams, "t must be positive");
  const Field phi = spec.phi.col(static_cast<Eigen::Index>(k));
  const double lambda = spec.eigenvalues[static_cast<Eigen::Index>(k)];
  if (!(lambda > 0.0)) throw Error(ErrorCode::ConstantEigenfunction, "eigenvalue is zero");
  double global = 0.0;
  const double quotient = edge_lipschitz(space, phi, &global);
  const double norm_l1_inf = heat_kernel(space, spec, t).p.maxCoeff();
  const double l2 = std::sqrt(phi.cwiseAbs2().dot(space.measure()));
  const double bound = std::exp((lambda - curvature) * t) * std::sqrt(lambda * norm_l1_inf) * l2;
  r.params = {{"k", k}, {"t", t}, {"K", curvature}, {"lambda", lambda}};
  r.observed = {{"edge_quotient", quotient},
                {"global_quotient", global},
                {"gamma_sup", std::sqrt(gamma(space, phi).maxCoeff())},
                {"T_t_norm", norm_l1_inf},
                {"bound", bound},
                {"margin", bound - quotient}};
  r.expected = {{"margin_min", 0.0}};
  r.pass = bound - quotient >= 0.0;
  r.runtime_ms = clock.ms();
  return r;
}

/// C_meas = max over x, y and t of p_t(x, y) m(B_sqrt(t)(x)).
inline double kernel_upper_constant(const DiscreteMMSpace& space, const SpectralData& spec, const std::vector<double>& t_set) {
  double best = 0.0;
  const auto n = static_cast<Eigen::Index>(space.size());
  for (double t : t_set) {
    if (!(t > 0.0)) throw Error(ErrorCode::BadParams, "times must be positive");
    const HeatKernel kernel = heat_kernel(space, spec, t);
    const double radius = std::sqrt(t);
    for (Eigen::Index x = 0; x < n; ++x) {
      double ball = 0.0;
      for (Eigen::Index y = 0; y < n; ++y)
        if (space.dist()(x, y) <= radius * (1.0 + 1e-12)) ball += space.measure()[y];
      best = std::max(best, kernel.p.row(x).maxCoeff() * ball);
    }
  }
  return best;
}

/// C_meas across a refinement family; passes when max / min <= 2.
inline CheckReport kernel_upper_check(const std::vector<DiscreteMMSpace>& family, const std::vector<double>& t_set) {
  detail::Stopwatch clock;
  if (family.empty()) throw Error(ErrorCode::BadParams, "empty family");
  CheckReport r = detail::start_report("kernel-bound", family.front());
  std::vector<double> values;
  std::vector<std::size_t> sizes;
  for (const DiscreteMMSpace& space : family) {
    values.push_back(kernel_upper_constant(space, spectral_decompose(space), t_set));
    sizes.push_back(space.size());
  }
  const double ratio = *std::max_element(values.begin(), values.end()) / *std::min_element(values.begin(), values.end());
  r.params = {{"times", t_set}, {"sizes", sizes}};
  r.observed = {{"C_meas", values}, {"ratio", ratio}};
  r.expected = {{"ratio_max", 2.0}};
  r.tolerance = 2.0;
  r.pass = ratio <= 2.0;
  r.runtime_ms = clock.ms();
  return r;
}

/// ||sqrt Gamma((alpha - Delta)^{-q/2} f)||_p / ||f||_p, maximized over f_set;
/// norms are taken against m.
inline double riesz_ratio(const DiscreteMMSpace& space, const SpectralData& spec, double p, double q, double alpha,
                          const std::vector<Field>& f_set) {
  auto lp = [&](const Field& g) {
    return std::pow(g.cwiseAbs().array().pow(p).matrix().dot(space.measure()), 1.0 / p);
  };
  double best = 0.0;
  for (const Field& f : f_set) {
    const double denom = lp(f);
    if (!(denom > 0.0)) continue;
    const Field grad = gamma(space, resolvent_power(space, spec, alpha, q, f)).cwiseMax(0.0).cwiseSqrt();
    best = std::max(best, lp(grad) / denom);
  }
  return best;
}

/// Riesz-type estimate on the low eigenfunctions of each member of a
/// refinement family; passes when max / min <= 2.
inline CheckReport riesz_probe(const std::vector<DiscreteMMSpace>& family, double p, double q, double alpha,
                               double k_gamma2, std::size_t eigen_count = 8) {
  detail::Stopwatch clock;
  if (family.empty()) throw Error(ErrorCode::BadParams, "empty family");
  if (!(p >= 2.0) || !(q > 1.0)) throw Error(ErrorCode::BadParams, "need p >= 2 and q > 1");
  if (!(alpha > std::max(-k_gamma2, 0.0) + 1e-9))
    throw Error(ErrorCode::AlphaTooSmall, "alpha must exceed max(-K, 0)");
  CheckReport r = detail::start_report("riesz", family.front());
  std::vector<double> values;
  for (const DiscreteMMSpace& space : family) {
    const SpectralData spec = spectral_decompose(space);
    values.push_back(riesz_ratio(space, spec, p, q, alpha, smooth_test_fields(spec, eigen_count, 0, 0)));
  }
  const double ratio = *std::max_element(values.begin(), values.end()) / *std::min_element(values.begin(), values.end());
  r.params = {{"p", p}, {"q", q}, {"alpha", alpha}, {"K", k_gamma2}};
  r.observed = {{"estimates", values}, {"ratio", ratio}};
  r.expected = {{"ratio_max", 2.0}};
  r.tolerance = 2.0;
  r.pass = ratio <= 2.0;
  r.runtime_ms = clock.ms();
  return r;
}

/// Linearity of T_t on measures and symmetry sum f T_t g m = sum g T_t f m
/// on random inputs.
inline CheckReport linearity_symmetry_check(const DiscreteMMSpace& space, const SpectralData& spec, double t,
                                            std::size_t trials, std::uint64_t seed, double tol = 1e-10) {
  detail::Stopwatch clock;
  CheckReport r = detail::start_report("linsym", space);
  if (trials < 1) throw Error(ErrorCode::BadParams, "trials must be at least 1");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> point(0, space.size() - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  double lin = 0.0;
  double sym = 0.0;
  const auto n = static_cast<Eigen::Index>(space.size());
  for (std::size_t k = 0; k < trials; ++k) {
    const ProbMeasure a = ProbMeasure::dirac(space, point(rng));
    const ProbMeasure b = ProbMeasure::dirac(space, point(rng));
    const double lambda = unit(rng);
    const Field mix = (1.0 - lambda) * a.density() + lambda * b.density();
    const Field lhs = heat_apply(space, spec, t, mix);
    const Field rhs = (1.0 - lambda) * heat_apply(space, spec, t, a.density()) + lambda * heat_apply(space, spec, t, b.density());
    lin = std::max(lin, (lhs - rhs).cwiseAbs().maxCoeff());
    Field f(n);
    Field g(n);
    for (Eigen::Index x = 0; x < n; ++x) {
      f[x] = normal(rng);
      g[x] = normal(rng);
    }
    const double s1 = f.cwiseProduct(space.measure()).dot(heat_apply(space, spec, t, g));
    const double s2 = g.cwiseProduct(space.measure()).dot(heat_apply(space, spec, t, f));
    sym = std::max(sym, std::fabs(s1 - s2));
  }
  r.params = {{"t", t}, {"trials", trials}};
  r.observed = {{"linearity_defect", lin}, {"symmetry_defect", sym}};
  r.expected = {{"max_defect", tol}};
  r.tolerance = tol;
  r.seed = seed;
  r.pass = lin <= tol && sym <= tol;
  r.runtime_ms = clock.ms();
  return r;
}

}  // namespace mmflow
