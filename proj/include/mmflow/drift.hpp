#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "mmflow/dirichlet.hpp"
#include "mmflow/entropy.hpp"
#include "mmflow/error.hpp"
#include "mmflow/jko.hpp"
#include "mmflow/measure.hpp"
#include "mmflow/space.hpp"
#include "mmflow/verify.hpp"
#include "mmflow/wasserstein.hpp"

namespace mmflow {

struct Potential {
  Field values;
  double lipschitz = 0.0;
};

inline Potential make_potential(const DiscreteMMSpace& space, const Field& v) {
  require_same_size(space, v, "potential");
  if (!v.allFinite()) throw Error(ErrorCode::BadParams, "potential must be finite");
  return {v, edge_lipschitz(space, v)};
}

/// m^V = e^{-V} m, w^V_xy = w_xy e^{-(V_x + V_y) / 2}; lengths are kept.
inline DiscreteMMSpace weighted_space(const DiscreteMMSpace& space, const Field& v) {
  require_same_size(space, v, "potential");
  std::vector<Edge> edges = space.edges();
  for (Edge& e : edges)
    e.conductance *= std::exp(-0.5 * (v[static_cast<Eigen::Index>(e.i)] + v[static_cast<Eigen::Index>(e.j)]));
  const Field m = space.measure().cwiseProduct((-v).array().exp().matrix());
  nlohmann::json meta = space.metadata();
  meta["weighted"] = true;
  return build_space(space.size(), std::move(edges), m, space.name() + "^V", std::move(meta));
}

/// Gibbs masses proportional to e^{-V} m.
inline Field gibbs_masses(const DiscreteMMSpace& space, const Field& v) {
  Field g = space.measure().cwiseProduct((-v).array().exp().matrix());
  return g / g.sum();
}

/// Delta^V f - (Delta f - Gamma(V, f)) in the sup norm.
inline double fp_defect(const DiscreteMMSpace& space, const Field& v, const Field& f) {
  const DiscreteMMSpace weighted = weighted_space(space, v);
  const Field drift = laplacian(space, f) - gamma(space, v, f);
  return (laplacian(weighted, f) - drift).cwiseAbs().maxCoeff();
}

struct FpLevel {
  DiscreteMMSpace space;
  Field potential;
  std::vector<Field> fields;
};

/// Fokker-Planck consistency across a refinement family: the sup defect must
/// decay at least linearly in the mesh size (fitted order >= 0.9 between
/// consecutive levels), or vanish to round-off.
inline CheckReport fp_consistency_check(const std::vector<FpLevel>& family) {
  detail::Stopwatch clock;
  if (family.empty()) throw Error(ErrorCode::FamilyMismatch, "empty refinement family");
  CheckReport r = detail::start_report("fp", family.front().space);
  const nlohmann::json& meta0 = family.front().space.metadata();
  const std::string kind = meta0.contains("kind") ? meta0["kind"].get<std::string>() : std::string{};
  std::vector<double> defects;
  std::vector<double> mesh;
  for (std::size_t i = 0; i < family.size(); ++i) {
    const FpLevel& level = family[i];
    const nlohmann::json& meta = level.space.metadata();
    const std::string k = meta.contains("kind") ? meta["kind"].get<std::string>() : std::string{};
    if (k != kind) throw Error(ErrorCode::FamilyMismatch, "family mixes geometries");
    if (i > 0 && !(level.space.mesh_size() < mesh.back()))
      throw Error(ErrorCode::FamilyMismatch, "family must refine strictly");
    if (level.fields.empty()) throw Error(ErrorCode::BadParams, "empty test set");
    double worst = 0.0;
    for (const Field& f : level.fields) worst = std::max(worst, fp_defect(level.space, level.potential, f));
    defects.push_back(worst);
    mesh.push_back(level.space.mesh_size());
  }
  std::vector<double> orders;
  bool pass = true;
  for (std::size_t i = 1; i < defects.size(); ++i) {
    if (defects[i] <= 1e-12) {
      orders.push_back(std::numeric_limits<double>::infinity());
      continue;
    }
    const double order = std::log(defects[i - 1] / defects[i]) / std::log(mesh[i - 1] / mesh[i]);
    orders.push_back(order);
    pass = pass && order >= 0.9;
  }
  nlohmann::json order_json = nlohmann::json::array();
  for (double o : orders) order_json.push_back(std::isfinite(o) ? nlohmann::json(o) : nlohmann::json(nullptr));
  r.params = {{"mesh", mesh}};
  r.observed = {{"defects", defects}, {"orders", order_json}};
  r.expected = {{"order_min", 0.9}};
  r.tolerance = 0.9;
  r.pass = pass;
  r.runtime_ms = clock.ms();
  return r;
}

struct DriftIdentifyOptions {
  double tolerance = -1.0;        // finest-tau bound; negative means 0.05 diam
  double stationary_tol = 1e-3;   // W_2 to Gibbs at the horizon, when required
  bool require_stationary = false;
  JkoConfig jko;
};

/// Heat flow of the weighted space against the JKO flow of Ent^V on the
/// original space, compared at the JKO time stamps.
inline CheckReport drift_identify(const DiscreteMMSpace& space, const Field& v, const Field& rho0, std::vector<double> taus,
                                  double horizon, DriftIdentifyOptions options = {}) {
  detail::Stopwatch clock;
  CheckReport r = detail::start_report("drift-identify", space);
  if (taus.empty()) throw Error(ErrorCode::BadParams, "drift_identify needs at least one tau");
  std::sort(taus.begin(), taus.end(), std::greater<>());
  const double tol = options.tolerance >= 0.0 ? options.tolerance : 0.05 * space.diam();
  const DiscreteMMSpace weighted = weighted_space(space, v);
  const SpectralData spec = spectral_decompose(weighted);
  const ProbMeasure mu0 = ProbMeasure::from_density(space, rho0);
  // Density of mu0 against m^V.
  const Field rho_v = mu0.masses().cwiseQuotient(weighted.measure());
  const ProbMeasure gibbs = ProbMeasure::from_masses(space, gibbs_masses(space, v));
  std::vector<double> disc;
  std::vector<double> jko_gibbs;
  double heat_gibbs = 0.0;
  for (double tau : taus) {
    JkoConfig cfg = options.jko;
    cfg.tau = tau;
    const FlowTrajectory jko = jko_flow(space, mu0, horizon, cfg, &v, false);
    std::vector<Field> heat;
    for (double t : jko.times) heat.push_back(heat_density(weighted, spec, t, rho_v).cwiseProduct(weighted.measure()));
    const std::vector<Field> jko_masses = masses_of(space, jko.densities);
    disc.push_back(max_w2_discrepancy(space, heat, jko_masses));
    jko_gibbs.push_back(w2(space, ProbMeasure::from_masses(space, jko_masses.back()), gibbs));
    heat_gibbs = w2(space, ProbMeasure::from_masses(space, heat.back()), gibbs);
  }
  bool monotone = true;
  for (std::size_t i = 1; i < disc.size(); ++i) monotone = monotone && disc[i] <= disc[i - 1] + 1e-9;
  const double stationary = std::max(jko_gibbs.back(), heat_gibbs);
  r.params = {{"taus", taus}, {"T", horizon}};
  r.observed = {{"discrepancy", disc},
                {"monotone", monotone},
                {"finest", disc.back()},
                {"jko_to_gibbs", jko_gibbs},
                {"heat_to_gibbs", heat_gibbs}};
  r.expected = {{"finest_max", tol}, {"monotone", true}};
  if (options.require_stationary) r.expected["stationary_max"] = options.stationary_tol;
  r.tolerance = tol;
  r.pass = monotone && disc.back() <= tol && (!options.require_stationary || stationary <= options.stationary_tol);
  r.runtime_ms = clock.ms();
  return r;
}

/// Smallest divided second difference of V over consecutive triples x - y - z
/// of neighbours with y on a geodesic from x to z.
inline double potential_convexity(const DiscreteMMSpace& space, const Field& v) {
  double k = std::numeric_limits<double>::infinity();
  const auto& d = space.dist();
  for (std::size_t y = 0; y < space.size(); ++y) {
    const auto nb = space.neighbors(y);
    for (std::size_t a = 0; a < nb.size(); ++a) {
      for (std::size_t b = a + 1; b < nb.size(); ++b) {
        const std::size_t x = nb[a].point;
        const std::size_t z = nb[b].point;
        const double h1 = d(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y));
        const double h2 = d(static_cast<Eigen::Index>(y), static_cast<Eigen::Index>(z));
        if (std::fabs(d(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(z)) - (h1 + h2)) > 1e-12 * (h1 + h2))
          continue;
        const double vx = v[static_cast<Eigen::Index>(x)];
        const double vy = v[static_cast<Eigen::Index>(y)];
        const double vz = v[static_cast<Eigen::Index>(z)];
        k = std::min(k, 2.0 * ((vz - vy) / h2 - (vy - vx) / h1) / (h1 + h2));
      }
    }
  }
  return std::isfinite(k) ? k : 0.0;
}

/// Runs the CD probe for Ent^V at K_base + K' with K' the discrete convexity of
/// V, next to the unweighted probe at K_base.
inline CheckReport convexity_shift_probe(const DiscreteMMSpace& space, const Field& v, double k_base,
                                         const std::vector<std::pair<ProbMeasure, ProbMeasure>>& pairs,
                                         const std::vector<double>& t_grid, double tol) {
  detail::Stopwatch clock;
  CheckReport r = detail::start_report("cd-shift", space);
  const double k_shift = potential_convexity(space, v);
  const ConvexityReport base = cd_convexity_probe(space, k_base, pairs, t_grid, tol);
  const ConvexityReport shifted = cd_convexity_probe(space, k_base + k_shift, pairs, t_grid, tol, &v);
  auto num = [](double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr); };
  r.params = {{"K_base", k_base}, {"pairs", pairs.size()}, {"times", t_grid}};
  r.observed = {{"K_shift", k_shift},
                {"worst_deficit", num(shifted.worst_deficit)},
                {"largest_passing_K", num(shifted.largest_passing_k)},
                {"largest_passing_K_unweighted", num(base.largest_passing_k)}};
  r.expected = {{"worst_deficit_max", tol}};
  r.tolerance = tol;
  r.pass = shifted.pass;
  r.runtime_ms = clock.ms();
  return r;
}

}  // namespace mmflow
