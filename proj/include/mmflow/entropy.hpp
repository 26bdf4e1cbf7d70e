#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <utility>
#include <vector>

#include "mmflow/dirichlet.hpp"
#include "mmflow/measure.hpp"
#include "mmflow/space.hpp"
#include "mmflow/wasserstein.hpp"

namespace mmflow {

/// Ent(rho m) = sum_x rho_x log rho_x m_x with 0 log 0 = 0.
inline double ent(const DiscreteMMSpace& space, const Field& rho) {
  require_same_size(space, rho, "density");
  double acc = 0.0;
  for (Eigen::Index x = 0; x < rho.size(); ++x)
    if (rho[x] > 0.0) acc += rho[x] * std::log(rho[x]) * space.measure()[x];
  return acc;
}

inline double ent(const DiscreteMMSpace& space, const ProbMeasure& mu) { return ent(space, mu.density()); }

/// Ent(mu) + sum V dmu.
inline double ent_v(const DiscreteMMSpace& space, const Field& rho, const Field& v) {
  require_same_size(space, v, "potential");
  return ent(space, rho) + v.dot(rho.cwiseProduct(space.measure()));
}

inline double ent_v(const DiscreteMMSpace& space, const ProbMeasure& mu, const Field& v) {
  return ent_v(space, mu.density(), v);
}

/// Exact time derivative of Ent along d/dt rho = Delta rho, without the chain
/// rule: sum_x m_x (log rho_x + 1) Delta rho_x.
inline double ent_rate(const DiscreteMMSpace& space, const Field& rho) {
  const Field lap = laplacian(space, rho);
  double acc = 0.0;
  for (Eigen::Index x = 0; x < rho.size(); ++x) acc += space.measure()[x] * (std::log(rho[x]) + 1.0) * lap[x];
  return acc;
}

/// Fisher information sum_x m_x Gamma(rho, rho)(x) / rho_x; +inf as soon as
/// rho vanishes somewhere.
inline double fisher(const DiscreteMMSpace& space, const Field& rho) {
  require_same_size(space, rho, "density");
  if (rho.minCoeff() <= 0.0) return std::numeric_limits<double>::infinity();
  const Field g = gamma(space, rho, rho);
  return (space.measure().cwiseProduct(g).cwiseQuotient(rho)).sum();
}

inline double slope_upper(const DiscreteMMSpace& space, const Field& rho) { return std::sqrt(fisher(space, rho)); }

struct SlopeProbe {
  double radius = 0.0;
  double value = 0.0;
  std::size_t evaluations = 0;
};

/// Finite-radius estimate of the descending slope of Ent at rho m: the largest
/// (Ent(mu) - Ent(nu))^+ / W_2(mu, nu) over sampled nu with W_2 <= radius.
///
/// Candidates are mixtures (1 - s) mu + s zeta toward random Diracs, random
/// densities and the explicit heat step rho + s Delta rho; s is the largest
/// mixing weight within the radius (found by bisection, W_2 grows with s) and
/// its dyadic fractions.
inline SlopeProbe slope_probe(const DiscreteMMSpace& space, const Field& rho, std::size_t n_samples, double radius,
                              std::uint64_t seed = 0) {
  if (!(radius > 0.0)) throw Error(ErrorCode::BadParams, "probe radius must be positive");
  const ProbMeasure mu = ProbMeasure::from_density(space, rho);
  const double e0 = ent(space, mu);
  SlopeProbe out;
  out.radius = radius;
  const auto n = static_cast<Eigen::Index>(space.size());
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Eigen::Index> point(0, n - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  auto consider = [&](const ProbMeasure& nu) {
    const double w = w2(space, mu, nu);
    ++out.evaluations;
    if (w <= 0.0 || w > radius * (1.0 + 1e-12)) return;
    out.value = std::max(out.value, (e0 - ent(space, nu)) / w);
  };
  // Walks the curve s -> at(s) out to the radius by bisection (W_2 grows with
  // s along these curves), then probes the dyadic fractions of that s.
  auto explore = [&](auto&& at, double s_max) {
    double lo = 0.0;
    double hi = s_max;
    if (w2(space, mu, at(hi)) > radius) {
      for (int it = 0; it < 40; ++it) {
        const double mid = 0.5 * (lo + hi);
        (w2(space, mu, at(mid)) <= radius ? lo : hi) = mid;
      }
    } else {
      lo = hi;
    }
    for (int level = 0; level < 6 && lo > 0.0; ++level, lo *= 0.5) consider(at(lo));
  };

  const Field flux = laplacian(space, rho).cwiseProduct(space.measure());
  if (flux.cwiseAbs().maxCoeff() > 0.0) {
    // mu + s Delta rho m stays nonnegative while s <= min mu / (Delta rho m)^-.
    double s_max = 1e6;
    for (Eigen::Index x = 0; x < n; ++x)
      if (flux[x] < 0.0) s_max = std::min(s_max, mu.masses()[x] / -flux[x]);
    explore([&](double s) { return ProbMeasure::from_masses(space, (mu.masses() + s * flux).cwiseMax(0.0)); }, s_max);
  }
  for (std::size_t k = 0; k < n_samples; ++k) {
    Field zeta = Field::Zero(n);
    if (k % 2 == 0) {
      zeta[point(rng)] = 1.0;
    } else {
      for (Eigen::Index x = 0; x < n; ++x) zeta[x] = unit(rng) * space.measure()[x];
      zeta /= zeta.sum();
    }
    explore([&](double s) { return ProbMeasure::from_masses(space, (1.0 - s) * mu.masses() + s * zeta); }, 1.0);
  }
  return out;
}

struct ConvexityReport {
  double k_target = 0.0;
  double worst_deficit = -std::numeric_limits<double>::infinity();  // at k_target
  double largest_passing_k = std::numeric_limits<double>::infinity();
  double tolerance = 0.0;
  std::size_t samples = 0;
  bool pass = true;
};

/// Evaluates Ent^V(mu_t) - (1 - t) Ent^V(mu) - t Ent^V(nu) + K/2 (1 - t) t W_2^2
/// along path-snapping interpolations. The largest passing K is the largest K
/// for which every sampled deficit stays below tol.
inline ConvexityReport cd_convexity_probe(const DiscreteMMSpace& space, double k_target,
                                          const std::vector<std::pair<ProbMeasure, ProbMeasure>>& pairs,
                                          const std::vector<double>& t_grid, double tol, const Field* potential = nullptr) {
  ConvexityReport out;
  out.k_target = k_target;
  out.tolerance = tol;
  const Field zero = Field::Zero(static_cast<Eigen::Index>(space.size()));
  const Field& v = potential != nullptr ? *potential : zero;
  for (const auto& [mu, nu] : pairs) {
    const WpResult coupling = wp(space, mu, nu, 2.0);
    const double wsq = coupling.cost;
    const double e_mu = ent_v(space, mu, v);
    const double e_nu = ent_v(space, nu, v);
    for (double t : t_grid) {
      if (!(t > 0.0 && t < 1.0)) continue;
      const ProbMeasure mid = displacement_interpolate(space, mu, nu, t, &coupling);
      const double base = ent_v(space, mid, v) - (1.0 - t) * e_mu - t * e_nu;
      const double weight = 0.5 * (1.0 - t) * t * wsq;
      const double deficit = base + k_target * weight;
      ++out.samples;
      out.worst_deficit = std::max(out.worst_deficit, deficit);
      if (weight > 0.0) out.largest_passing_k = std::min(out.largest_passing_k, (tol - base) / weight);
      else if (base > tol) out.largest_passing_k = -std::numeric_limits<double>::infinity();
    }
  }
  out.pass = out.samples == 0 || out.worst_deficit <= tol;
  return out;
}

}  // namespace mmflow
