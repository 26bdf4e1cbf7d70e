#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "mmflow/error.hpp"
#include "mmflow/measure.hpp"
#include "mmflow/network_simplex.hpp"
#include "mmflow/space.hpp"

namespace mmflow {

struct WpResult {
  double value = 0.0;     // W_p
  double cost = 0.0;      // W_p^p
  Eigen::MatrixXd plan;   // n x n optimal coupling
  Field dual_u;           // Kantorovich potentials for the cost d^p,
  Field dual_v;           // u(x) + v(y) <= d^p(x, y) on all pairs
};

namespace detail {

inline void require_matching(const DiscreteMMSpace& space, const ProbMeasure& mu, const ProbMeasure& nu) {
  if (mu.size() != space.size() || nu.size() != space.size())
    throw Error(ErrorCode::SpaceMismatch, "measures do not live on this space");
  if (std::fabs(mu.masses().sum() - nu.masses().sum()) > 1e-9)
    throw Error(ErrorCode::MarginalMismatch, "measures carry different total mass");
}

inline Eigen::MatrixXd cost_matrix(const DiscreteMMSpace& space, double p) {
  if (p == 1.0) return space.dist();
  if (p == 2.0) return space.dist().cwiseAbs2();
  return space.dist().array().pow(p).matrix();
}

}  // namespace detail

/// Exact W_p by network simplex over the supports of mu and nu.
inline WpResult wp(const DiscreteMMSpace& space, const ProbMeasure& mu, const ProbMeasure& nu, double p) {
  detail::require_matching(space, mu, nu);
  if (!(p >= 1.0 && p <= 2.0)) throw Error(ErrorCode::BadParams, "p must lie in [1, 2]");
  const auto n = static_cast<Eigen::Index>(space.size());
  const Eigen::MatrixXd cost = detail::cost_matrix(space, p);
  std::vector<Eigen::Index> rows;
  std::vector<Eigen::Index> cols;
  for (Eigen::Index x = 0; x < n; ++x) {
    if (mu.masses()[x] > 0.0) rows.push_back(x);
    if (nu.masses()[x] > 0.0) cols.push_back(x);
  }
  Eigen::MatrixXd sub(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  Eigen::VectorXd a(static_cast<Eigen::Index>(rows.size()));
  Eigen::VectorXd b(static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    a[static_cast<Eigen::Index>(i)] = mu.masses()[rows[i]];
    for (std::size_t j = 0; j < cols.size(); ++j)
      sub(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = cost(rows[i], cols[j]);
  }
  for (std::size_t j = 0; j < cols.size(); ++j) b[static_cast<Eigen::Index>(j)] = nu.masses()[cols[j]];
  // Absorb the rounding-level imbalance into the largest demand.
  Eigen::Index big = 0;
  b.maxCoeff(&big);
  b[big] += a.sum() - b.sum();

  const TransportSolution sol = NetworkSimplex(sub, a, b).solve();

  WpResult out;
  out.cost = std::max(0.0, sol.cost);
  out.value = std::pow(out.cost, 1.0 / p);
  out.plan = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j)
      out.plan(rows[i], cols[j]) = sol.plan(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));

  // Extend the potentials off the supports by c-transforms.
  constexpr double inf = std::numeric_limits<double>::infinity();
  out.dual_u = Field::Constant(n, inf);
  out.dual_v = Field::Constant(n, inf);
  for (std::size_t i = 0; i < rows.size(); ++i) out.dual_u[rows[i]] = sol.u[static_cast<Eigen::Index>(i)];
  for (std::size_t j = 0; j < cols.size(); ++j) out.dual_v[cols[j]] = sol.v[static_cast<Eigen::Index>(j)];
  for (Eigen::Index x = 0; x < n; ++x) {
    if (mu.masses()[x] > 0.0) continue;
    for (Eigen::Index y : cols) out.dual_u[x] = std::min(out.dual_u[x], cost(x, y) - out.dual_v[y]);
  }
  for (Eigen::Index y = 0; y < n; ++y) {
    if (nu.masses()[y] > 0.0) continue;
    for (Eigen::Index x = 0; x < n; ++x) out.dual_v[y] = std::min(out.dual_v[y], cost(x, y) - out.dual_u[x]);
  }
  return out;
}

inline double w2(const DiscreteMMSpace& space, const ProbMeasure& mu, const ProbMeasure& nu) {
  return wp(space, mu, nu, 2.0).value;
}

struct SinkhornResult {
  double value = 0.0;   // (sum pi d^p)^{1/p}
  double cost = 0.0;    // sum pi d^p of the entropic plan
  bool converged = false;
  bool exact_fallback = false;
  std::size_t iterations = 0;
};

namespace detail {

inline double log_sum_exp(const Eigen::Ref<const Eigen::VectorXd>& z) {
  const double top = z.maxCoeff();
  if (!std::isfinite(top)) return top;
  return top + std::log((z.array() - top).exp().sum());
}

}  // namespace detail

/// Entropic transport in the log domain with epsilon scaling down to eps.
/// Falls back to the exact solver when a marginal has a zero entry.
inline SinkhornResult sinkhorn_wp(const DiscreteMMSpace& space, const ProbMeasure& mu, const ProbMeasure& nu, double p,
                                  double eps, std::size_t max_iter, double tol = 1e-12) {
  detail::require_matching(space, mu, nu);
  if (!(eps > 0.0)) throw Error(ErrorCode::BadParams, "entropic regularization must be positive");
  SinkhornResult out;
  if (!mu.strictly_positive() || !nu.strictly_positive()) {
    const WpResult exact = wp(space, mu, nu, p);
    out.value = exact.value;
    out.cost = exact.cost;
    out.converged = true;
    out.exact_fallback = true;
    return out;
  }
  const auto n = static_cast<Eigen::Index>(space.size());
  const Eigen::MatrixXd cost = detail::cost_matrix(space, p);
  const Eigen::VectorXd loga = mu.masses().array().log().matrix();
  const Eigen::VectorXd logb = nu.masses().array().log().matrix();
  Eigen::VectorXd f = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
  double stage = std::max(eps, cost.maxCoeff());
  Eigen::MatrixXd logp(n, n);
  auto plan_log = [&](double e) {
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index i = 0; i < n; ++i) logp(i, j) = (f[i] + g[j] - cost(i, j)) / e;
  };
  while (true) {
    bool done = false;
    for (std::size_t it = 0; it < max_iter; ++it) {
      ++out.iterations;
      for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::VectorXd z = (g - cost.row(i).transpose()) / stage;
        f[i] = stage * (loga[i] - detail::log_sum_exp(z));
      }
      for (Eigen::Index j = 0; j < n; ++j) {
        Eigen::VectorXd z = (f - cost.col(j)) / stage;
        g[j] = stage * (logb[j] - detail::log_sum_exp(z));
      }
      // Columns are exact after the g update; measure the row defect.
      plan_log(stage);
      double err = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) err += std::fabs(logp.row(i).array().exp().sum() - mu.masses()[i]);
      if (err <= (stage <= eps ? tol : std::max(tol, 1e-6))) {
        done = true;
        break;
      }
    }
    if (stage <= eps) {
      out.converged = done;
      break;
    }
    stage = std::max(eps, stage / 4.0);
  }
  if (!out.converged)
    throw Error(ErrorCode::NoConvergence, "Sinkhorn did not reach the marginal tolerance in " + std::to_string(max_iter) +
                                              " iterations");
  out.cost = (logp.array().exp() * cost.array()).sum();
  out.value = std::pow(std::max(0.0, out.cost), 1.0 / p);
  return out;
}

/// Hopf-Lax inf-convolution Q_t f(x) = min_y f(y) + d(x, y)^2 / (2 t).
inline Field hopf_lax(const DiscreteMMSpace& space, const Field& f, double t) {
  require_same_size(space, f, "f");
  if (!(t >= 0.0)) throw Error(ErrorCode::NegativeTime, "time must be nonnegative");
  if (t == 0.0) return f;
  const auto n = static_cast<Eigen::Index>(space.size());
  Field out(n);
  for (Eigen::Index x = 0; x < n; ++x) {
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index y = 0; y < n; ++y) {
      const double d = space.dist()(x, y);
      best = std::min(best, f[y] + d * d / (2.0 * t));
    }
    out[x] = best;
  }
  return out;
}

enum class SlopeKind { Global, Neighbor };

/// Descending slope max_y (g(x) - g(y))^+ / d(x, y) over all y != x, or over
/// graph neighbours only.
inline Field descending_slope(const DiscreteMMSpace& space, const Field& g, SlopeKind kind = SlopeKind::Global) {
  require_same_size(space, g, "g");
  const auto n = static_cast<Eigen::Index>(space.size());
  Field out = Field::Zero(n);
  for (Eigen::Index x = 0; x < n; ++x) {
    double best = 0.0;
    if (kind == SlopeKind::Global) {
      for (Eigen::Index y = 0; y < n; ++y)
        if (y != x) best = std::max(best, (g[x] - g[y]) / space.dist()(x, y));
    } else {
      for (const Neighbor& nb : space.neighbors(static_cast<std::size_t>(x)))
        best = std::max(best, (g[x] - g[static_cast<Eigen::Index>(nb.point)]) / space.dist()(x, static_cast<Eigen::Index>(nb.point)));
    }
    out[x] = best;
  }
  return out;
}

/// Residual d/dt Q_t f + |D^- Q_t f|^2 / 2 at the interior times of t_grid,
/// with a central difference in time. Entry k belongs to t_grid[k + 1].
inline std::vector<Field> hj_residual(const DiscreteMMSpace& space, const Field& f, const std::vector<double>& t_grid,
                                      SlopeKind kind = SlopeKind::Global) {
  if (t_grid.size() < 3) throw Error(ErrorCode::GridTooCoarse, "need at least three times");
  for (std::size_t k = 0; k < t_grid.size(); ++k) {
    if (!(t_grid[k] > 0.0)) throw Error(ErrorCode::BadParams, "times must be positive");
    if (k > 0 && !(t_grid[k] > t_grid[k - 1])) throw Error(ErrorCode::BadParams, "times must increase strictly");
  }
  std::vector<Field> q;
  q.reserve(t_grid.size());
  for (double t : t_grid) q.push_back(hopf_lax(space, f, t));
  std::vector<Field> out;
  for (std::size_t k = 1; k + 1 < t_grid.size(); ++k) {
    const Field slope = descending_slope(space, q[k], kind);
    const Field dq = (q[k + 1] - q[k - 1]) / (t_grid[k + 1] - t_grid[k - 1]);
    out.push_back(dq + 0.5 * slope.cwiseAbs2());
  }
  return out;
}

/// Potential phi with Q_1 phi = psi optimal for the cost d^2 / 2, taken from
/// the exact solver's duals.
inline Field kantorovich_potential(const DiscreteMMSpace& space, const ProbMeasure& mu, const ProbMeasure& nu) {
  const WpResult r = wp(space, mu, nu, 2.0);
  return -0.5 * r.dual_u;
}

/// 1/2 W_2^2(mu, nu) - [ sum Q_1 phi dnu - sum phi dmu ]; nonnegative by weak
/// duality, zero at an optimal potential.
inline double dual_gap(const DiscreteMMSpace& space, const Field& phi, const ProbMeasure& mu, const ProbMeasure& nu) {
  const double half_w2sq = 0.5 * wp(space, mu, nu, 2.0).cost;
  const Field q = hopf_lax(space, phi, 1.0);
  return half_w2sq - (q.dot(nu.masses()) - phi.dot(mu.masses()));
}

/// Path-snapping displacement interpolation: every atom of the optimal W_2
/// coupling is placed on the vertex of the deterministic shortest x -> y path
/// whose arclength is nearest to t d(x, y), ties going to the earlier vertex.
inline ProbMeasure displacement_interpolate(const DiscreteMMSpace& space, const ProbMeasure& mu, const ProbMeasure& nu,
                                            double t, const WpResult* coupling = nullptr) {
  if (!(t >= 0.0 && t <= 1.0)) throw Error(ErrorCode::BadParams, "interpolation parameter must lie in [0, 1]");
  if (t == 0.0) return mu;
  if (t == 1.0) return nu;
  WpResult local;
  if (coupling == nullptr) {
    local = wp(space, mu, nu, 2.0);
    coupling = &local;
  }
  const auto n = static_cast<Eigen::Index>(space.size());
  Field masses = Field::Zero(n);
  for (Eigen::Index x = 0; x < n; ++x) {
    for (Eigen::Index y = 0; y < n; ++y) {
      const double m = coupling->plan(x, y);
      if (m <= 0.0) continue;
      if (x == y) {
        masses[x] += m;
        continue;
      }
      const auto path = space.shortest_path(static_cast<std::size_t>(x), static_cast<std::size_t>(y));
      const double target = t * space.dist()(x, y);
      std::size_t best = path.front();
      double gap = std::numeric_limits<double>::infinity();
      for (std::size_t v : path) {
        const double g = std::fabs(space.dist()(x, static_cast<Eigen::Index>(v)) - target);
        if (g < gap - 1e-12 * std::max(1.0, target)) {
          gap = g;
          best = v;
        }
      }
      masses[static_cast<Eigen::Index>(best)] += m;
    }
  }
  return ProbMeasure::from_masses(space, masses);
}

/// Time grid plus densities against m, with per-time diagnostics. Entries of
/// `speed` at the two ends are NaN (no central difference there).
struct FlowTrajectory {
  std::vector<double> times;
  std::vector<Field> densities;
  std::vector<double> entropy;
  std::vector<double> fisher;
  std::vector<double> speed;

  std::size_t size() const noexcept { return times.size(); }
};

/// W_2(mu_{i-1}, mu_{i+1}) / (t_{i+1} - t_{i-1}).
inline double metric_derivative(const DiscreteMMSpace& space, const FlowTrajectory& traj, std::size_t i) {
  if (i == 0 || i + 1 >= traj.size()) throw Error(ErrorCode::BoundaryIndex, "metric derivative needs an interior index");
  const ProbMeasure a = ProbMeasure::from_density(space, traj.densities[i - 1]);
  const ProbMeasure b = ProbMeasure::from_density(space, traj.densities[i + 1]);
  return w2(space, a, b) / (traj.times[i + 1] - traj.times[i - 1]);
}

}  // namespace mmflow
