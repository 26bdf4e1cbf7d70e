#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mmflow/entropy.hpp"
#include "mmflow/error.hpp"
#include "mmflow/measure.hpp"
#include "mmflow/space.hpp"
#include "mmflow/trajectory.hpp"
#include "mmflow/wasserstein.hpp"

namespace mmflow {

enum class InnerSolver { ExactConvex, Entropic };

struct JkoConfig {
  double tau = 1e-2;
  InnerSolver inner_solver = InnerSolver::ExactConvex;
  double tol_inner = 1e-8;           // bound on the Frank-Wolfe gap of the inner problem
  std::size_t max_outer_steps = 100000;
  // Entropic solver: regularization schedule (descending); the last entry is
  // the working epsilon. Empty means 1, 1e-1, 1e-2, 1e-3.
  std::vector<double> eps_schedule;
  std::size_t max_inner_iter = 20000;
  std::size_t polish_max_n = 64;     // exact polish after the entropic solve
};

struct JkoStepInfo {
  ProbMeasure next;
  double kkt_residual = 0.0;
  double objective = 0.0;       // F(next)
  double objective_start = 0.0; // F(mu) = Ent^V(mu)
  std::size_t iterations = 0;
  bool polished = false;
};

namespace detail {

// Inner problem for one step, parameterized by the coupling pi with first
// marginal mu:  min sum pi C + sum_y m_y h_y(nu_y / m_y),  nu = pi^T 1,
// C = d^2 / (2 tau),  h_y(r) = r log r + V_y r.  Its concave dual is
//   D(b) = sum_x mu_x min_y (C_xy + b_y) - sum_y m_y exp(b_y - V_y - 1),
// smoothed by replacing min with an epsilon-softmin.
class JkoDual {
 public:
  JkoDual(const DiscreteMMSpace& space, const ProbMeasure& mu, double tau, const Field& v)
      : m_(space.measure()), v_(v) {
    for (Eigen::Index x = 0; x < mu.masses().size(); ++x)
      if (mu.masses()[x] > 0.0) rows_.push_back(x);
    const auto n = static_cast<Eigen::Index>(space.size());
    const auto r = static_cast<Eigen::Index>(rows_.size());
    c_.resize(r, n);
    mu_.resize(r);
    for (Eigen::Index i = 0; i < r; ++i) {
      mu_[i] = mu.masses()[rows_[static_cast<std::size_t>(i)]];
      c_.row(i) = space.dist().row(rows_[static_cast<std::size_t>(i)]).cwiseAbs2() / (2.0 * tau);
    }
  }

  Eigen::Index n() const { return m_.size(); }

  // Row-conditional plan p (rows x n) and dual value at smoothing eps.
  double evaluate(const Field& b, double eps, Eigen::MatrixXd* p) const {
    double value = 0.0;
    for (Eigen::Index i = 0; i < c_.rows(); ++i) {
      const Eigen::VectorXd z = c_.row(i).transpose() + b;
      const double zmin = z.minCoeff();
      const Eigen::ArrayXd e = (-(z.array() - zmin) / eps).exp();
      const double s = e.sum();
      value += mu_[i] * (zmin - eps * std::log(s));
      if (p != nullptr) p->row(i) = (e / s).matrix().transpose();
    }
    return value - nu_hat_raw(b).sum();
  }

  Field nu_hat_raw(const Field& b) const {
    Field out(m_.size());
    for (Eigen::Index y = 0; y < m_.size(); ++y) out[y] = m_[y] * std::exp(b[y] - v_[y] - 1.0);
    return out;
  }

  Field column_sums(const Eigen::MatrixXd& p) const { return p.transpose() * mu_; }

  // Damped Newton ascent at fixed eps until the l1 gradient drops below
  // grad_tol or stops improving; returns the number of Newton steps.
  std::size_t maximize(Field& b, double eps, double grad_tol, std::size_t max_steps = 200) const {
    const Eigen::Index n = m_.size();
    Eigen::MatrixXd p(c_.rows(), n);
    double value = evaluate(b, eps, &p);
    double best = std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;
    std::size_t steps = 0;
    for (; steps < max_steps; ++steps) {
      const Field nh = nu_hat_raw(b);
      const Field grad = column_sums(p) - nh;
      const double grad_norm = grad.lpNorm<1>();
      if (grad_norm <= grad_tol) break;
      if (grad_norm < best) {
        best = grad_norm;
        since_best = 0;
      } else if (++since_best > 30) {
        break;
      }
      // -H = (1/eps) sum_x mu_x (diag p_x - p_x p_x^T) + diag(nu_hat).
      Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
      const Eigen::MatrixXd weighted = mu_.asDiagonal() * p;
      h.diagonal() += weighted.colwise().sum().transpose() / eps;
      h.noalias() -= (p.transpose() * weighted) / eps;
      h.diagonal() += nh;
      Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
      Field step = ldlt.solve(grad);
      if (!step.allFinite()) step = grad.cwiseQuotient(nh);
      const double slope = grad.dot(step);
      if (slope <= 0.0) break;
      double s = 1.0;
      bool moved = false;
      Eigen::MatrixXd trial_p(c_.rows(), n);
      for (int ls = 0; ls < 60; ++ls, s *= 0.5) {
        const Field trial = b + s * step;
        const double tv = evaluate(trial, eps, &trial_p);
        if (!std::isfinite(tv)) continue;
        bool accept = tv >= value + 1e-4 * s * slope;
        // Near the optimum the value change drowns in round-off; fall back on
        // a decrease of the gradient norm.
        if (!accept && std::fabs(tv - value) <= 1e-13 * (1.0 + std::fabs(value)))
          accept = (column_sums(trial_p) - nu_hat_raw(trial)).lpNorm<1>() < grad_norm;
        if (accept) {
          b = trial;
          value = tv;
          p.swap(trial_p);
          moved = true;
          break;
        }
      }
      if (!moved) break;
    }
    return steps;
  }

  // Primal plan (rows x n) and column marginal at the current b.
  void primal(const Field& b, double eps, Eigen::MatrixXd& plan, Field& nu) const {
    Eigen::MatrixXd p(c_.rows(), m_.size());
    evaluate(b, eps, &p);
    plan = mu_.asDiagonal() * p;
    nu = plan.colwise().sum().transpose();
  }

  // Frank-Wolfe gap of the primal objective at (plan, nu = plan^T 1).
  double kkt_gap(const Eigen::MatrixXd& plan, const Field& nu) const {
    const Eigen::Index n = m_.size();
    Field lin(n);
    for (Eigen::Index y = 0; y < n; ++y) {
      if (!(nu[y] > 0.0)) return std::numeric_limits<double>::infinity();
      lin[y] = std::log(nu[y] / m_[y]) + 1.0 + v_[y];
    }
    double gap = 0.0;
    for (Eigen::Index i = 0; i < c_.rows(); ++i) {
      const Eigen::VectorXd z = c_.row(i).transpose() + lin;
      gap += plan.row(i).dot((z.array() - z.minCoeff()).matrix());
    }
    return gap;
  }

  const std::vector<Eigen::Index>& rows() const { return rows_; }
  const Eigen::MatrixXd& cost() const { return c_; }
  const Field& row_masses() const { return mu_; }

 private:
  Field m_;
  Field v_;
  std::vector<Eigen::Index> rows_;
  Eigen::MatrixXd c_;
  Field mu_;
};

inline constexpr double kExactEpsFloor = 1e-12;

struct Continuation {
  std::size_t iterations = 0;
  double eps = 0.0;   // smoothing of the returned b
  double gap = std::numeric_limits<double>::infinity();
};

// Continuation in eps from eps_start by factors of ten. Stops once the
// Frank-Wolfe gap of the smoothed plan is below target; softmin ties resolve
// only to round-off / eps, so the best stage is kept when the floor is hit.
inline Continuation newton_continuation(const JkoDual& dual, Field& b, double eps_start, double target) {
  Continuation out;
  Field best_b = b;
  Eigen::MatrixXd plan;
  Field nu;
  for (double eps = eps_start; eps >= kExactEpsFloor * 0.999; eps *= 0.1) {
    out.iterations += dual.maximize(b, eps, 1e-3 * eps * target);
    dual.primal(b, eps, plan, nu);
    const double gap = dual.kkt_gap(plan, nu);
    if (gap < out.gap) {
      out.gap = gap;
      out.eps = eps;
      best_b = b;
    }
    if (gap <= 1e-3 * target) break;
  }
  b = best_b;
  return out;
}

}  // namespace detail

/// One minimizing-movement step: argmin_nu Ent^V(nu) + W_2^2(mu, nu) / (2 tau).
inline JkoStepInfo jko_step(const DiscreteMMSpace& space, const ProbMeasure& mu, const JkoConfig& config,
                            const Field* potential = nullptr) {
  if (!(config.tau > 0.0)) throw Error(ErrorCode::BadParams, "tau must be positive");
  if (!(config.tol_inner > 0.0)) throw Error(ErrorCode::BadParams, "tol_inner must be positive");
  if (mu.size() != space.size()) throw Error(ErrorCode::SpaceMismatch, "measure does not live on this space");
  const auto n = static_cast<Eigen::Index>(space.size());
  const Field v = potential != nullptr ? *potential : Field::Zero(n);
  require_same_size(space, v, "potential");

  JkoStepInfo info;
  info.objective_start = ent_v(space, mu, v);
  const detail::JkoDual dual(space, mu, config.tau, v);
  Field b(n);
  double eps_end = 0.0;
  double residual = 0.0;

  if (config.inner_solver == InnerSolver::ExactConvex) {
    if (!mu.strictly_positive())
      throw Error(ErrorCode::InnerSolverFailure,
                  "the exact inner solver needs a strictly positive measure; use the entropic solver for measures with zeros");
    // nu_hat(b) = mu at this start, the fixed point of a vanishing step.
    for (Eigen::Index y = 0; y < n; ++y) b[y] = std::log(mu.density()[y]) + 1.0 + v[y];
    const detail::Continuation run = detail::newton_continuation(dual, b, 1.0, config.tol_inner);
    info.iterations = run.iterations;
    eps_end = run.eps;
  } else {
    std::vector<double> schedule = config.eps_schedule;
    if (schedule.empty()) schedule = {1.0, 1e-1, 1e-2, 1e-3};
    const Eigen::MatrixXd& c = dual.cost();
    const Field& a = dual.row_masses();
    const auto r = c.rows();
    Field logu = Field::Zero(r);
    Field logv = Field::Zero(n);
    const Field logm = space.measure().array().log().matrix();
    Eigen::VectorXd z;
    // Scaling iterations contract only like 1 / (1 + eps), so they serve as a
    // warm start; damped Newton then solves the smoothed dual at the working eps.
    for (double eps : schedule) {
      if (!(eps > 0.0)) throw Error(ErrorCode::BadParams, "entropic schedule entries must be positive");
      for (std::size_t it = 0; it < config.max_inner_iter; ++it) {
        ++info.iterations;
        for (Eigen::Index i = 0; i < r; ++i) {
          z = -c.row(i).transpose() / eps + logv;
          logu[i] = std::log(a[i]) - detail::log_sum_exp(z);
        }
        double change = 0.0;
        for (Eigen::Index y = 0; y < n; ++y) {
          z = -c.col(y) / eps + logu;
          // lse = log (K^T u)_y; prox of Ent^V / eps in KL divergence.
          const double lse = detail::log_sum_exp(z);
          const double lognu = ((logm[y] - 1.0 - v[y]) + eps * lse) / (1.0 + eps);
          const double next = lognu - lse;
          change = std::max(change, std::fabs(next - logv[y]));
          logv[y] = next;
        }
        if (change <= 1e-4) break;
      }
    }
    const double eps = schedule.back();
    // pi_xy = exp(logu_x - C_xy / eps + logv_y) equals the softmin plan of b = -eps logv.
    b = -eps * logv;
    info.iterations += dual.maximize(b, eps, 1e-3 * config.tol_inner);
    eps_end = eps;
    Eigen::MatrixXd p(dual.cost().rows(), n);
    dual.evaluate(b, eps, &p);
    residual = (dual.column_sums(p) - dual.nu_hat_raw(b)).lpNorm<1>();
    if (space.size() <= config.polish_max_n) {
      const detail::Continuation run = detail::newton_continuation(dual, b, eps, config.tol_inner);
      info.iterations += run.iterations;
      eps_end = run.eps;
      info.polished = true;
    } else if (!(residual <= config.tol_inner)) {
      throw Error(ErrorCode::InnerSolverFailure,
                  "entropic solve stopped with marginal residual " + std::to_string(residual));
    }
  }

  Eigen::MatrixXd plan;
  Field nu;
  dual.primal(b, eps_end, plan, nu);
  info.kkt_residual = dual.kkt_gap(plan, nu);
  const bool exact_path = config.inner_solver == InnerSolver::ExactConvex || info.polished;
  if (exact_path && !(info.kkt_residual <= config.tol_inner))
    throw Error(ErrorCode::InnerSolverFailure,
                "inner problem stopped with KKT residual " + std::to_string(info.kkt_residual));
  info.next = ProbMeasure::from_masses(space, nu.cwiseMax(0.0));
  info.objective = ent_v(space, info.next, v) + wp(space, mu, info.next, 2.0).cost / (2.0 * config.tau);
  return info;
}

/// Iterates jko_step; iterate k carries the time stamp k tau.
inline FlowTrajectory jko_flow(const DiscreteMMSpace& space, const ProbMeasure& mu0, double horizon,
                               const JkoConfig& config, const Field* potential = nullptr, bool with_speed = true) {
  if (!(horizon > 0.0)) throw Error(ErrorCode::BadParams, "flow horizon must be positive");
  if (!(config.tau > 0.0)) throw Error(ErrorCode::BadParams, "tau must be positive");
  const auto steps = static_cast<std::size_t>(std::ceil(horizon / config.tau - 1e-9));
  if (steps > config.max_outer_steps)
    throw Error(ErrorCode::BadParams, "horizon needs " + std::to_string(steps) + " steps, above max_outer_steps");
  FlowTrajectory traj;
  traj.times.push_back(0.0);
  traj.densities.push_back(mu0.density());
  ProbMeasure mu = mu0;
  for (std::size_t k = 1; k <= steps; ++k) {
    mu = jko_step(space, mu, config, potential).next;
    traj.times.push_back(static_cast<double>(k) * config.tau);
    traj.densities.push_back(mu.density());
  }
  fill_diagnostics(space, traj, potential, with_speed);
  return traj;
}

struct EdiReport {
  double max_abs_defect = 0.0;
  double relative_defect = 0.0;   // max |defect| / entropy drop over the range
  double max_one_sided = -std::numeric_limits<double>::infinity();  // max over windows of the defect
  double entropy_drop = 0.0;
  std::size_t windows = 0;
};

/// Energy-dissipation bookkeeping on [t_from, t_to]: for windows [t, s] of
/// interior grid times, defect = Ent(t) - Ent(s) - 1/2 int |mu'|^2 - 1/2 int I,
/// trapezoidal in time, with the metric derivative for |mu'| and the Fisher
/// information for the squared slope.
inline EdiReport edi_check(const DiscreteMMSpace& space, FlowTrajectory traj,
                           double t_from = -std::numeric_limits<double>::infinity(),
                           double t_to = std::numeric_limits<double>::infinity()) {
  if (traj.size() < 3) throw Error(ErrorCode::GridTooCoarse, "need at least three times");
  if (traj.entropy.size() != traj.size() || traj.fisher.size() != traj.size()) fill_diagnostics(space, traj, nullptr, false);
  if (traj.speed.size() != traj.size()) traj.speed.assign(traj.size(), std::numeric_limits<double>::quiet_NaN());
  std::vector<std::size_t> idx;
  for (std::size_t k = 1; k + 1 < traj.size(); ++k) {
    if (traj.times[k] < t_from - 1e-12 || traj.times[k] > t_to + 1e-12) continue;
    if (!std::isfinite(traj.speed[k])) traj.speed[k] = metric_derivative(space, traj, k);
    idx.push_back(k);
  }
  if (idx.size() < 2) throw Error(ErrorCode::GridTooCoarse, "fewer than two interior times in the window");
  // Prefix integrals of 1/2 |mu'|^2 + 1/2 I.
  std::vector<double> acc(idx.size(), 0.0);
  auto rate = [&](std::size_t k) { return 0.5 * traj.speed[k] * traj.speed[k] + 0.5 * traj.fisher[k]; };
  for (std::size_t j = 1; j < idx.size(); ++j) {
    const double dt = traj.times[idx[j]] - traj.times[idx[j - 1]];
    acc[j] = acc[j - 1] + 0.5 * dt * (rate(idx[j]) + rate(idx[j - 1]));
  }
  EdiReport out;
  out.entropy_drop = traj.entropy[idx.front()] - traj.entropy[idx.back()];
  for (std::size_t i = 0; i < idx.size(); ++i) {
    for (std::size_t j = i + 1; j < idx.size(); ++j) {
      const double defect = traj.entropy[idx[i]] - traj.entropy[idx[j]] - (acc[j] - acc[i]);
      ++out.windows;
      out.max_one_sided = std::max(out.max_one_sided, defect);
      if (i == 0) out.max_abs_defect = std::max(out.max_abs_defect, std::fabs(defect));
    }
  }
  out.relative_defect = out.entropy_drop > 0.0 ? out.max_abs_defect / out.entropy_drop
                                               : (out.max_abs_defect == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
  return out;
}

}  // namespace mmflow
