#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "mmflow/error.hpp"
#include "mmflow/space.hpp"

namespace mmflow {

/// Carre du champ: (1 / 2 m_x) sum_y w_xy (f(y) - f(x)) (g(y) - g(x)).
inline Field gamma(const DiscreteMMSpace& space, const Field& f, const Field& g) {
  require_same_size(space, f, "f");
  require_same_size(space, g, "g");
  const std::size_t n = space.size();
  Field out = Field::Zero(static_cast<Eigen::Index>(n));
  for (std::size_t x = 0; x < n; ++x) {
    const auto xi = static_cast<Eigen::Index>(x);
    double acc = 0.0;
    for (const Neighbor& nb : space.neighbors(x)) {
      const auto yi = static_cast<Eigen::Index>(nb.point);
      acc += nb.conductance * (f[yi] - f[xi]) * (g[yi] - g[xi]);
    }
    out[xi] = acc / (2.0 * space.measure()[xi]);
  }
  return out;
}

inline Field gamma(const DiscreteMMSpace& space, const Field& f) { return gamma(space, f, f); }

/// Dirichlet form E(f, g) = 1/2 sum_{x,y} w_xy (f(x) - f(y)) (g(x) - g(y)).
inline double energy(const DiscreteMMSpace& space, const Field& f, const Field& g) {
  require_same_size(space, f, "f");
  require_same_size(space, g, "g");
  double acc = 0.0;
  for (const Edge& e : space.edges()) {
    const auto i = static_cast<Eigen::Index>(e.i);
    const auto j = static_cast<Eigen::Index>(e.j);
    acc += e.conductance * (f[i] - f[j]) * (g[i] - g[j]);
  }
  return acc;
}

inline double energy(const DiscreteMMSpace& space, const Field& f) { return energy(space, f, f); }

/// Delta f(x) = (1 / m_x) sum_y w_xy (f(y) - f(x)).
inline Field laplacian(const DiscreteMMSpace& space, const Field& f) {
  require_same_size(space, f, "f");
  const std::size_t n = space.size();
  Field out(static_cast<Eigen::Index>(n));
  for (std::size_t x = 0; x < n; ++x) {
    const auto xi = static_cast<Eigen::Index>(x);
    double acc = 0.0;
    for (const Neighbor& nb : space.neighbors(x)) acc += nb.conductance * (f[static_cast<Eigen::Index>(nb.point)] - f[xi]);
    out[xi] = acc / space.measure()[xi];
  }
  return out;
}

/// Gamma_2(f, f) = 1/2 (Delta Gamma(f, f) - 2 Gamma(f, Delta f)).
inline Field gamma2(const DiscreteMMSpace& space, const Field& f) {
  const Field lf = laplacian(space, f);
  return 0.5 * laplacian(space, gamma(space, f, f)) - gamma(space, f, lf);
}

/// Weighted adjacency minus degree, W - D, as a dense symmetric matrix.
inline Eigen::MatrixXd conductance_matrix(const DiscreteMMSpace& space) {
  const auto n = static_cast<Eigen::Index>(space.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (const Edge& e : space.edges()) {
    const auto i = static_cast<Eigen::Index>(e.i);
    const auto j = static_cast<Eigen::Index>(e.j);
    a(i, j) += e.conductance;
    a(j, i) += e.conductance;
    a(i, i) -= e.conductance;
    a(j, j) -= e.conductance;
  }
  return a;
}

/// Eigen-decomposition of -Delta, orthonormal in the m-weighted inner product.
struct SpectralData {
  Field eigenvalues;     // ascending, nonnegative
  Eigen::MatrixXd phi;   // column k is the k-th eigenfunction
  Field measure;

  std::size_t size() const noexcept { return static_cast<std::size_t>(eigenvalues.size()); }

  /// Coefficients <f, phi_k>_m.
  Field coefficients(const Field& f) const { return phi.transpose() * measure.cwiseProduct(f); }

  /// sum_k g(lambda_k) <f, phi_k>_m phi_k.
  template <class Fn>
  Field apply(const Field& f, Fn&& g) const {
    Field c = coefficients(f);
    for (Eigen::Index k = 0; k < c.size(); ++k) c[k] *= g(eigenvalues[k]);
    return phi * c;
  }
};

inline constexpr std::size_t kDenseSolverCap = 4096;

inline SpectralData spectral_decompose(const DiscreteMMSpace& space, std::size_t cap = kDenseSolverCap) {
  const std::size_t n = space.size();
  if (n > cap)
    throw Error(ErrorCode::SizeCap, std::to_string(n) + " points exceed the dense eigensolver cap of " + std::to_string(cap));
  const Field sqrt_m = space.measure().cwiseSqrt();
  const Field inv_sqrt_m = sqrt_m.cwiseInverse();
  // S = M^{-1/2} (D - W) M^{-1/2} is symmetric and similar to -Delta.
  Eigen::MatrixXd s = -(inv_sqrt_m.asDiagonal() * conductance_matrix(space) * inv_sqrt_m.asDiagonal());
  s = 0.5 * (s + s.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(s);
  if (solver.info() != Eigen::Success) throw Error(ErrorCode::EigFailure, "symmetric eigensolver did not converge");

  SpectralData out;
  out.measure = space.measure();
  out.eigenvalues = solver.eigenvalues().cwiseMax(0.0);
  out.phi = inv_sqrt_m.asDiagonal() * solver.eigenvectors();

  // Re-orthonormalize each cluster of (numerically) repeated eigenvalues in
  // the m inner product, in index order, then fix signs so that the entry of
  // largest magnitude (first such index) is positive.
  const auto ni = static_cast<Eigen::Index>(n);
  const double scale = std::max(1.0, out.eigenvalues[ni - 1]);
  Eigen::Index start = 0;
  while (start < ni) {
    Eigen::Index end = start + 1;
    while (end < ni && out.eigenvalues[end] - out.eigenvalues[end - 1] <= 1e-9 * scale) ++end;
    for (Eigen::Index k = start; k < end; ++k) {
      for (int pass = 0; pass < 2; ++pass) {
        for (Eigen::Index j = start; j < k; ++j) {
          const double proj = out.phi.col(j).dot(out.measure.cwiseProduct(out.phi.col(k)));
          out.phi.col(k) -= proj * out.phi.col(j);
        }
      }
      const double norm = std::sqrt(out.phi.col(k).dot(out.measure.cwiseProduct(out.phi.col(k))));
      out.phi.col(k) /= norm;
    }
    start = end;
  }
  for (Eigen::Index k = 0; k < ni; ++k) {
    Eigen::Index arg = 0;
    double best = -1.0;
    for (Eigen::Index x = 0; x < ni; ++x) {
      if (std::fabs(out.phi(x, k)) > best * (1.0 + 1e-12)) {
        best = std::fabs(out.phi(x, k));
        arg = x;
      }
    }
    if (out.phi(arg, k) < 0.0) out.phi.col(k) *= -1.0;
  }
  out.eigenvalues[0] = 0.0;
  return out;
}

inline void require_nonnegative_time(double t) {
  if (!(t >= 0.0)) throw Error(ErrorCode::NegativeTime, "time must be nonnegative");
}

/// T_t f = sum_k exp(-lambda_k t) <f, phi_k>_m phi_k.
inline Field heat_apply(const DiscreteMMSpace& space, const SpectralData& spec, double t, const Field& f) {
  require_same_size(space, f, "f");
  require_nonnegative_time(t);
  if (t == 0.0) return f;
  return spec.apply(f, [t](double lambda) { return std::exp(-lambda * t); });
}

struct HeatKernel {
  double t = 0.0;
  Eigen::MatrixXd p;  // p(x, y), density against m in the second slot
};

inline HeatKernel heat_kernel(const DiscreteMMSpace& space, const SpectralData& spec, double t) {
  require_nonnegative_time(t);
  if (spec.size() != space.size()) throw Error(ErrorCode::SpaceMismatch, "spectral data belongs to another space");
  const Field decay = (-spec.eigenvalues.array() * t).exp().matrix();
  HeatKernel kernel;
  kernel.t = t;
  kernel.p = spec.phi * decay.asDiagonal() * spec.phi.transpose();
  kernel.p = 0.5 * (kernel.p + kernel.p.transpose()).eval();
  return kernel;
}

/// Density against m of the heat flow started from the measure with density
/// rho. Round-off negatives are clamped and the mass renormalized.
inline Field heat_density(const DiscreteMMSpace& space, const SpectralData& spec, double t, const Field& rho) {
  Field out = heat_apply(space, spec, t, rho);
  if (t == 0.0) return out;
  const double mass = rho.dot(space.measure());
  out = out.cwiseMax(0.0);
  const double now = out.dot(space.measure());
  if (now > 0.0) out *= mass / now;
  return out;
}

/// (alpha - Delta)^{-q/2} f.
inline Field resolvent_power(const DiscreteMMSpace& space, const SpectralData& spec, double alpha, double q,
                             const Field& f) {
  require_same_size(space, f, "f");
  if (!(alpha > 0.0)) throw Error(ErrorCode::NonpositiveAlpha, "alpha must be positive");
  if (!(q >= 0.0)) throw Error(ErrorCode::BadParams, "q must be nonnegative");
  if (q == 0.0) return f;
  return spec.apply(f, [alpha, q](double lambda) { return std::pow(alpha + lambda, -0.5 * q); });
}

/// Sparse implicit-Euler heat semigroup: each step solves
/// (M + delta (D - W)) u_{k+1} = M u_k. Positivity and mass are preserved
/// exactly in exact arithmetic; accuracy is first order in delta.
class ImplicitEulerHeat {
 public:
  ImplicitEulerHeat(const DiscreteMMSpace& space, double delta) : measure_(space.measure()), delta_(delta) {
    if (!(delta > 0.0)) throw Error(ErrorCode::BadParams, "implicit Euler step must be positive");
    const auto n = static_cast<Eigen::Index>(space.size());
    std::vector<Eigen::Triplet<double>> entries;
    entries.reserve(space.edges().size() * 4 + space.size());
    for (Eigen::Index x = 0; x < n; ++x) entries.emplace_back(x, x, measure_[x]);
    for (const Edge& e : space.edges()) {
      const auto i = static_cast<Eigen::Index>(e.i);
      const auto j = static_cast<Eigen::Index>(e.j);
      const double w = delta * e.conductance;
      entries.emplace_back(i, i, w);
      entries.emplace_back(j, j, w);
      entries.emplace_back(i, j, -w);
      entries.emplace_back(j, i, -w);
    }
    Eigen::SparseMatrix<double> a(n, n);
    a.setFromTriplets(entries.begin(), entries.end());
    solver_.compute(a);
    if (solver_.info() != Eigen::Success) throw Error(ErrorCode::SolverFailure, "sparse factorization failed");
  }

  double step_size() const noexcept { return delta_; }

  Field step(const Field& f) const {
    Field out = solver_.solve(measure_.cwiseProduct(f));
    if (solver_.info() != Eigen::Success) throw Error(ErrorCode::SolverFailure, "sparse solve failed");
    return out;
  }

  /// Approximates T_t f with round(t / delta) steps.
  Field apply(const Field& f, double t) const {
    require_nonnegative_time(t);
    Field out = f;
    const auto steps = static_cast<long>(std::llround(t / delta_));
    for (long k = 0; k < steps; ++k) out = step(out);
    return out;
  }

 private:
  Field measure_;
  double delta_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver_;
};

}  // namespace mmflow
