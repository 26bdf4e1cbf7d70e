#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "mmflow/dirichlet.hpp"
#include "mmflow/entropy.hpp"
#include "mmflow/generators.hpp"
#include "mmflow/measure.hpp"
#include "mmflow/trajectory.hpp"
#include "mmflow/wasserstein.hpp"

using namespace mmflow;

namespace {

template <class F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no mmflow::Error thrown";
  return ErrorCode::BadParams;
}

ProbMeasure masses(const DiscreteMMSpace& s, std::initializer_list<double> m) {
  Field v(static_cast<Eigen::Index>(m.size()));
  Eigen::Index i = 0;
  for (double x : m) v[i++] = x;
  return ProbMeasure::from_masses(s, v);
}

Field cosine_field(const DiscreteMMSpace& s, int k) {
  Field f(static_cast<Eigen::Index>(s.size()));
  for (Eigen::Index x = 0; x < f.size(); ++x)
    f[x] = std::cos(2.0 * std::numbers::pi * k * static_cast<double>(x) / static_cast<double>(f.size()));
  return f;
}

// W_1 on an equally spaced cycle: h * min_c sum |F_i - c| with F the cumulative
// mass difference; the minimizing c is a median of F.
double cycle_w1(const Field& a, const Field& b, double h) {
  std::vector<double> cum(static_cast<std::size_t>(a.size()));
  double run = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) cum[static_cast<std::size_t>(i)] = (run += a[i] - b[i]);
  std::vector<double> sorted = cum;
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<long>(sorted.size() / 2), sorted.end());
  const double c = sorted[sorted.size() / 2];
  double total = 0.0;
  for (double v : cum) total += std::fabs(v - c);
  return h * total;
}

}  // namespace

// Dirichlet form and heat semigroup

TEST(Dirichlet, TwoPointHandValues) {
  const auto s = two_point();
  const Field f{{0.0, 1.0}};
  const Field g = gamma(s, f);
  EXPECT_DOUBLE_EQ(g[0], 0.5);
  EXPECT_DOUBLE_EQ(g[1], 0.5);
  EXPECT_DOUBLE_EQ(energy(s, f), 1.0);
  const Field lap = laplacian(s, f);
  EXPECT_DOUBLE_EQ(lap[0], 1.0);
  EXPECT_DOUBLE_EQ(lap[1], -1.0);
  const Field g2 = gamma2(s, f);
  EXPECT_NEAR(g2[0], 1.0, 1e-15);
  EXPECT_NEAR(g2[1], 1.0, 1e-15);
}

TEST(Dirichlet, TwoPointSpectrumAndKernel) {
  const auto s = two_point();
  const auto spec = spectral_decompose(s);
  EXPECT_NEAR(spec.eigenvalues[0], 0.0, 1e-14);
  EXPECT_NEAR(spec.eigenvalues[1], 2.0, 1e-14);
  for (double t : {0.0, 0.1, 1.0, 3.0}) {
    const auto k = heat_kernel(s, spec, t);
    EXPECT_NEAR(k.p(0, 0), 0.5 * (1.0 + std::exp(-2.0 * t)), 1e-14) << t;
    EXPECT_NEAR(k.p(0, 1), 0.5 * (1.0 - std::exp(-2.0 * t)), 1e-14) << t;
  }
  EXPECT_EQ(code_of([&] { heat_kernel(s, spec, -1.0); }), ErrorCode::NegativeTime);
}

TEST(Dirichlet, CycleEigenvaluesMatchFourier) {
  const std::size_t n = 24;
  const auto s = cycle(n, 1.0);
  const double h = s.mesh_size();
  const auto spec = spectral_decompose(s);
  std::vector<double> fourier;
  for (std::size_t k = 0; k < n; ++k)
    fourier.push_back(2.0 / (h * h) * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(k) / n)));
  std::sort(fourier.begin(), fourier.end());
  for (std::size_t k = 0; k < n; ++k) EXPECT_NEAR(spec.eigenvalues[static_cast<Eigen::Index>(k)], fourier[k], 1e-9 * fourier.back());
}

TEST(Dirichlet, SpectralInvariants) {
  const auto s = icosphere(1, 1.0);
  const auto spec = spectral_decompose(s);
  EXPECT_NEAR(spec.eigenvalues[0], 0.0, 1e-10);
  const Eigen::MatrixXd gram = spec.phi.transpose() * s.measure().asDiagonal() * spec.phi;
  EXPECT_LT((gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff(), 1e-10);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  Field f(static_cast<Eigen::Index>(s.size()));
  for (Eigen::Index i = 0; i < f.size(); ++i) f[i] = normal(rng);
  EXPECT_LT((spec.phi * spec.coefficients(f) - f).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Dirichlet, CycleFirstModeHasSmallGamma2Ratio) {
  const auto s = cycle(64, 1.0);
  const auto spec = spectral_decompose(s);
  const Field phi = spec.phi.col(1);
  const Field ratio = gamma2(s, phi).cwiseQuotient(gamma(s, phi).cwiseMax(1e-300));
  EXPECT_GE(ratio.minCoeff(), -0.05);
}

TEST(Dirichlet, HeatIsMarkovAndSemigroup) {
  const auto s = cycle(32, 1.0);
  const auto spec = spectral_decompose(s);
  const Field f = cosine_field(s, 3) + Field::Constant(32, 2.0);
  EXPECT_NEAR(s.measure().dot(heat_apply(s, spec, 0.7, f)), s.measure().dot(f), 1e-12);
  const Field a = heat_apply(s, spec, 0.3, heat_apply(s, spec, 0.4, f));
  EXPECT_LT((a - heat_apply(s, spec, 0.7, f)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ((heat_apply(s, spec, 0.0, f) - f).cwiseAbs().maxCoeff(), 0.0);
  // Pure Fourier mode decays at its eigenvalue.
  const double h = s.mesh_size();
  const double lambda = 2.0 / (h * h) * (1.0 - std::cos(2.0 * std::numbers::pi * 3.0 / 32.0));
  const Field mode = cosine_field(s, 3);
  EXPECT_LT((heat_apply(s, spec, 0.01, mode) - std::exp(-0.01 * lambda) * mode).cwiseAbs().maxCoeff(), 1e-11);
}

TEST(Dirichlet, ImplicitEulerConvergesAtFirstOrder) {
  const auto s = cycle(16, 1.0);
  const auto spec = spectral_decompose(s);
  const Field f = cosine_field(s, 2);
  const Field exact = heat_apply(s, spec, 0.2, f);
  const double e1 = (ImplicitEulerHeat(s, 0.01).apply(f, 0.2) - exact).cwiseAbs().maxCoeff();
  const double e2 = (ImplicitEulerHeat(s, 0.005).apply(f, 0.2) - exact).cwiseAbs().maxCoeff();
  EXPECT_NEAR(std::log2(e1 / e2), 1.0, 0.15);
}

TEST(Dirichlet, Resolvent) {
  const auto s = two_point();
  const auto spec = spectral_decompose(s);
  const Field f{{3.0, 1.0}};
  EXPECT_EQ((resolvent_power(s, spec, 1.0, 0.0, f) - f).cwiseAbs().maxCoeff(), 0.0);
  // mean 2, deviation (1, -1) on the eigenvalue 2: (1 + 0)^{-1/2} and (1 + 2)^{-1/2}.
  const Field r = resolvent_power(s, spec, 1.0, 1.0, f);
  EXPECT_NEAR(r[0], 2.0 + 1.0 / std::sqrt(3.0), 1e-14);
  EXPECT_NEAR(r[1], 2.0 - 1.0 / std::sqrt(3.0), 1e-14);
  const Field phi{{1.0, -1.0}};
  EXPECT_LT((resolvent_power(s, spec, 0.5, 2.0, phi) - phi / 2.5).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_EQ(code_of([&] { resolvent_power(s, spec, 0.0, 1.0, f); }), ErrorCode::NonpositiveAlpha);
}

// Wasserstein

TEST(Wasserstein, DiracsAndDiagonal) {
  const auto s = two_point();
  const auto r = wp(s, ProbMeasure::dirac(s, 0), ProbMeasure::dirac(s, 1), 2.0);
  EXPECT_NEAR(r.value, 1.0, 1e-14);
  EXPECT_NEAR(r.plan(0, 1), 1.0, 1e-14);
  const auto mu = masses(s, {0.3, 0.7});
  EXPECT_NEAR(wp(s, mu, mu, 1.0).value, 0.0, 1e-14);
}

TEST(Wasserstein, TwoPointBruteForce) {
  const auto s = two_point();
  const auto mu = masses(s, {0.75, 0.25});
  const auto nu = masses(s, {0.25, 0.75});
  // Couplings pi = [[a, 0.75 - a], [0.25 - a, 0.5 + a]], a in [0, 0.25].
  double best = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= 1000; ++k) {
    const double a = 0.25 * k / 1000.0;
    best = std::min(best, (0.75 - a) + (0.25 - a));
  }
  EXPECT_NEAR(wp(s, mu, nu, 2.0).value, std::sqrt(best), 1e-12);
  EXPECT_NEAR(std::sqrt(best), std::sqrt(0.5), 1e-15);
}

TEST(Wasserstein, CycleW1MatchesCumulativeFormula) {
  const auto s = cycle(20, 1.0);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    Field a(20), b(20);
    for (int i = 0; i < 20; ++i) {
      a[i] = unit(rng);
      b[i] = unit(rng);
    }
    a /= a.sum();
    b /= b.sum();
    const double got = wp(s, ProbMeasure::from_masses(s, a), ProbMeasure::from_masses(s, b), 1.0).value;
    EXPECT_NEAR(got, cycle_w1(a, b, s.mesh_size()), 1e-10);
  }
}

TEST(Wasserstein, ErrorsOnForeignMeasures) {
  const auto s = two_point();
  const auto c = cycle(5, 1.0);
  EXPECT_EQ(code_of([&] { wp(s, ProbMeasure::uniform(s), ProbMeasure::uniform(c), 2.0); }), ErrorCode::SpaceMismatch);
}

TEST(Sinkhorn, ApproachesExactValue) {
  const auto s = two_point();
  const auto mu = masses(s, {0.75, 0.25});
  const auto nu = masses(s, {0.25, 0.75});
  const auto r = sinkhorn_wp(s, mu, nu, 2.0, 1e-4, 200000);
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.value, std::sqrt(0.5), 1e-3);
  double previous = std::numeric_limits<double>::infinity();
  for (double eps : {1.0, 0.1, 0.01, 1e-3}) {
    const double gap = std::fabs(sinkhorn_wp(s, mu, nu, 2.0, eps, 200000).value - std::sqrt(0.5));
    EXPECT_LE(gap, previous + 1e-12) << eps;
    previous = gap;
  }
}

TEST(Sinkhorn, IdenticalMarginalsCostIsSmall) {
  const auto s = cycle(8, 1.0);
  const auto mu = ProbMeasure::uniform(s);
  for (double eps : {0.5, 0.05}) {
    const auto r = sinkhorn_wp(s, mu, mu, 2.0, eps, 100000);
    EXPECT_LE(r.cost, eps * std::log(8.0) + 1e-12) << eps;
  }
}

TEST(HopfLax, TwoPointAndLimits) {
  const auto s = two_point();
  const Field f{{0.0, 1.0}};
  const Field q = hopf_lax(s, f, 1.0);
  EXPECT_DOUBLE_EQ(q[0], 0.0);
  EXPECT_DOUBLE_EQ(q[1], 0.5);
  EXPECT_EQ((hopf_lax(s, f, 0.0) - f).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_NEAR(hopf_lax(s, f, 1e9).maxCoeff(), 0.0, 1e-8);
  const Field c = Field::Constant(2, 4.0);
  EXPECT_EQ((hopf_lax(s, c, 2.0) - c).cwiseAbs().maxCoeff(), 0.0);
}

TEST(HopfLax, MonotoneInTime) {
  const auto s = cycle(16, 1.0);
  const Field f = cosine_field(s, 2);
  Field prev = f;
  for (double t : {0.05, 0.1, 0.4, 1.0}) {
    const Field q = hopf_lax(s, f, t);
    EXPECT_LE((q - prev).maxCoeff(), 0.0);
    prev = q;
  }
}

TEST(HamiltonJacobi, ConstantHasZeroResidual) {
  const auto s = cycle(12, 1.0);
  for (const Field& r : hj_residual(s, Field::Constant(12, 3.0), {0.5, 1.0, 1.5}))
    EXPECT_EQ(r.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(code_of([&] { hj_residual(s, Field::Zero(12), {0.5, 1.0}); }), ErrorCode::GridTooCoarse);
}

TEST(HamiltonJacobi, TwoPointClosedForm) {
  // For t > 1/2, Q_t f = (0, 1/(2t)): d/dt = -1/(2t^2) at b, descending slope
  // 1/(2t), so the residual at b is -1/(2t^2) + 1/(8t^2) = -3/(8t^2).
  const auto s = two_point();
  const auto r = hj_residual(s, Field{{0.0, 1.0}}, {0.99, 1.0, 1.01});
  ASSERT_EQ(r.size(), 1u);
  EXPECT_NEAR(r[0][1], -3.0 / 8.0, 1e-3);
  EXPECT_NEAR(r[0][0], 0.0, 1e-12);
}

TEST(DualGap, WeakAndStrongDuality) {
  const auto s = cycle(10, 1.0);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    Field a(10), b(10), phi(10);
    for (int i = 0; i < 10; ++i) {
      a[i] = unit(rng);
      b[i] = unit(rng);
      phi[i] = 2.0 * unit(rng) - 1.0;
    }
    const auto mu = ProbMeasure::from_masses(s, a);
    const auto nu = ProbMeasure::from_masses(s, b);
    const double half = 0.5 * wp(s, mu, nu, 2.0).cost;
    EXPECT_NEAR(dual_gap(s, Field::Zero(10), mu, nu), half, 1e-12);
    EXPECT_GE(dual_gap(s, phi, mu, nu), -1e-9);
    EXPECT_LE(dual_gap(s, kantorovich_potential(s, mu, nu), mu, nu), 1e-6);
  }
}

TEST(Interpolation, EndpointsAndAntipodes) {
  const auto s = cycle(8, 1.0);
  const auto mu = ProbMeasure::dirac(s, 0);
  const auto nu = ProbMeasure::dirac(s, 4);
  EXPECT_EQ((displacement_interpolate(s, mu, nu, 0.0).masses() - mu.masses()).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ((displacement_interpolate(s, mu, nu, 1.0).masses() - nu.masses()).cwiseAbs().maxCoeff(), 0.0);
  const Field mid = displacement_interpolate(s, mu, nu, 0.5).masses();
  Eigen::Index at = 0;
  EXPECT_NEAR(mid.maxCoeff(&at), 1.0, 1e-14);
  EXPECT_TRUE(at == 2 || at == 6) << at;
}

TEST(Interpolation, NearGeodesicOnFineCycle) {
  const auto s = cycle(64, 1.0);
  Field a = cosine_field(s, 1) + Field::Constant(64, 1.5);
  Field b = cosine_field(s, 3) + Field::Constant(64, 1.2);
  const auto mu = ProbMeasure::from_density(s, a);
  const auto nu = ProbMeasure::from_density(s, b);
  const double total = w2(s, mu, nu);
  for (double t : {0.25, 0.5, 0.75})
    EXPECT_LE(w2(s, mu, displacement_interpolate(s, mu, nu, t)), t * total + 2.0 * s.mesh_size()) << t;
}

TEST(MetricDerivative, TwoPointHeat) {
  const auto s = two_point();
  const auto spec = spectral_decompose(s);
  const Field rho0{{1.5, 0.5}};
  const std::vector<double> times{0.4, 0.5, 0.6};
  const auto traj = heat_trajectory(s, spec, rho0, times, false);
  // Mass at a is 1/2 + e^{-2t}/4 and W_2 between two-point measures is the
  // square root of the transferred mass.
  auto a = [](double t) { return 0.5 + 0.25 * std::exp(-2.0 * t); };
  const double expected = std::sqrt(a(0.4) - a(0.6)) / 0.2;
  EXPECT_NEAR(metric_derivative(s, traj, 1), expected, 1e-10);
  EXPECT_EQ(code_of([&] { metric_derivative(s, traj, 0); }), ErrorCode::BoundaryIndex);
  EXPECT_EQ(code_of([&] { metric_derivative(s, traj, 2); }), ErrorCode::BoundaryIndex);
}

TEST(MetricDerivative, ConstantTrajectory) {
  const auto s = cycle(6, 1.0);
  FlowTrajectory traj;
  for (double t : {0.0, 0.1, 0.2}) {
    traj.times.push_back(t);
    traj.densities.push_back(Field::Ones(6));
  }
  EXPECT_NEAR(metric_derivative(s, traj, 1), 0.0, 1e-14);
}

// Entropy

TEST(Entropy, TwoPointValues) {
  const auto s = two_point();
  EXPECT_NEAR(ent(s, ProbMeasure::uniform(s)), -std::log(2.0), 1e-15);
  EXPECT_EQ(ent(s, ProbMeasure::dirac(s, 0)), 0.0);
}

TEST(Entropy, DecreasesAlongTwoPointHeat) {
  const auto s = two_point();
  const auto spec = spectral_decompose(s);
  const Field rho0{{1.5, 0.5}};
  double previous = ent(s, rho0);
  for (double t : {0.1, 0.5, 2.0}) {
    const double a = 1.0 + 0.5 * std::exp(-2.0 * t);
    const double hand = a * std::log(a) + (2.0 - a) * std::log(2.0 - a);
    const double e = ent(s, heat_density(s, spec, t, rho0));
    EXPECT_NEAR(e, hand, 1e-13);
    EXPECT_LT(e, previous);
    previous = e;
  }
}

TEST(Entropy, PotentialShift) {
  const auto s = cycle(7, 1.0);
  const Field rho = cosine_field(s, 1) + Field::Constant(7, 2.0);
  EXPECT_EQ(ent_v(s, rho, Field::Zero(7)), ent(s, rho));
  const auto mu = ProbMeasure::from_density(s, rho);
  EXPECT_NEAR(ent_v(s, mu, Field::Constant(7, 0.8)), ent(s, mu) + 0.8, 1e-14);
}

TEST(Entropy, GibbsMinimizesOnThreePoints) {
  const auto s = build_space(3, {{0, 1, 1.0, 1.0}, {1, 2, 1.0, 1.0}}, Field{{1.0, 2.0, 0.5}});
  const Field v{{0.3, -0.4, 1.1}};
  double best = std::numeric_limits<double>::infinity();
  Field arg;
  const int grid = 400;
  for (int i = 1; i < grid; ++i) {
    for (int j = 1; i + j < grid; ++j) {
      const Field m{{double(i) / grid, double(j) / grid, double(grid - i - j) / grid}};
      const double e = ent_v(s, ProbMeasure::from_masses(s, m), v);
      if (e < best) {
        best = e;
        arg = m;
      }
    }
  }
  Field gibbs = s.measure().cwiseProduct((-v).array().exp().matrix());
  gibbs /= gibbs.sum();
  EXPECT_LT((arg - gibbs).cwiseAbs().maxCoeff(), 2.0 / grid);
  EXPECT_LE(ent_v(s, ProbMeasure::from_masses(s, gibbs), v), best + 1e-12);
}

TEST(Fisher, HandValuesAndZeroDensity) {
  const auto s = two_point();
  EXPECT_EQ(fisher(s, Field::Ones(2)), 0.0);
  EXPECT_NEAR(fisher(s, Field{{1.5, 0.5}}), 4.0 / 3.0, 1e-15);
  EXPECT_NEAR(slope_upper(s, Field{{1.5, 0.5}}), std::sqrt(4.0 / 3.0), 1e-15);
  EXPECT_TRUE(std::isinf(fisher(s, Field{{2.0, 0.0}})));
}

TEST(Fisher, MatchesRootEnergyUnderRefinement) {
  std::vector<double> defect;
  std::vector<double> mesh;
  for (std::size_t n : {32u, 64u, 128u}) {
    const auto s = cycle(n, 1.0);
    const Field rho = (cosine_field(s, 1) * 0.5 + Field::Ones(static_cast<Eigen::Index>(n))).eval();
    const Field root = rho.cwiseSqrt();
    defect.push_back(std::fabs(fisher(s, rho) - 4.0 * energy(s, root)));
    mesh.push_back(s.mesh_size());
  }
  for (std::size_t i = 1; i < defect.size(); ++i)
    EXPECT_NEAR(std::log(defect[i - 1] / defect[i]) / std::log(mesh[i - 1] / mesh[i]), 2.0, 0.2);
}

TEST(SlopeProbe, UniformHasNoDescent) {
  const auto s = cycle(12, 1.0);
  EXPECT_EQ(slope_probe(s, Field::Ones(12), 20, 0.5, 1).value, 0.0);
}

TEST(SlopeProbe, TwoPointAgainstExhaustiveSearch) {
  // nu = (a, 1 - a): W_2 = sqrt|a - 3/4|. The finite-radius quotient behaves
  // like sqrt(radius) near 3/4, so it shrinks with the radius.
  const auto s = two_point();
  const Field rho{{1.5, 0.5}};
  const double e0 = ent(s, ProbMeasure::from_density(s, rho));
  auto quotient = [&](double a) {
    return (e0 - ent(s, ProbMeasure::from_masses(s, Field{{a, 1.0 - a}}))) / std::sqrt(std::fabs(a - 0.75));
  };
  auto oracle = [&](double radius) {
    double best = radius * radius <= 0.75 ? std::max(0.0, quotient(0.75 - radius * radius)) : 0.0;
    for (int k = 1; k < 200000; ++k) {
      const double a = k / 200000.0;
      const double w = std::sqrt(std::fabs(a - 0.75));
      if (w == 0.0 || w > radius) continue;
      best = std::max(best, quotient(a));
    }
    return best;
  };
  double previous = std::numeric_limits<double>::infinity();
  for (double radius : {0.4, 0.2, 0.1, 0.05}) {
    const double truth = oracle(radius);
    const double probe = slope_probe(s, rho, 40, radius, 2).value;
    EXPECT_LE(probe, truth + 1e-9) << radius;
    EXPECT_GE(probe, 0.9 * truth) << radius;
    EXPECT_LT(truth, std::sqrt(4.0 / 3.0));
    EXPECT_LT(truth, previous);
    previous = truth;
  }
}

TEST(SlopeProbe, BelowUpperProxyOnCycle) {
  const auto s = cycle(32, 1.0);
  const Field rho = cosine_field(s, 1) * 0.5 + Field::Ones(32);
  EXPECT_LE(slope_probe(s, rho, 30, 0.3, 4).value, slope_upper(s, rho) + s.mesh_size());
}

TEST(ConvexityProbe, VacuousBound) {
  const auto s = cycle(16, 1.0);
  const Field a = cosine_field(s, 1) * 0.5 + Field::Ones(16);
  std::vector<std::pair<ProbMeasure, ProbMeasure>> pairs{{ProbMeasure::from_density(s, a), ProbMeasure::uniform(s)}};
  EXPECT_TRUE(cd_convexity_probe(s, -1e6, pairs, {0.25, 0.5, 0.75}, 1e-9).pass);
}

TEST(ConvexityProbe, FlatCycleSitsAtZero) {
  // The flat circle has K = 0: K = 0 passes at mesh tolerance, K = 1 fails
  // without tolerance, at every resolution. The positive part of the deficit
  // at K = 0 shrinks as the interpolation snaps to a finer grid.
  double previous = std::numeric_limits<double>::infinity();
  for (std::size_t n : {32u, 64u, 128u}) {
    const auto s = cycle(n, 1.0);
    const auto N = static_cast<Eigen::Index>(n);
    const Field a = cosine_field(s, 1) * 0.5 + Field::Ones(N);
    const Field b = cosine_field(s, 2) * 0.5 + Field::Ones(N);
    const Field c = cosine_field(s, 3) * 0.3 + Field::Ones(N);
    std::vector<std::pair<ProbMeasure, ProbMeasure>> pairs{
        {ProbMeasure::from_density(s, a), ProbMeasure::from_density(s, b)},
        {ProbMeasure::from_density(s, b), ProbMeasure::from_density(s, c)}};
    const std::vector<double> ts{0.25, 0.5, 0.75};
    const auto flat = cd_convexity_probe(s, 0.0, pairs, ts, s.mesh_size());
    EXPECT_TRUE(flat.pass) << n;
    EXPECT_LT(std::max(flat.worst_deficit, 0.0), previous) << n;
    previous = std::max(flat.worst_deficit, 0.0) + 1e-15;
    EXPECT_FALSE(cd_convexity_probe(s, 1.0, pairs, ts, 1e-12).pass) << n;
  }
}
