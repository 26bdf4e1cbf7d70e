#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "mmflow/drift.hpp"
#include "mmflow/generators.hpp"
#include "mmflow/jko.hpp"
#include "mmflow/trajectory.hpp"

using namespace mmflow;

namespace {

Field cosine_density(const DiscreteMMSpace& s, double amplitude) {
  Field f(static_cast<Eigen::Index>(s.size()));
  for (Eigen::Index x = 0; x < f.size(); ++x)
    f[x] = 1.0 + amplitude * std::cos(2.0 * std::numbers::pi * static_cast<double>(x) / static_cast<double>(f.size()));
  return f;
}

// Minimizer over nu = (a, 1 - a) on the two-point space of
// Ent^V(nu) + |a - a0| / (2 tau): the transferred mass is |a - a0| and d = 1.
// Scans a fine grid, then refines by golden section around the best cell.
double two_point_jko_oracle(double a0, double tau, double v0 = 0.0, double v1 = 0.0) {
  auto objective = [&](double a) {
    auto xlogx = [](double x) { return x > 0.0 ? x * std::log(x) : 0.0; };
    return xlogx(a) + xlogx(1.0 - a) + a * v0 + (1.0 - a) * v1 + std::fabs(a - a0) / (2.0 * tau);
  };
  const int grid = 100000;
  int best = 0;
  for (int k = 1; k <= grid; ++k)
    if (objective(double(k) / grid) < objective(double(best) / grid)) best = k;
  double lo = std::max(0.0, double(best - 1) / grid);
  double hi = std::min(1.0, double(best + 1) / grid);
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int it = 0; it < 100; ++it) {
    const double c = hi - g * (hi - lo);
    const double d = lo + g * (hi - lo);
    (objective(c) < objective(d) ? hi : lo) = objective(c) < objective(d) ? d : c;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST(JkoStep, UniformIsFixed) {
  const auto s = cycle(12, 1.0);
  const auto mu = ProbMeasure::uniform(s);
  const auto info = jko_step(s, mu, JkoConfig{.tau = 0.05});
  EXPECT_LT((info.next.masses() - mu.masses()).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(JkoStep, TwoPointMatchesScalarSearch) {
  const auto s = two_point();
  for (double tau : {0.1, 0.5, 1.0, 3.0}) {
    const auto mu = ProbMeasure::from_masses(s, Field{{0.9, 0.1}});
    const double a = two_point_jko_oracle(0.9, tau);
    EXPECT_NEAR(jko_step(s, mu, JkoConfig{.tau = tau}).next.masses()[0], a, 1e-4) << tau;
  }
  // tau = 0.1 sits inside the band where the linear transport cost outweighs
  // the entropy slope, so the step keeps mu.
  EXPECT_NEAR(two_point_jko_oracle(0.9, 0.1), 0.9, 1e-6);
}

TEST(JkoStep, TwoPointWithPotential) {
  const auto s = two_point();
  const Field v{{0.0, 1.0}};
  const auto mu = ProbMeasure::from_masses(s, Field{{0.2, 0.8}});
  const double a = two_point_jko_oracle(0.2, 1.0, 0.0, 1.0);
  EXPECT_NEAR(jko_step(s, mu, JkoConfig{.tau = 1.0}, &v).next.masses()[0], a, 1e-4);
}

TEST(JkoStep, EntropicAgreesWithExact) {
  const auto s = cycle(8, 1.0);
  const auto mu = ProbMeasure::from_density(s, cosine_density(s, 0.8));
  JkoConfig exact{.tau = 2.0};
  JkoConfig entropic{.tau = 2.0, .inner_solver = InnerSolver::Entropic};
  const Field a = jko_step(s, mu, exact).next.masses();
  const Field b = jko_step(s, mu, entropic).next.masses();
  EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-4);
}

TEST(JkoStep, SmallStepStaysClose) {
  const auto s = cycle(10, 1.0);
  const auto mu = ProbMeasure::from_density(s, cosine_density(s, 0.5));
  double previous = std::numeric_limits<double>::infinity();
  for (double tau : {0.4, 0.1, 0.025}) {
    const double moved = (jko_step(s, mu, JkoConfig{.tau = tau}).next.masses() - mu.masses()).cwiseAbs().sum();
    EXPECT_LE(moved, previous + 1e-12) << tau;
    EXPECT_LE(moved, 4.0 * tau) << tau;
    previous = moved;
  }
}

TEST(JkoStep, RejectsDiracForExactSolver) {
  const auto s = cycle(6, 1.0);
  try {
    jko_step(s, ProbMeasure::dirac(s, 0), JkoConfig{.tau = 0.1});
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InnerSolverFailure);
  }
}

TEST(JkoFlow, UniformStartIsConstant) {
  const auto s = cycle(8, 1.0);
  const auto traj = jko_flow(s, ProbMeasure::uniform(s), 0.2, JkoConfig{.tau = 0.05});
  ASSERT_EQ(traj.size(), 5u);
  for (const Field& rho : traj.densities) EXPECT_LT((rho - traj.densities.front()).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(JkoFlow, TwoPointFollowsStepOracle) {
  const auto s = two_point();
  const double tau = 1.0;
  const auto traj = jko_flow(s, ProbMeasure::from_masses(s, Field{{0.95, 0.05}}), 3.0, JkoConfig{.tau = tau});
  double a = 0.95;
  for (std::size_t k = 1; k < traj.size(); ++k) {
    a = two_point_jko_oracle(a, tau);
    EXPECT_NEAR(traj.densities[k][0], a, 2e-4) << k;
  }
  // The iteration stops where the entropy slope equals the transport slope
  // 1 / (2 tau), short of the uniform state.
  EXPECT_NEAR(std::log(a / (1.0 - a)), 1.0 / (2.0 * tau), 1e-3);
  EXPECT_GT(traj.entropy.back(), -std::log(2.0));
}

TEST(JkoFlow, MaximumPrinciple) {
  const auto s = cycle(64, 1.0);
  const Field f0 = cosine_density(s, 0.5);
  const auto traj = jko_flow(s, ProbMeasure::from_density(s, f0), 0.05, JkoConfig{.tau = 0.01}, nullptr, false);
  const double norm = f0.dot(s.measure());
  for (const Field& rho : traj.densities) {
    EXPECT_GE(rho.minCoeff() * norm, f0.minCoeff() - 1e-6);
    EXPECT_LE(rho.maxCoeff() * norm, f0.maxCoeff() + 1e-6);
  }
}

TEST(Edi, ConstantTrajectory) {
  const auto s = cycle(8, 1.0);
  FlowTrajectory traj;
  for (double t : {0.0, 0.1, 0.2, 0.3}) {
    traj.times.push_back(t);
    traj.densities.push_back(Field::Constant(8, 1.0 / s.total_measure()));
  }
  const auto rep = edi_check(s, traj);
  EXPECT_NEAR(rep.max_abs_defect, 0.0, 1e-14);
}

TEST(Edi, OneSidedInequalityOnHeatAndJko) {
  const auto s = cycle(32, 1.0);
  const auto spec = spectral_decompose(s);
  const Field rho0 = cosine_density(s, 0.5) / cosine_density(s, 0.5).dot(s.measure());
  const auto heat = heat_trajectory(s, spec, rho0, time_grid(0.0, 0.2, 0.01));
  EXPECT_LE(edi_check(s, heat).max_one_sided, 1e-3);
  const auto jko = jko_flow(s, ProbMeasure::from_density(s, rho0), 0.2, JkoConfig{.tau = 0.05});
  EXPECT_LE(edi_check(s, jko).max_one_sided, 1e-3);
  FlowTrajectory short_traj = heat;
  short_traj.times.resize(2);
  short_traj.densities.resize(2);
  short_traj.entropy.clear();
  EXPECT_THROW(edi_check(s, short_traj), Error);
}

// Drift

TEST(WeightedSpace, ZeroAndConstantPotential) {
  const auto s = cycle(10, 1.0);
  const auto same = weighted_space(s, Field::Zero(10));
  EXPECT_EQ((same.measure() - s.measure()).cwiseAbs().maxCoeff(), 0.0);
  const auto shifted = weighted_space(s, Field::Constant(10, 0.7));
  EXPECT_NEAR((shifted.measure() - std::exp(-0.7) * s.measure()).cwiseAbs().maxCoeff(), 0.0, 1e-15);
  EXPECT_NEAR(shifted.edges()[0].conductance, std::exp(-0.7) * s.edges()[0].conductance, 1e-14);
  const Field f = cosine_density(s, 1.0);
  EXPECT_LT((laplacian(shifted, f) - laplacian(s, f)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(WeightedSpace, TwoPointHandValues) {
  const auto w = weighted_space(two_point(), Field{{0.0, 1.0}});
  EXPECT_DOUBLE_EQ(w.measure()[0], 1.0);
  EXPECT_NEAR(w.measure()[1], std::exp(-1.0), 1e-16);
  EXPECT_NEAR(w.edges()[0].conductance, std::exp(-0.5), 1e-16);
  EXPECT_DOUBLE_EQ(w.dist(0, 1), 1.0);
}

TEST(FokkerPlanck, TwoPointClosedForm) {
  // Delta^V f = (e^{-1/2}, -e^{1/2}); Delta f - Gamma(V, f) = (1 - 1/2, -1 - 1/2).
  const auto s = two_point();
  const double expected = std::max(std::fabs(std::exp(-0.5) - 0.5), std::fabs(-std::exp(0.5) + 1.5));
  EXPECT_NEAR(fp_defect(s, Field{{0.0, 1.0}}, Field{{0.0, 1.0}}), expected, 1e-15);
}

TEST(FokkerPlanck, ConstantPotentialAndRefinement) {
  std::vector<FpLevel> family;
  for (std::size_t n : {32u, 64u, 128u}) {
    const auto s = cycle(n, 1.0);
    Field v(static_cast<Eigen::Index>(n)), f(static_cast<Eigen::Index>(n));
    for (Eigen::Index x = 0; x < v.size(); ++x) {
      const double theta = 2.0 * std::numbers::pi * static_cast<double>(x) / static_cast<double>(n);
      v[x] = std::sin(theta);
      f[x] = std::cos(theta);
    }
    EXPECT_LT(fp_defect(s, Field::Constant(v.size(), 2.0), f), 1e-12);
    family.push_back({s, v, {f}});
  }
  const auto rep = fp_consistency_check(family);
  EXPECT_TRUE(rep.pass) << rep.to_json().dump();
  const auto defects = rep.observed["defects"].get<std::vector<double>>();
  for (std::size_t i = 1; i < defects.size(); ++i) EXPECT_LE(defects[i], 0.5 * defects[i - 1]);
}

TEST(FokkerPlanck, FamilyMismatch) {
  std::vector<FpLevel> family{{cycle(16, 1.0), Field::Zero(16), {Field::Ones(16)}},
                              {icosphere(1, 1.0), Field::Zero(42), {Field::Ones(42)}}};
  try {
    fp_consistency_check(family);
    FAIL() << "expected FamilyMismatch";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::FamilyMismatch);
  }
}

TEST(DriftIdentify, ZeroPotentialReducesToIdentify) {
  const auto s = cycle(8, 1.0);
  const auto spec = spectral_decompose(s);
  const Field rho0 = cosine_density(s, 0.5);
  const auto plain = identify(s, spec, rho0, {0.1, 0.05}, 0.2);
  const auto drift = drift_identify(s, Field::Zero(8), rho0, {0.1, 0.05}, 0.2);
  const auto a = plain.observed["discrepancy"].get<std::vector<double>>();
  const auto b = drift.observed["discrepancy"].get<std::vector<double>>();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-9);
}

TEST(DriftIdentify, TwoPointGibbsTarget) {
  // The weighted heat flow reaches the Gibbs masses (1, e^{-1}) / (1 + e^{-1});
  // the JKO iteration stops inside the band |d/da Ent^V| <= 1 / (2 tau).
  const auto s = two_point();
  const Field v{{0.0, 1.0}};
  const Field gibbs = gibbs_masses(s, v);
  EXPECT_NEAR(gibbs[0], 1.0 / (1.0 + std::exp(-1.0)), 1e-15);
  const Field rho0{{0.2, 0.8}};
  const auto rep = drift_identify(s, v, rho0, {0.5}, 10.0);
  EXPECT_LE(rep.observed["heat_to_gibbs"].get<double>(), 1e-3);
  const double a = rep.observed["jko_to_gibbs"][0].get<double>();
  double oracle = 0.2;
  for (int k = 0; k < 20; ++k) oracle = two_point_jko_oracle(oracle, 0.5, 0.0, 1.0);
  EXPECT_NEAR(a, std::sqrt(std::fabs(gibbs[0] - oracle)), 1e-3);
  // Gibbs itself is a fixed point of the step.
  const auto step = jko_step(s, ProbMeasure::from_masses(s, gibbs), JkoConfig{.tau = 0.5}, &v);
  EXPECT_LT((step.next.masses() - gibbs).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(ConvexityShift, QuadraticAndLinearPotentialsOnAPath) {
  // Path of 9 unit-spaced points; Diracs four steps apart snap exactly at
  // t = 1/4, 1/2, 3/4, and Ent is constant along Dirac paths with unit masses.
  std::vector<Edge> edges;
  for (std::size_t i = 0; i + 1 < 9; ++i) edges.push_back({i, i + 1, 1.0, 1.0});
  const auto s = build_space(9, edges, Field::Ones(9), "path");
  Field linear(9), quad(9), bump(9);
  for (Eigen::Index x = 0; x < 9; ++x) {
    linear[x] = 0.3 * static_cast<double>(x);
    quad[x] = 0.25 * static_cast<double>(x * x);
    bump[x] = std::exp(-0.5 * std::pow(static_cast<double>(x) - 4.0, 2.0));
  }
  EXPECT_NEAR(potential_convexity(s, linear), 0.0, 1e-14);
  EXPECT_NEAR(potential_convexity(s, quad), 0.5, 1e-14);
  EXPECT_LT(potential_convexity(s, bump), 0.0);

  std::vector<std::pair<ProbMeasure, ProbMeasure>> pairs;
  for (std::size_t x = 0; x + 4 < 9; ++x) pairs.emplace_back(ProbMeasure::dirac(s, x), ProbMeasure::dirac(s, x + 4));
  const std::vector<double> ts{0.25, 0.5, 0.75};
  const double tol = 1e-9;
  auto passing = [&](const CheckReport& r, const char* key) { return r.observed[key].get<double>(); };
  const auto lin = convexity_shift_probe(s, linear, 0.0, pairs, ts, tol);
  EXPECT_NEAR(passing(lin, "largest_passing_K"), passing(lin, "largest_passing_K_unweighted"), 1e-9);
  const auto q = convexity_shift_probe(s, quad, 0.0, pairs, ts, tol);
  EXPECT_NEAR(passing(q, "largest_passing_K") - passing(q, "largest_passing_K_unweighted"), 0.5, 1e-9);
  EXPECT_TRUE(q.pass);
  const auto concave = cd_convexity_probe(s, 0.0, pairs, ts, tol, &bump);
  EXPECT_LT(concave.largest_passing_k, passing(lin, "largest_passing_K_unweighted"));
}
