#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>

#include <gtest/gtest.h>

#include "mmflow/comparison.hpp"
#include "mmflow/generators.hpp"
#include "mmflow/space.hpp"
#include "mmflow/space_io.hpp"

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

std::string temp_path(const std::string& leaf) {
  return (std::filesystem::temp_directory_path() / ("mmflow_test_" + leaf)).string();
}

}  // namespace

TEST(BuildSpace, TwoPointDistance) {
  const auto s = build_space(2, {{0, 1, 1.0, 1.0}}, Field::Ones(2));
  EXPECT_DOUBLE_EQ(s.dist(0, 1), 1.0);
  EXPECT_DOUBLE_EQ(s.dist(1, 0), 1.0);
  EXPECT_DOUBLE_EQ(s.diam(), 1.0);
  EXPECT_DOUBLE_EQ(s.total_measure(), 2.0);
}

TEST(BuildSpace, PathOfThree) {
  const auto s = build_space(3, {{0, 1, 1.0, 1.0}, {1, 2, 1.0, 1.0}}, Field::Ones(3));
  EXPECT_DOUBLE_EQ(s.dist(0, 2), 2.0);
  const auto path = s.shortest_path(0, 2);
  ASSERT_EQ(path.size(), 3u);
  EXPECT_EQ(path[1], 1u);
}

TEST(BuildSpace, LongEdgeIsShortcutByTwoShortOnes) {
  const auto s = build_space(3, {{0, 1, 1.0, 1.0}, {1, 2, 1.0, 1.0}, {0, 2, 3.0, 1.0}}, Field::Ones(3));
  EXPECT_DOUBLE_EQ(s.dist(0, 2), 2.0);
}

TEST(BuildSpace, RejectsBadInput) {
  EXPECT_EQ(code_of([] { build_space(3, {{0, 1, 1.0, 1.0}}, Field::Ones(3)); }), ErrorCode::DisconnectedGraph);
  EXPECT_EQ(code_of([] { build_space(2, {{0, 1, 0.0, 1.0}}, Field::Ones(2)); }), ErrorCode::NonpositiveLength);
  EXPECT_EQ(code_of([] { build_space(2, {{0, 1, 1.0, 1.0}}, Field{{1.0, -1.0}}); }), ErrorCode::NonpositiveMeasure);
}

TEST(Generators, CycleSpacing) {
  const auto s = cycle(4, 4.0 / (2.0 * std::numbers::pi));
  EXPECT_EQ(s.size(), 4u);
  EXPECT_NEAR(s.dist(0, 1), 1.0, 1e-14);
  EXPECT_NEAR(s.dist(0, 2), 2.0, 1e-14);
  EXPECT_NEAR(s.mesh_size(), 1.0, 1e-14);
  EXPECT_NEAR(s.total_measure(), 4.0, 1e-12);
}

TEST(Generators, IcosphereSizesAndArea) {
  // Area of the inscribed polyhedron approaches the sphere at second order.
  const int sizes[] = {12, 42, 162, 642};
  std::vector<double> err;
  for (int level = 0; level < 4; ++level) {
    const auto s = icosphere(level, 1.0);
    EXPECT_EQ(s.size(), static_cast<std::size_t>(sizes[level]));
    err.push_back(4.0 * std::numbers::pi - s.total_measure());
    EXPECT_GT(err.back(), 0.0);
  }
  for (std::size_t i = 1; i < err.size(); ++i) EXPECT_LT(err[i], 0.35 * err[i - 1]);
  EXPECT_NEAR(std::log2(err[2] / err[3]), 2.0, 0.1);
}

TEST(Generators, CubeBoundaryCellCount) {
  EXPECT_EQ(cube_boundary(2).size(), 24u);
  EXPECT_EQ(cube_boundary(3).size(), 54u);
  EXPECT_NEAR(cube_boundary(3).total_measure(), 6.0, 1e-12);
}

TEST(Generators, UnknownKind) {
  EXPECT_EQ(code_of([] { generate("moebius", nlohmann::json::object()); }), ErrorCode::UnknownKind);
  EXPECT_EQ(code_of([] { generate("cycle", {{"n", 2}, {"radius", 1.0}}); }), ErrorCode::BadParams);
}

TEST(Scaling, DistancesScaleLinearly) {
  const auto s = cycle(16, 1.0);
  const auto t = scaled(s, 3.0);
  for (std::size_t y = 0; y < s.size(); ++y) EXPECT_NEAR(t.dist(0, y), 3.0 * s.dist(0, y), 1e-12);
  // One-dimensional: measures scale like lengths.
  EXPECT_NEAR(t.total_measure(), 3.0 * s.total_measure(), 1e-10);
}

TEST(Comparison, EuclideanEquilateralMidpoint) {
  // Independent: vertex at (0, 0), opposite side from (1, 0) to (1/2, sqrt(3)/2).
  const Eigen::Vector2d y(1.0, 0.0);
  const Eigen::Vector2d z(0.5, std::sqrt(3.0) / 2.0);
  const double expected = (0.5 * (y + z)).norm();
  EXPECT_NEAR(comparison_distance(0.0, 1.0, 1.0, 1.0, 0.5).value, expected, 1e-14);
  EXPECT_DOUBLE_EQ(comparison_distance(0.0, 0.7, 1.1, 0.9, 0.0).value, 0.7);
  EXPECT_DOUBLE_EQ(comparison_distance(0.0, 0.7, 1.1, 0.9, 1.0).value, 0.9);
}

TEST(Comparison, SphericalAgreesWithEmbeddedTriangle) {
  // Three points on the unit sphere; sides are great-circle angles, and the
  // geodesic point is a normalized slerp.
  const Eigen::Vector3d x = Eigen::Vector3d(1.0, 0.2, 0.1).normalized();
  const Eigen::Vector3d y = Eigen::Vector3d(0.1, 1.0, 0.3).normalized();
  const Eigen::Vector3d z = Eigen::Vector3d(0.2, 0.1, 1.0).normalized();
  auto angle = [](const Eigen::Vector3d& p, const Eigen::Vector3d& q) { return std::acos(std::clamp(p.dot(q), -1.0, 1.0)); };
  const double b = angle(y, z);
  for (double t : {0.25, 0.5, 0.8}) {
    const Eigen::Vector3d g = (std::sin((1 - t) * b) * y + std::sin(t * b) * z) / std::sin(b);
    const double got = comparison_distance(1.0, angle(x, y), b, angle(z, x), t).value;
    EXPECT_NEAR(got, angle(x, g), 1e-12) << "t=" << t;
  }
}

TEST(Comparison, HyperbolicIsBelowEuclidean) {
  const double e = comparison_distance(0.0, 1.0, 1.5, 1.2, 0.5).value;
  const double h = comparison_distance(-1.0, 1.0, 1.5, 1.2, 0.5).value;
  EXPECT_LT(h, e);
}

TEST(Comparison, PerimeterTooLarge) {
  EXPECT_EQ(code_of([] { comparison_distance(1.0, 2.0, 2.0, 2.5, 0.5); }), ErrorCode::PerimeterTooLarge);
}

TEST(Comparison, FlatCycleHasNoViolations) {
  const auto s = cycle(64, 1.0);
  const auto rep = check_triangle_comparison(s, 0.0, 20000, s.mesh_size(), 7);
  EXPECT_GT(rep.samples, 0u);
  EXPECT_EQ(rep.violations, 0u);
}

TEST(SpaceIo, RoundTrip) {
  const auto s = cycle(10, 1.3);
  const std::string path = temp_path("roundtrip.json");
  save_space(s, path);
  const auto t = load_space(path);
  std::remove(path.c_str());
  ASSERT_EQ(t.size(), s.size());
  EXPECT_EQ((t.dist() - s.dist()).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ((t.measure() - s.measure()).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(t.metadata(), s.metadata());
}

TEST(SpaceIo, Malformed) {
  nlohmann::json doc = space_to_json(two_point());
  doc.erase("edges");
  EXPECT_EQ(code_of([&] { space_from_json(doc); }), ErrorCode::SchemaViolation);
  doc = space_to_json(two_point());
  doc["measure"] = {1.0, -2.0};
  EXPECT_EQ(code_of([&] { space_from_json(doc); }), ErrorCode::NonpositiveMeasure);
  EXPECT_EQ(code_of([] { load_space(temp_path("does_not_exist.json")); }), ErrorCode::IoFailure);
}
