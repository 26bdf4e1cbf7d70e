#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "mmflow/error.hpp"
#include "mmflow/space.hpp"

namespace mmflow {

struct ComparisonValue {
  double value = 0.0;
  bool degenerate = false;
};

/// Distance in the model plane M^2(k) from the vertex x~ to the point at
/// parameter t on the geodesic from y~ to z~, for a triangle with sides
/// |xy| = a, |yz| = b, |zx| = c.
///
/// Triangles with b = 0 or violating the triangle inequality are flagged as
/// degenerate and answered by linear interpolation between a and c.
inline ComparisonValue comparison_distance(double k, double a, double b, double c, double t) {
  if (!(a >= 0.0 && b >= 0.0 && c >= 0.0)) throw Error(ErrorCode::BadParams, "triangle sides must be nonnegative");
  if (!(t >= 0.0 && t <= 1.0)) throw Error(ErrorCode::BadParams, "geodesic parameter must lie in [0, 1]");
  if (k > 0.0 && a + b + c >= 2.0 * std::numbers::pi / std::sqrt(k))
    throw Error(ErrorCode::PerimeterTooLarge, "perimeter reaches 2 pi / sqrt(k)");
  if (t == 0.0) return {a, false};
  if (t == 1.0) return {c, false};
  const double slack = 1e-12 * std::max({a, b, c, 1e-300});
  if (b <= slack || a > b + c + slack || b > a + c + slack || c > a + b + slack)
    return {(1.0 - t) * a + t * c, true};

  if (k == 0.0) {
    const double d2 = (1.0 - t) * a * a + t * c * c - t * (1.0 - t) * b * b;
    return {std::sqrt(std::max(0.0, d2)), false};
  }
  const double s = std::sqrt(std::fabs(k));
  const double sa = s * a;
  const double sb = s * b;
  const double sc = s * c;
  if (k > 0.0) {
    const double cosd = (std::sin((1.0 - t) * sb) * std::cos(sa) + std::sin(t * sb) * std::cos(sc)) / std::sin(sb);
    return {std::acos(std::clamp(cosd, -1.0, 1.0)) / s, false};
  }
  const double coshd = (std::sinh((1.0 - t) * sb) * std::cosh(sa) + std::sinh(t * sb) * std::cosh(sc)) / std::sinh(sb);
  return {std::acosh(std::max(1.0, coshd)) / s, false};
}

struct ComparisonReport {
  double k = 0.0;
  std::size_t samples = 0;
  std::size_t violations = 0;
  std::size_t degenerate = 0;
  double worst_deficit = 0.0;
  double tolerance = 0.0;
  bool exhaustive = false;
};

namespace detail {

// Deficit check of one triple: returns the smallest d(x, g(t)) - d~ over the
// vertices of the discrete geodesic from y to z, or nullopt-like NaN when the
// comparison triangle does not exist.
inline double triple_deficit(const DiscreteMMSpace& space, double k, std::size_t x, std::size_t y, std::size_t z) {
  const double a = space.dist(x, y);
  const double b = space.dist(y, z);
  const double c = space.dist(z, x);
  if (k > 0.0 && a + b + c >= 2.0 * std::numbers::pi / std::sqrt(k)) return std::nan("");
  const std::vector<std::size_t> path = space.shortest_path(y, z);
  double worst = 0.0;
  for (std::size_t v : path) {
    const double t = std::clamp(space.dist(y, v) / b, 0.0, 1.0);
    const ComparisonValue model = comparison_distance(k, a, b, c, t);
    if (model.degenerate) return std::nan("");
    worst = std::min(worst, space.dist(x, v) - model.value);
  }
  return worst;
}

}  // namespace detail

/// Samples triples (x, y, z) and tests d(x, g(t)) >= d~(t) at every vertex of
/// the deterministic shortest path g from y to z. When the budget covers all
/// ordered triples of distinct points they are enumerated exhaustively.
/// Triples whose comparison triangle does not exist (perimeter too large for
/// k > 0) are skipped and counted as degenerate.
inline ComparisonReport check_triangle_comparison(const DiscreteMMSpace& space, double k, std::size_t sample_budget,
                                                  double tol, std::uint64_t seed = 0) {
  if (sample_budget < 1) throw Error(ErrorCode::BadParams, "sample budget must be at least 1");
  ComparisonReport report;
  report.k = k;
  report.tolerance = tol;
  const std::size_t n = space.size();
  if (n < 3) return report;
  auto visit = [&](std::size_t x, std::size_t y, std::size_t z) {
    ++report.samples;
    const double d = detail::triple_deficit(space, k, x, y, z);
    if (std::isnan(d)) {
      ++report.degenerate;
      return;
    }
    report.worst_deficit = std::min(report.worst_deficit, d);
    if (d < -tol) ++report.violations;
  };
  const double total = static_cast<double>(n) * static_cast<double>(n - 1) * static_cast<double>(n - 2);
  if (static_cast<double>(sample_budget) >= total) {
    report.exhaustive = true;
    for (std::size_t x = 0; x < n; ++x)
      for (std::size_t y = 0; y < n; ++y)
        for (std::size_t z = 0; z < n; ++z)
          if (x != y && y != z && x != z) visit(x, y, z);
    return report;
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  while (report.samples < sample_budget) {
    const std::size_t x = pick(rng);
    const std::size_t y = pick(rng);
    const std::size_t z = pick(rng);
    if (x == y || y == z || x == z) continue;
    visit(x, y, z);
  }
  return report;
}

}  // namespace mmflow
