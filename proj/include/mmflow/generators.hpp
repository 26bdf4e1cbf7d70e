#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "mmflow/error.hpp"
#include "mmflow/space.hpp"

// Built-in families of spaces. Every generator emits lengths, conductances and
// measure consistently, so that the graph Laplacian approximates the
// Laplace-Beltrami operator of the underlying surface or curve.

namespace mmflow {

namespace detail {

inline nlohmann::json coords_json(const std::vector<Eigen::Vector3d>& pts) {
  nlohmann::json c = nlohmann::json::array();
  for (const auto& p : pts) c.push_back({p.x(), p.y(), p.z()});
  return c;
}

inline void require(bool ok, const std::string& message) {
  if (!ok) throw Error(ErrorCode::BadParams, message);
}

using Triangle = std::array<std::size_t, 3>;

// Cotangent conductances and barycentric vertex areas from a triangulation.
// side(a, b) returns the flat side length used for the angles and areas;
// metric(a, b) the intrinsic length used for the shortest-path metric.
template <class Side, class Metric>
DiscreteMMSpace triangulated_surface(std::size_t n, const std::vector<Triangle>& triangles, Side side,
                                     Metric metric, std::string name, nlohmann::json meta) {
  std::map<std::pair<std::size_t, std::size_t>, double> weight;
  Field area = Field::Zero(static_cast<Eigen::Index>(n));
  for (const Triangle& t : triangles) {
    const double la = side(t[1], t[2]);
    const double lb = side(t[2], t[0]);
    const double lc = side(t[0], t[1]);
    const double s = 0.5 * (la + lb + lc);
    const double a = std::sqrt(std::max(0.0, s * (s - la) * (s - lb) * (s - lc)));
    require(a > 0.0, "degenerate triangle in " + name);
    for (std::size_t k = 0; k < 3; ++k) area[static_cast<Eigen::Index>(t[k])] += a / 3.0;
    // Edge opposite vertex k gets cot(angle at k) / 2 = (p^2 + q^2 - o^2) / (8 A).
    const std::array<double, 3> l{la, lb, lc};
    for (std::size_t k = 0; k < 3; ++k) {
      const double o = l[k];
      const double p = l[(k + 1) % 3];
      const double q = l[(k + 2) % 3];
      const std::size_t u = t[(k + 1) % 3];
      const std::size_t v = t[(k + 2) % 3];
      weight[{std::min(u, v), std::max(u, v)}] += (p * p + q * q - o * o) / (8.0 * a);
    }
  }
  std::vector<Edge> edges;
  edges.reserve(weight.size());
  for (auto& [key, w] : weight) {
    require(w >= -1e-12, "triangulation of " + name + " has a negative cotangent weight; refine it");
    edges.push_back({key.first, key.second, metric(key.first, key.second), std::max(0.0, w)});
  }
  return build_space(n, std::move(edges), std::move(area), std::move(name), std::move(meta));
}

}  // namespace detail

/// Circle of the given radius sampled at n equally spaced points.
inline DiscreteMMSpace cycle(std::size_t n, double radius) {
  detail::require(n >= 3, "cycle needs n >= 3");
  detail::require(radius > 0.0 && std::isfinite(radius), "cycle radius must be positive");
  const double h = 2.0 * std::numbers::pi * radius / static_cast<double>(n);
  std::vector<Edge> edges;
  std::vector<Eigen::Vector3d> pts;
  for (std::size_t i = 0; i < n; ++i) {
    edges.push_back({i, (i + 1) % n, h, 1.0 / h});
    const double theta = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n);
    pts.emplace_back(radius * std::cos(theta), radius * std::sin(theta), 0.0);
  }
  nlohmann::json meta{{"kind", "cycle"},
                      {"params", {{"n", n}, {"radius", radius}}},
                      {"dimension", 1},
                      {"coords", detail::coords_json(pts)}};
  return build_space(n, std::move(edges), Field::Constant(static_cast<Eigen::Index>(n), h),
                     "cycle(" + std::to_string(n) + ")", std::move(meta));
}

/// Subdivided icosahedron projected to the sphere of the given radius.
/// subdivision 0, 1, 2, 3 give 12, 42, 162, 642 points.
inline DiscreteMMSpace icosphere(int subdivision, double radius) {
  detail::require(subdivision >= 0 && subdivision <= 6, "icosphere subdivision must be in [0, 6]");
  detail::require(radius > 0.0 && std::isfinite(radius), "icosphere radius must be positive");
  const double g = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Eigen::Vector3d> pts{{-1, g, 0}, {1, g, 0}, {-1, -g, 0}, {1, -g, 0}, {0, -1, g}, {0, 1, g},
                                   {0, -1, -g}, {0, 1, -g}, {g, 0, -1}, {g, 0, 1}, {-g, 0, -1}, {-g, 0, 1}};
  for (auto& p : pts) p.normalize();
  std::vector<detail::Triangle> faces{{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                                      {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                                      {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                                      {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (int level = 0; level < subdivision; ++level) {
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> midpoint;
    auto mid = [&](std::size_t a, std::size_t b) {
      auto key = std::make_pair(std::min(a, b), std::max(a, b));
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      pts.push_back((pts[a] + pts[b]).normalized());
      midpoint.emplace(key, pts.size() - 1);
      return pts.size() - 1;
    };
    std::vector<detail::Triangle> next;
    next.reserve(faces.size() * 4);
    for (const auto& f : faces) {
      const std::size_t ab = mid(f[0], f[1]);
      const std::size_t bc = mid(f[1], f[2]);
      const std::size_t ca = mid(f[2], f[0]);
      next.push_back({f[0], ab, ca});
      next.push_back({f[1], bc, ab});
      next.push_back({f[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    faces = std::move(next);
  }
  for (auto& p : pts) p *= radius;
  auto chord = [&](std::size_t a, std::size_t b) { return (pts[a] - pts[b]).norm(); };
  auto arc = [&](std::size_t a, std::size_t b) {
    const double c = std::clamp(pts[a].dot(pts[b]) / (radius * radius), -1.0, 1.0);
    return radius * std::acos(c);
  };
  nlohmann::json meta{{"kind", "icosphere"},
                      {"params", {{"subdivision", subdivision}, {"radius", radius}}},
                      {"dimension", 2},
                      {"coords", detail::coords_json(pts)}};
  return detail::triangulated_surface(pts.size(), faces, chord, arc,
                                      "icosphere(" + std::to_string(subdivision) + ")", std::move(meta));
}

/// n x n periodic grid on the flat torus of the given side. Axis neighbours
/// carry the five-point Laplacian; diagonal neighbours have zero conductance
/// and only shorten the metric toward the Euclidean one.
inline DiscreteMMSpace flat_torus(std::size_t n, double side = 1.0) {
  detail::require(n >= 3, "flat_torus needs n >= 3");
  detail::require(side > 0.0 && std::isfinite(side), "flat_torus side must be positive");
  const double h = side / static_cast<double>(n);
  auto id = [n](std::size_t i, std::size_t j) { return (i % n) * n + (j % n); };
  std::vector<Edge> edges;
  std::vector<Eigen::Vector3d> pts(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      pts[id(i, j)] = Eigen::Vector3d(static_cast<double>(i) * h, static_cast<double>(j) * h, 0.0);
      edges.push_back({id(i, j), id(i + 1, j), h, 1.0});
      edges.push_back({id(i, j), id(i, j + 1), h, 1.0});
      edges.push_back({id(i, j), id(i + 1, j + 1), h * std::numbers::sqrt2, 0.0});
      edges.push_back({id(i + 1, j), id(i, j + 1), h * std::numbers::sqrt2, 0.0});
    }
  }
  nlohmann::json meta{{"kind", "flat_torus"},
                      {"params", {{"n", n}, {"side", side}}},
                      {"dimension", 2},
                      {"coords", detail::coords_json(pts)}};
  return build_space(n * n, std::move(edges), Field::Constant(static_cast<Eigen::Index>(n * n), h * h),
                     "flat_torus(" + std::to_string(n) + ")", std::move(meta));
}

/// Double cone: two flat cones of total angle `total_angle` and slant radius
/// `radius` glued along their rims. This is the boundary of a convex body for
/// total_angle <= 2 pi. The apexes get their barycentric cell area.
inline DiscreteMMSpace cone(double total_angle, std::size_t n_r, std::size_t n_theta, double radius = 1.0) {
  detail::require(total_angle > 0.0 && total_angle <= 2.0 * std::numbers::pi + 1e-12,
                  "cone total angle must lie in (0, 2 pi]");
  detail::require(n_r >= 1 && n_theta >= 3, "cone needs n_r >= 1 and n_theta >= 3");
  detail::require(radius > 0.0 && std::isfinite(radius), "cone radius must be positive");
  // Polar coordinates (r, phi) in the developed cone; ring index k in
  // [0, 2 n_r] with k = 0 the top apex, k = n_r the rim, k = 2 n_r the bottom apex.
  struct Polar {
    double r;
    double phi;
    int side;  // +1 top sheet, -1 bottom sheet, 0 rim
  };
  std::vector<Polar> polar;
  std::vector<std::vector<std::size_t>> ring(2 * n_r + 1);
  const double dphi = total_angle / static_cast<double>(n_theta);
  polar.push_back({0.0, 0.0, 1});
  ring[0] = {0};
  for (std::size_t k = 1; k < 2 * n_r; ++k) {
    const std::size_t kk = k <= n_r ? k : 2 * n_r - k;
    const double r = radius * static_cast<double>(kk) / static_cast<double>(n_r);
    for (std::size_t j = 0; j < n_theta; ++j) {
      ring[k].push_back(polar.size());
      polar.push_back({r, static_cast<double>(j) * dphi, k < n_r ? 1 : (k == n_r ? 0 : -1)});
    }
  }
  ring[2 * n_r] = {polar.size()};
  polar.push_back({0.0, 0.0, -1});

  std::vector<detail::Triangle> tris;
  for (std::size_t k = 0; k < 2 * n_r; ++k) {
    for (std::size_t j = 0; j < n_theta; ++j) {
      const std::size_t j1 = (j + 1) % n_theta;
      if (k == 0) {
        tris.push_back({ring[0][0], ring[1][j], ring[1][j1]});
      } else if (k + 1 == 2 * n_r) {
        tris.push_back({ring[k][j], ring[k + 1][0], ring[k][j1]});
      } else {
        tris.push_back({ring[k][j], ring[k + 1][j], ring[k + 1][j1]});
        tris.push_back({ring[k][j], ring[k + 1][j1], ring[k][j1]});
      }
    }
  }
  // Within one developed sector the intrinsic distance is planar.
  auto len = [&](std::size_t a, std::size_t b) {
    const Polar& p = polar[a];
    const Polar& q = polar[b];
    double dp = std::fabs(p.phi - q.phi);
    dp = std::min(dp, total_angle - dp);
    if (p.r == 0.0 || q.r == 0.0) dp = 0.0;
    return std::sqrt(std::max(0.0, p.r * p.r + q.r * q.r - 2.0 * p.r * q.r * std::cos(dp)));
  };
  const double ratio = total_angle / (2.0 * std::numbers::pi);
  const double slope = std::sqrt(std::max(0.0, 1.0 - ratio * ratio));
  std::vector<Eigen::Vector3d> pts;
  for (const Polar& p : polar) {
    const double rho = p.r * ratio;
    const double z = (radius - p.r) * slope * static_cast<double>(p.side);
    const double angle = p.phi / ratio;
    pts.emplace_back(rho * std::cos(angle), rho * std::sin(angle), z);
  }
  nlohmann::json meta{{"kind", "cone"},
                      {"params", {{"total_angle", total_angle}, {"n_r", n_r}, {"n_theta", n_theta}, {"radius", radius}}},
                      {"dimension", 2},
                      {"coords", detail::coords_json(pts)}};
  return detail::triangulated_surface(polar.size(), tris, len, len, "cone", std::move(meta));
}

/// Surface of the cube [0, side]^3 with n x n cells per face; points are cell
/// centres and neighbouring cells (also across cube edges) are joined.
inline DiscreteMMSpace cube_boundary(std::size_t n_per_face, double side = 1.0) {
  detail::require(n_per_face >= 1, "cube_boundary needs n_per_face >= 1");
  detail::require(side > 0.0 && std::isfinite(side), "cube side must be positive");
  const std::size_t n = n_per_face;
  const double h = side / static_cast<double>(n);
  std::vector<Eigen::Vector3d> pts;
  for (int axis = 0; axis < 3; ++axis) {
    for (int level = 0; level < 2; ++level) {
      for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = 0; b < n; ++b) {
          Eigen::Vector3d p;
          p[axis] = level * side;
          p[(axis + 1) % 3] = (static_cast<double>(a) + 0.5) * h;
          p[(axis + 2) % 3] = (static_cast<double>(b) + 0.5) * h;
          pts.push_back(p);
        }
      }
    }
  }
  // Same-face neighbours sit at Euclidean distance h, neighbours across a cube
  // edge at h / sqrt(2); every other pair is farther apart.
  std::vector<Edge> edges;
  for (std::size_t x = 0; x < pts.size(); ++x) {
    for (std::size_t y = x + 1; y < pts.size(); ++y) {
      const double d = (pts[x] - pts[y]).norm();
      if (std::fabs(d - h) < 1e-9 * h || std::fabs(d - h / std::numbers::sqrt2) < 1e-9 * h)
        edges.push_back({x, y, h, 1.0});
    }
  }
  nlohmann::json meta{{"kind", "cube_boundary"},
                      {"params", {{"n_per_face", n}, {"side", side}}},
                      {"dimension", 2},
                      {"coords", detail::coords_json(pts)}};
  const std::size_t count = pts.size();
  return build_space(count, std::move(edges), Field::Constant(static_cast<Eigen::Index>(count), h * h),
                     "cube_boundary(" + std::to_string(n) + ")", std::move(meta));
}

/// Two points at distance 1 joined by a unit conductance, unit masses.
inline DiscreteMMSpace two_point() {
  nlohmann::json meta{{"kind", "two_point"}, {"params", nlohmann::json::object()}, {"dimension", 0}};
  return build_space(2, {{0, 1, 1.0, 1.0}}, Field::Ones(2), "two_point", std::move(meta));
}

namespace detail {

inline double param(const nlohmann::json& params, const char* key) {
  if (!params.contains(key) || !params[key].is_number())
    throw Error(ErrorCode::BadParams, std::string("missing numeric parameter '") + key + "'");
  return params[key].get<double>();
}

inline double param_or(const nlohmann::json& params, const char* key, double fallback) {
  if (!params.contains(key)) return fallback;
  return param(params, key);
}

inline std::size_t count_param(const nlohmann::json& params, const char* key) {
  const double v = param(params, key);
  if (!(v >= 1.0) || v != std::floor(v)) throw Error(ErrorCode::BadParams, std::string("'") + key + "' must be a positive integer");
  return static_cast<std::size_t>(v);
}

}  // namespace detail

/// Dispatches on the family name: cycle{n, radius}, icosphere{subdivision,
/// radius}, flat_torus{n, side}, cone{total_angle, n_r, n_theta, radius},
/// cube_boundary{n_per_face, side}, two_point{}.
inline DiscreteMMSpace generate(std::string_view kind, const nlohmann::json& params) {
  using detail::count_param;
  using detail::param;
  using detail::param_or;
  if (kind == "cycle") return cycle(count_param(params, "n"), param_or(params, "radius", 1.0));
  if (kind == "icosphere")
    return icosphere(static_cast<int>(param(params, "subdivision")), param_or(params, "radius", 1.0));
  if (kind == "flat_torus") return flat_torus(count_param(params, "n"), param_or(params, "side", 1.0));
  if (kind == "cone")
    return cone(param(params, "total_angle"), count_param(params, "n_r"), count_param(params, "n_theta"),
                param_or(params, "radius", 1.0));
  if (kind == "cube_boundary") return cube_boundary(count_param(params, "n_per_face"), param_or(params, "side", 1.0));
  if (kind == "two_point") return two_point();
  throw Error(ErrorCode::UnknownKind, "unknown space family '" + std::string(kind) + "'");
}

}  // namespace mmflow
