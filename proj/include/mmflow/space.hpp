#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <queue>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "mmflow/error.hpp"

namespace mmflow {

using Field = Eigen::VectorXd;

struct Edge {
  std::size_t i = 0;
  std::size_t j = 0;
  double length = 0.0;
  double conductance = 0.0;
};

struct Neighbor {
  std::size_t point;
  double length;
  double conductance;
};

/// Finite metric-measure space: a connected weighted graph with edge lengths
/// (for the shortest-path metric), conductances (for the Dirichlet form) and a
/// strictly positive reference measure on the points.
///
/// Instances are immutable once built and are produced by build_space(), the
/// generators in generators.hpp, or load_space().
class DiscreteMMSpace {
 public:
  DiscreteMMSpace() = default;

  std::size_t size() const noexcept { return n_; }
  const std::string& name() const noexcept { return name_; }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  const Eigen::MatrixXd& dist() const noexcept { return dist_; }
  double dist(std::size_t x, std::size_t y) const { return dist_(x, y); }
  const Field& measure() const noexcept { return measure_; }
  double total_measure() const noexcept { return measure_.sum(); }
  double diam() const noexcept { return diam_; }
  const nlohmann::json& metadata() const noexcept { return metadata_; }

  /// Intrinsic dimension used when rescaling the metric (0 for abstract graphs).
  int dimension() const { return metadata_.value("dimension", 0); }

  /// Largest edge length among conducting edges: the mesh size h.
  double mesh_size() const noexcept { return mesh_size_; }

  std::span<const Neighbor> neighbors(std::size_t x) const {
    return {adjacency_.data() + offsets_[x], offsets_[x + 1] - offsets_[x]};
  }

  /// Embedding coordinates carried in the metadata, n x 3; empty if absent.
  const Eigen::MatrixXd& coords() const noexcept { return coords_; }

  /// Deterministic shortest path from x to y, both endpoints included.
  std::vector<std::size_t> shortest_path(std::size_t x, std::size_t y) const {
    std::vector<std::size_t> path;
    std::size_t v = y;
    path.push_back(v);
    while (v != x) {
      v = static_cast<std::size_t>(pred_[x * n_ + v]);
      path.push_back(v);
    }
    std::reverse(path.begin(), path.end());
    return path;
  }

 private:
  friend DiscreteMMSpace build_space(std::size_t, std::vector<Edge>, Field, std::string,
                                     nlohmann::json);

  std::string name_;
  std::size_t n_ = 0;
  std::vector<Edge> edges_;
  Field measure_;
  Eigen::MatrixXd dist_;
  std::vector<std::int32_t> pred_;
  std::vector<std::size_t> offsets_;
  std::vector<Neighbor> adjacency_;
  double diam_ = 0.0;
  double mesh_size_ = 0.0;
  nlohmann::json metadata_ = nlohmann::json::object();
  Eigen::MatrixXd coords_;
};

namespace detail {

// Single-source Dijkstra. Ties within a relative 1e-12 band go to the smaller
// predecessor index so that geodesics are reproducible.
inline void dijkstra(std::size_t source, std::size_t n, const std::vector<std::size_t>& offsets,
                     const std::vector<Neighbor>& adjacency, double* dist_row,
                     std::int32_t* pred_row) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::fill(dist_row, dist_row + n, inf);
  std::fill(pred_row, pred_row + n, -1);
  std::vector<char> settled(n, 0);
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
  dist_row[source] = 0.0;
  pred_row[source] = static_cast<std::int32_t>(source);
  queue.emplace(0.0, source);
  while (!queue.empty()) {
    auto [d, u] = queue.top();
    queue.pop();
    if (settled[u]) continue;
    settled[u] = 1;
    for (std::size_t k = offsets[u]; k < offsets[u + 1]; ++k) {
      const Neighbor& nb = adjacency[k];
      const std::size_t v = nb.point;
      if (settled[v]) continue;
      const double candidate = d + nb.length;
      const double band = 1e-12 * std::max(1.0, candidate);
      if (candidate < dist_row[v] - band) {
        dist_row[v] = candidate;
        pred_row[v] = static_cast<std::int32_t>(u);
        queue.emplace(candidate, v);
      } else if (candidate <= dist_row[v] + band && static_cast<std::int32_t>(u) < pred_row[v]) {
        pred_row[v] = static_cast<std::int32_t>(u);
      }
    }
  }
}

}  // namespace detail

/// Validates the inputs, merges symmetric duplicates and computes all-pairs
/// shortest paths.
///
/// Edges may be listed once or in both orientations; two listings of the same
/// unordered pair must carry identical length and conductance.
inline DiscreteMMSpace build_space(std::size_t n, std::vector<Edge> edges, Field measure,
                                   std::string name = "", nlohmann::json metadata = {}) {
  if (n == 0) throw Error(ErrorCode::BadParams, "space must contain at least one point");
  if (static_cast<std::size_t>(measure.size()) != n)
    throw Error(ErrorCode::BadParams, "measure length does not match point count");
  for (Eigen::Index i = 0; i < measure.size(); ++i) {
    if (!(measure[i] > 0.0) || !std::isfinite(measure[i]))
      throw Error(ErrorCode::NonpositiveMeasure, "measure entry " + std::to_string(i) + " is not positive");
  }

  std::map<std::pair<std::size_t, std::size_t>, Edge> merged;
  for (const Edge& e : edges) {
    if (e.i >= n || e.j >= n) throw Error(ErrorCode::BadParams, "edge endpoint out of range");
    if (e.i == e.j) throw Error(ErrorCode::BadParams, "self-loop at point " + std::to_string(e.i));
    if (!(e.length > 0.0) || !std::isfinite(e.length))
      throw Error(ErrorCode::NonpositiveLength, "edge (" + std::to_string(e.i) + "," + std::to_string(e.j) + ")");
    if (!(e.conductance >= 0.0) || !std::isfinite(e.conductance))
      throw Error(ErrorCode::BadParams, "negative conductance on edge (" + std::to_string(e.i) + "," + std::to_string(e.j) + ")");
    Edge canonical{std::min(e.i, e.j), std::max(e.i, e.j), e.length, e.conductance};
    auto key = std::make_pair(canonical.i, canonical.j);
    auto it = merged.find(key);
    if (it == merged.end()) {
      merged.emplace(key, canonical);
    } else if (it->second.length != canonical.length || it->second.conductance != canonical.conductance) {
      throw Error(ErrorCode::BadParams, "asymmetric duplicate edge (" + std::to_string(key.first) + "," +
                                            std::to_string(key.second) + ")");
    }
  }

  DiscreteMMSpace s;
  s.name_ = std::move(name);
  s.n_ = n;
  s.measure_ = std::move(measure);
  s.metadata_ = metadata.is_object() ? std::move(metadata) : nlohmann::json::object();
  s.edges_.reserve(merged.size());
  for (auto& [key, e] : merged) s.edges_.push_back(e);

  std::vector<std::size_t> degree(n, 0);
  for (const Edge& e : s.edges_) {
    ++degree[e.i];
    ++degree[e.j];
    if (e.conductance > 0.0) s.mesh_size_ = std::max(s.mesh_size_, e.length);
  }
  s.offsets_.assign(n + 1, 0);
  for (std::size_t x = 0; x < n; ++x) s.offsets_[x + 1] = s.offsets_[x] + degree[x];
  s.adjacency_.resize(s.offsets_[n]);
  std::vector<std::size_t> fill(s.offsets_.begin(), s.offsets_.end() - 1);
  for (const Edge& e : s.edges_) {
    s.adjacency_[fill[e.i]++] = {e.j, e.length, e.conductance};
    s.adjacency_[fill[e.j]++] = {e.i, e.length, e.conductance};
  }
  for (std::size_t x = 0; x < n; ++x) {
    std::sort(s.adjacency_.begin() + static_cast<std::ptrdiff_t>(s.offsets_[x]),
              s.adjacency_.begin() + static_cast<std::ptrdiff_t>(s.offsets_[x + 1]),
              [](const Neighbor& a, const Neighbor& b) { return a.point < b.point; });
  }

  // Row-major storage of all single-source runs; dist is symmetric so the
  // column-major Eigen matrix reads the same.
  s.dist_.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  s.pred_.resize(n * n);
  std::vector<double> row(n);
  for (std::size_t x = 0; x < n; ++x) {
    detail::dijkstra(x, n, s.offsets_, s.adjacency_, row.data(), s.pred_.data() + x * n);
    for (std::size_t y = 0; y < n; ++y) {
      if (!std::isfinite(row[y]))
        throw Error(ErrorCode::DisconnectedGraph,
                    "no path between points " + std::to_string(x) + " and " + std::to_string(y));
      s.dist_(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y)) = row[y];
    }
  }
  // Symmetrize the rounding-level differences between the two directions.
  for (std::size_t x = 0; x < n; ++x) {
    for (std::size_t y = x + 1; y < n; ++y) {
      const auto xi = static_cast<Eigen::Index>(x);
      const auto yi = static_cast<Eigen::Index>(y);
      const double d = std::min(s.dist_(xi, yi), s.dist_(yi, xi));
      s.dist_(xi, yi) = d;
      s.dist_(yi, xi) = d;
    }
  }
  s.diam_ = s.dist_.maxCoeff();

  if (s.metadata_.contains("coords")) {
    const auto& c = s.metadata_["coords"];
    if (!c.is_array() || c.size() != n) throw Error(ErrorCode::SchemaViolation, "coords must list one row per point");
    s.coords_.resize(static_cast<Eigen::Index>(n), 3);
    s.coords_.setZero();
    for (std::size_t x = 0; x < n; ++x) {
      const auto& r = c[x];
      if (!r.is_array() || r.size() > 3) throw Error(ErrorCode::SchemaViolation, "coords rows must have at most 3 entries");
      for (std::size_t k = 0; k < r.size(); ++k)
        s.coords_(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(k)) = r[k].get<double>();
    }
  }
  return s;
}

/// The scaled space (X, c d): lengths times c, measure times c^dim and
/// conductances times c^(dim-2), so the discrete Laplacian rescales like the
/// continuum one.
inline DiscreteMMSpace scaled(const DiscreteMMSpace& space, double c) {
  if (!(c > 0.0)) throw Error(ErrorCode::BadParams, "scale factor must be positive");
  const int dim = space.dimension();
  std::vector<Edge> edges = space.edges();
  for (Edge& e : edges) {
    e.length *= c;
    e.conductance *= std::pow(c, dim - 2);
  }
  Field measure = space.measure() * std::pow(c, dim);
  nlohmann::json meta = space.metadata();
  if (meta.contains("coords")) {
    for (auto& row : meta["coords"])
      for (auto& v : row) v = v.get<double>() * c;
  }
  if (meta.contains("params") && meta["params"].contains("radius"))
    meta["params"]["radius"] = meta["params"]["radius"].get<double>() * c;
  return build_space(space.size(), std::move(edges), std::move(measure), space.name(), std::move(meta));
}

inline void require_same_size(const DiscreteMMSpace& space, const Field& f, const char* what) {
  if (static_cast<std::size_t>(f.size()) != space.size())
    throw Error(ErrorCode::SpaceMismatch, std::string(what) + " has length " + std::to_string(f.size()) +
                                              " but the space has " + std::to_string(space.size()) + " points");
}

}  // namespace mmflow
