#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "mmflow/error.hpp"

namespace mmflow {

struct TransportSolution {
  double cost = 0.0;
  Eigen::MatrixXd plan;  // supply x demand
  Eigen::VectorXd u;     // u_i + v_j <= c_ij, equality on the support
  Eigen::VectorXd v;
  std::size_t pivots = 0;
};

/// Primal network simplex for the balanced transportation problem
///   min sum c_ij pi_ij  s.t.  pi 1 = a, pi^T 1 = b, pi >= 0
/// with strictly positive a and b. Uses an artificial root with big-M arcs,
/// block-search pricing and a strongly feasible spanning tree (which rules out
/// cycling on degenerate pivots).
class NetworkSimplex {
 public:
  NetworkSimplex(const Eigen::MatrixXd& cost, const Eigen::VectorXd& a, const Eigen::VectorXd& b)
      : c_(cost), a_(a), b_(b), s_(static_cast<std::size_t>(a.size())), t_(static_cast<std::size_t>(b.size())) {}

  TransportSolution solve() {
    init();
    std::size_t pivots = 0;
    const std::size_t cap = 200 * (num_nodes_ + 10) * (num_nodes_ + 10);
    while (true) {
      const long in = find_entering();
      if (in < 0) break;
      pivot(static_cast<std::size_t>(in));
      if (++pivots > cap) throw Error(ErrorCode::SolverFailure, "network simplex exceeded its pivot budget");
    }
    for (std::size_t k = 0; k < s_ + t_; ++k) {
      if (flow_[real_arcs_ + k] > 1e-12 * total_)
        throw Error(ErrorCode::SolverFailure, "transport problem left flow on an artificial arc");
    }
    TransportSolution out;
    out.pivots = pivots;
    out.plan = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(s_), static_cast<Eigen::Index>(t_));
    for (std::size_t i = 0; i < s_; ++i) {
      for (std::size_t j = 0; j < t_; ++j) {
        const double f = flow_[i * t_ + j];
        if (f > 0.0) {
          out.plan(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = f;
          out.cost += f * c_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        }
      }
    }
    out.u.resize(static_cast<Eigen::Index>(s_));
    out.v.resize(static_cast<Eigen::Index>(t_));
    for (std::size_t i = 0; i < s_; ++i) out.u[static_cast<Eigen::Index>(i)] = -pi_[i];
    for (std::size_t j = 0; j < t_; ++j) out.v[static_cast<Eigen::Index>(j)] = pi_[s_ + j];
    return out;
  }

 private:
  static constexpr int kUp = 1;
  static constexpr int kDown = -1;

  std::size_t src(std::size_t arc) const {
    if (arc < real_arcs_) return arc / t_;
    const std::size_t k = arc - real_arcs_;
    return k < s_ ? k : root_;
  }
  std::size_t tgt(std::size_t arc) const {
    if (arc < real_arcs_) return s_ + arc % t_;
    const std::size_t k = arc - real_arcs_;
    return k < s_ ? root_ : k;
  }
  double arc_cost(std::size_t arc) const {
    if (arc < real_arcs_) return c_(static_cast<Eigen::Index>(arc / t_), static_cast<Eigen::Index>(arc % t_));
    return art_cost_;
  }

  void init() {
    num_nodes_ = s_ + t_ + 1;
    root_ = s_ + t_;
    real_arcs_ = s_ * t_;
    max_cost_ = 0.0;
    for (Eigen::Index i = 0; i < c_.rows(); ++i)
      for (Eigen::Index j = 0; j < c_.cols(); ++j) max_cost_ = std::max(max_cost_, std::fabs(c_(i, j)));
    art_cost_ = (max_cost_ + 1.0) * static_cast<double>(num_nodes_);
    eps_ = std::max(1e-12 * max_cost_, 64.0 * std::numeric_limits<double>::epsilon() * art_cost_);
    total_ = a_.sum();

    flow_.assign(real_arcs_ + s_ + t_, 0.0);
    tree_arcs_.clear();
    // Artificial arcs: supply i -> root, root -> demand j, both carrying the
    // node's full supply, so every tree arc has positive flow initially.
    for (std::size_t i = 0; i < s_; ++i) {
      flow_[real_arcs_ + i] = a_[static_cast<Eigen::Index>(i)];
      tree_arcs_.push_back(real_arcs_ + i);
    }
    for (std::size_t j = 0; j < t_; ++j) {
      flow_[real_arcs_ + s_ + j] = b_[static_cast<Eigen::Index>(j)];
      tree_arcs_.push_back(real_arcs_ + s_ + j);
    }
    block_ = std::max<std::size_t>(10, static_cast<std::size_t>(std::sqrt(static_cast<double>(real_arcs_))));
    next_arc_ = 0;
    rebuild();
  }

  // Recomputes parent, entering arc, orientation, depth and potentials from
  // the current set of tree arcs by a depth-first walk from the root.
  void rebuild() {
    std::vector<std::size_t> degree(num_nodes_ + 1, 0);
    for (std::size_t arc : tree_arcs_) {
      ++degree[src(arc) + 1];
      ++degree[tgt(arc) + 1];
    }
    for (std::size_t k = 0; k < num_nodes_; ++k) degree[k + 1] += degree[k];
    adj_.assign(degree.back(), 0);
    std::vector<std::size_t> fill(degree.begin(), degree.end() - 1);
    for (std::size_t arc : tree_arcs_) {
      adj_[fill[src(arc)]++] = arc;
      adj_[fill[tgt(arc)]++] = arc;
    }
    parent_.assign(num_nodes_, num_nodes_);
    pred_.assign(num_nodes_, 0);
    dir_.assign(num_nodes_, 0);
    depth_.assign(num_nodes_, 0);
    pi_.assign(num_nodes_, 0.0);
    std::vector<std::size_t> stack{root_};
    parent_[root_] = root_;
    while (!stack.empty()) {
      const std::size_t u = stack.back();
      stack.pop_back();
      for (std::size_t k = degree[u]; k < degree[u + 1]; ++k) {
        const std::size_t arc = adj_[k];
        const std::size_t w = src(arc) == u ? tgt(arc) : src(arc);
        if (parent_[w] != num_nodes_) continue;
        parent_[w] = u;
        pred_[w] = arc;
        depth_[w] = depth_[u] + 1;
        // Reduced cost c + pi[src] - pi[tgt] vanishes on tree arcs.
        if (src(arc) == w) {
          dir_[w] = kUp;
          pi_[w] = pi_[u] - arc_cost(arc);
        } else {
          dir_[w] = kDown;
          pi_[w] = pi_[u] + arc_cost(arc);
        }
        stack.push_back(w);
      }
    }
  }

  double reduced(std::size_t arc) const { return arc_cost(arc) + pi_[src(arc)] - pi_[tgt(arc)]; }

  long find_entering() {
    double best = 0.0;
    long best_arc = -1;
    std::size_t seen = 0;
    for (std::size_t step = 0; step < real_arcs_; ++step) {
      const std::size_t arc = next_arc_;
      next_arc_ = next_arc_ + 1 == real_arcs_ ? 0 : next_arc_ + 1;
      const double r = reduced(arc);
      if (r < best) {
        best = r;
        best_arc = static_cast<long>(arc);
      }
      if (++seen == block_) {
        if (best < -eps_) return best_arc;
        seen = 0;
      }
    }
    return best < -eps_ ? best_arc : -1;
  }

  void pivot(std::size_t in) {
    const std::size_t first = src(in);
    const std::size_t second = tgt(in);
    std::size_t u = first;
    std::size_t w = second;
    while (u != w) {
      if (depth_[u] > depth_[w]) {
        u = parent_[u];
      } else if (depth_[w] > depth_[u]) {
        w = parent_[w];
      } else {
        u = parent_[u];
        w = parent_[w];
      }
    }
    const std::size_t join = u;

    // Flow is pushed along in (first -> second), then second -> join -> first.
    constexpr double inf = std::numeric_limits<double>::infinity();
    double delta = inf;
    std::size_t out_node = num_nodes_;
    for (std::size_t x = first; x != join; x = parent_[x]) {
      const double d = dir_[x] == kUp ? flow_[pred_[x]] : inf;
      if (d < delta) {
        delta = d;
        out_node = x;
      }
    }
    for (std::size_t x = second; x != join; x = parent_[x]) {
      const double d = dir_[x] == kDown ? flow_[pred_[x]] : inf;
      if (d <= delta) {
        delta = d;
        out_node = x;
      }
    }
    if (out_node == num_nodes_ || !std::isfinite(delta)) throw Error(ErrorCode::SolverFailure, "unbounded pivot");

    if (delta > 0.0) {
      flow_[in] += delta;
      for (std::size_t x = first; x != join; x = parent_[x]) flow_[pred_[x]] -= dir_[x] * delta;
      for (std::size_t x = second; x != join; x = parent_[x]) flow_[pred_[x]] += dir_[x] * delta;
    }
    const std::size_t out_arc = pred_[out_node];
    flow_[out_arc] = 0.0;
    *std::find(tree_arcs_.begin(), tree_arcs_.end(), out_arc) = in;
    rebuild();
  }

  Eigen::MatrixXd c_;
  Eigen::VectorXd a_;
  Eigen::VectorXd b_;
  std::size_t s_;
  std::size_t t_;
  std::size_t num_nodes_ = 0;
  std::size_t root_ = 0;
  std::size_t real_arcs_ = 0;
  double max_cost_ = 0.0;
  double art_cost_ = 0.0;
  double eps_ = 0.0;
  double total_ = 0.0;
  std::size_t block_ = 10;
  std::size_t next_arc_ = 0;
  std::vector<double> flow_;
  std::vector<std::size_t> tree_arcs_;
  std::vector<std::size_t> adj_;
  std::vector<std::size_t> parent_;
  std::vector<std::size_t> pred_;
  std::vector<int> dir_;
  std::vector<std::size_t> depth_;
  std::vector<double> pi_;
};

}  // namespace mmflow
