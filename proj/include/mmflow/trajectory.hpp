#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mmflow/dirichlet.hpp"
#include "mmflow/entropy.hpp"
#include "mmflow/error.hpp"
#include "mmflow/wasserstein.hpp"

namespace mmflow {

/// Fills entropy (Ent, or Ent^V when a potential is given), Fisher
/// information and, if requested, central metric-derivative estimates.
inline void fill_diagnostics(const DiscreteMMSpace& space, FlowTrajectory& traj, const Field* potential = nullptr,
                             bool with_speed = true) {
  const std::size_t n = traj.size();
  traj.entropy.assign(n, 0.0);
  traj.fisher.assign(n, 0.0);
  traj.speed.assign(n, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t k = 0; k < n; ++k) {
    traj.entropy[k] = potential != nullptr ? ent_v(space, traj.densities[k], *potential) : ent(space, traj.densities[k]);
    traj.fisher[k] = fisher(space, traj.densities[k]);
  }
  if (with_speed)
    for (std::size_t k = 1; k + 1 < n; ++k) traj.speed[k] = metric_derivative(space, traj, k);
}

/// Exact heat flow sampled at the given times.
inline FlowTrajectory heat_trajectory(const DiscreteMMSpace& space, const SpectralData& spec, const Field& rho0,
                                      const std::vector<double>& times, bool with_speed = true) {
  FlowTrajectory traj;
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (k > 0 && !(times[k] > times[k - 1])) throw Error(ErrorCode::BadParams, "times must increase strictly");
    traj.times.push_back(times[k]);
    traj.densities.push_back(heat_density(space, spec, times[k], rho0));
  }
  fill_diagnostics(space, traj, nullptr, with_speed);
  return traj;
}

/// Uniform grid t0, t0 + dt, ..., up to t1 (inclusive within round-off).
inline std::vector<double> time_grid(double t0, double t1, double dt) {
  if (!(dt > 0.0) || !(t1 >= t0)) throw Error(ErrorCode::BadParams, "invalid time grid");
  std::vector<double> out;
  const auto steps = static_cast<long>(std::floor((t1 - t0) / dt + 1e-9));
  for (long k = 0; k <= steps; ++k) out.push_back(t0 + static_cast<double>(k) * dt);
  return out;
}

namespace detail {

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// CSV with header t, rho_0 .. rho_{n-1}, ent, fisher.
inline void write_trajectory_csv(const FlowTrajectory& traj, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open " + path + " for writing");
  const std::size_t n = traj.densities.empty() ? 0 : static_cast<std::size_t>(traj.densities.front().size());
  out << "t";
  for (std::size_t x = 0; x < n; ++x) out << ",rho_" << x;
  out << ",ent,fisher\n";
  for (std::size_t k = 0; k < traj.size(); ++k) {
    out << detail::fmt17(traj.times[k]);
    for (std::size_t x = 0; x < n; ++x) out << ',' << detail::fmt17(traj.densities[k][static_cast<Eigen::Index>(x)]);
    out << ',' << detail::fmt17(k < traj.entropy.size() ? traj.entropy[k] : std::nan(""));
    out << ',' << detail::fmt17(k < traj.fisher.size() ? traj.fisher[k] : std::nan("")) << '\n';
  }
  if (!out) throw Error(ErrorCode::IoFailure, "write to " + path + " failed");
}

/// Diagnostics sidecar: per-time entropy, Fisher information and metric
/// derivative (null where undefined).
inline void write_diagnostics_json(const FlowTrajectory& traj, const std::string& path) {
  auto finite_or_null = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t k = 0; k < traj.size(); ++k) {
    rows.push_back({{"t", traj.times[k]},
                    {"ent", finite_or_null(k < traj.entropy.size() ? traj.entropy[k] : std::nan(""))},
                    {"fisher", finite_or_null(k < traj.fisher.size() ? traj.fisher[k] : std::nan(""))},
                    {"metric_derivative", finite_or_null(k < traj.speed.size() ? traj.speed[k] : std::nan(""))}});
  }
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open " + path + " for writing");
  out << nlohmann::json{{"diagnostics", rows}}.dump(1) << '\n';
}

inline FlowTrajectory read_trajectory_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::SchemaViolation, path + ": empty trajectory file");
  std::vector<std::string> header;
  {
    std::string cell;
    for (char ch : line + ",") {
      if (ch == ',') {
        header.push_back(cell);
        cell.clear();
      } else if (ch != '\r') {
        cell += ch;
      }
    }
  }
  if (header.size() < 4 || header.front() != "t" || header[header.size() - 2] != "ent" || header.back() != "fisher")
    throw Error(ErrorCode::SchemaViolation, path + ": header must read t, rho_0.., ent, fisher");
  const std::size_t n = header.size() - 3;
  FlowTrajectory traj;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::string cell;
    for (char ch : line + ",") {
      if (ch == ',') {
        try {
          row.push_back(std::stod(cell));
        } catch (const std::exception&) {
          throw Error(ErrorCode::SchemaViolation, path + ": bad number '" + cell + "'");
        }
        cell.clear();
      } else if (ch != '\r') {
        cell += ch;
      }
    }
    if (row.size() != header.size()) throw Error(ErrorCode::SchemaViolation, path + ": ragged row");
    traj.times.push_back(row[0]);
    Field rho(static_cast<Eigen::Index>(n));
    for (std::size_t x = 0; x < n; ++x) rho[static_cast<Eigen::Index>(x)] = row[x + 1];
    traj.densities.push_back(rho);
    traj.entropy.push_back(row[n + 1]);
    traj.fisher.push_back(row[n + 2]);
  }
  traj.speed.assign(traj.size(), std::numeric_limits<double>::quiet_NaN());
  return traj;
}

}  // namespace mmflow
