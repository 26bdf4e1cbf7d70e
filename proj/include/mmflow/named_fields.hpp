#pragma once

#include <cmath>
#include <cstdlib>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "mmflow/error.hpp"
#include "mmflow/space.hpp"
#include "mmflow/space_io.hpp"

// Named initial densities and potentials, so runs can be described by
// configuration alone.

namespace mmflow {

namespace detail {

// Angular coordinate of each point: atan2 of the stored coordinates, or
// 2 pi i / n when the space carries none.
inline Field angle_coordinate(const DiscreteMMSpace& space) {
  const auto n = static_cast<Eigen::Index>(space.size());
  Field theta(n);
  const bool has_coords = space.coords().rows() == n;
  for (Eigen::Index x = 0; x < n; ++x)
    theta[x] = has_coords ? std::atan2(space.coords()(x, 1), space.coords()(x, 0))
                          : 2.0 * std::numbers::pi * static_cast<double>(x) / static_cast<double>(n);
  return theta;
}

inline double parse_number(const std::string& text, const std::string& context) {
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (text.empty() || end == nullptr || *end != '\0' || !std::isfinite(v))
    throw Error(ErrorCode::BadParams, "cannot read a number from '" + text + "' in " + context);
  return v;
}

inline Field parse_inline_vector(const DiscreteMMSpace& space, const std::string& list, const std::string& context) {
  std::vector<double> values;
  std::stringstream ss(list);
  std::string cell;
  while (std::getline(ss, cell, ',')) values.push_back(parse_number(cell, context));
  if (values.size() != space.size())
    throw Error(ErrorCode::SpaceMismatch, context + " lists " + std::to_string(values.size()) + " values for " +
                                              std::to_string(space.size()) + " points");
  return Eigen::Map<const Field>(values.data(), static_cast<Eigen::Index>(values.size()));
}

inline std::pair<std::string, std::string> split_spec(const std::string& spec) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos) return {spec, ""};
  return {spec.substr(0, colon), spec.substr(colon + 1)};
}

}  // namespace detail

/// zero | cos:A | sin:A | quad:A | vec:v0,v1,... | file:path.
/// cos and sin use the angular coordinate; quad uses A x^2 with x the first
/// coordinate.
inline Field named_potential(const DiscreteMMSpace& space, const std::string& spec) {
  const auto [name, arg] = detail::split_spec(spec);
  const auto n = static_cast<Eigen::Index>(space.size());
  if (name == "zero" || name.empty()) return Field::Zero(n);
  if (name == "vec") return detail::parse_inline_vector(space, arg, "potential");
  if (name == "file") {
    Field v = load_vector(arg);
    require_same_size(space, v, "potential file");
    return v;
  }
  const double a = arg.empty() ? 1.0 : detail::parse_number(arg, "potential '" + spec + "'");
  if (name == "cos") return a * detail::angle_coordinate(space).array().cos().matrix();
  if (name == "sin") return a * detail::angle_coordinate(space).array().sin().matrix();
  if (name == "quad") {
    if (space.coords().rows() != n) throw Error(ErrorCode::BadParams, "quad potential needs coordinates");
    return a * space.coords().col(0).cwiseAbs2();
  }
  throw Error(ErrorCode::BadParams, "unknown potential '" + spec + "'");
}

/// uniform | cos | bump | gibbs | dirac:i | vec:... | file:path, as a density
/// against m (not normalized; ProbMeasure::from_density normalizes).
/// cos is 1 + 0.5 cos(theta); bump is 1 + 4 exp(-d(x0, x)^2 / (2 s^2)) with
/// s = 0.1 diam; gibbs is exp(-V).
inline Field named_density(const DiscreteMMSpace& space, const std::string& spec, const Field* potential = nullptr) {
  const auto [name, arg] = detail::split_spec(spec);
  const auto n = static_cast<Eigen::Index>(space.size());
  if (name == "uniform") return Field::Ones(n);
  if (name == "cos") return (1.0 + 0.5 * detail::angle_coordinate(space).array().cos()).matrix();
  if (name == "bump") {
    const double s = 0.1 * space.diam();
    return (1.0 + 4.0 * (-space.dist().row(0).array().square() / (2.0 * s * s)).exp()).matrix().transpose();
  }
  if (name == "gibbs") {
    if (potential == nullptr) return Field::Ones(n);
    return (-potential->array()).exp().matrix();
  }
  if (name == "dirac") {
    const double idx = detail::parse_number(arg, "dirac index");
    if (idx < 0.0 || idx != std::floor(idx) || idx >= static_cast<double>(space.size()))
      throw Error(ErrorCode::BadParams, "dirac index out of range");
    Field rho = Field::Zero(n);
    rho[static_cast<Eigen::Index>(idx)] = 1.0;
    return rho;
  }
  if (name == "vec") return detail::parse_inline_vector(space, arg, "density");
  if (name == "file") {
    Field rho = load_vector(arg);
    require_same_size(space, rho, "density file");
    return rho;
  }
  throw Error(ErrorCode::BadParams, "unknown initial density '" + spec + "'");
}

}  // namespace mmflow
