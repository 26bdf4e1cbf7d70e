#pragma once

#include <cmath>
#include <string>

#include "mmflow/error.hpp"
#include "mmflow/space.hpp"

namespace mmflow {

/// Probability measure on a DiscreteMMSpace, stored both as point masses and
/// as a density against the reference measure.
class ProbMeasure {
 public:
  ProbMeasure() = default;

  /// Normalizes a nonnegative density of positive total mass.
  static ProbMeasure from_density(const DiscreteMMSpace& space, const Field& density) {
    require_same_size(space, density, "density");
    return from_masses(space, density.cwiseProduct(space.measure()));
  }

  /// Normalizes nonnegative point masses of positive total.
  static ProbMeasure from_masses(const DiscreteMMSpace& space, const Field& masses) {
    require_same_size(space, masses, "masses");
    for (Eigen::Index i = 0; i < masses.size(); ++i)
      if (!(masses[i] >= 0.0) || !std::isfinite(masses[i]))
        throw Error(ErrorCode::BadParams, "measure entry " + std::to_string(i) + " is negative or not finite");
    const double total = masses.sum();
    if (!(total > 0.0)) throw Error(ErrorCode::BadParams, "measure has zero total mass");
    ProbMeasure mu;
    mu.masses_ = masses / total;
    mu.density_ = mu.masses_.cwiseQuotient(space.measure());
    return mu;
  }

  static ProbMeasure dirac(const DiscreteMMSpace& space, std::size_t x) {
    if (x >= space.size()) throw Error(ErrorCode::BadParams, "dirac index out of range");
    Field masses = Field::Zero(static_cast<Eigen::Index>(space.size()));
    masses[static_cast<Eigen::Index>(x)] = 1.0;
    return from_masses(space, masses);
  }

  static ProbMeasure uniform(const DiscreteMMSpace& space) { return from_masses(space, space.measure()); }

  std::size_t size() const noexcept { return static_cast<std::size_t>(masses_.size()); }
  const Field& masses() const noexcept { return masses_; }
  const Field& density() const noexcept { return density_; }
  bool strictly_positive() const { return masses_.size() > 0 && masses_.minCoeff() > 0.0; }

 private:
  Field masses_;
  Field density_;
};

}  // namespace mmflow
