#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>

#include "stainforge/acd.hpp"

namespace stainforge {

using GradientFn = std::function<acd::Gradient(std::span<const acd::Vec3>, const acd::AcdParams&,
                                               const acd::AcdHyperparams&)>;

struct GradientCheckOptions {
  std::size_t points = 100;
  std::size_t samples_per_point = 256;
  double step = 1e-5;
  double rel_tol = 1e-4;
  double abs_floor = 1e-8;  // coordinates below this are compared absolutely
  std::uint64_t seed = 0;
  acd::AcdHyperparams hyperparams{};
};

struct GradientCheckResult {
  std::size_t points = 0;
  std::size_t failures = 0;  // coordinates out of tolerance
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;  // over the absolutely compared coordinates
  std::size_t worst_point = 0;
  std::size_t worst_coord = 0;

  bool passed() const { return failures == 0; }
};

/// Compares `grad` with central differences of the objective at random
/// parameter points (angles in [0.05, pi/2 - 0.05], H/E more than 3 degrees
/// apart, weights in [1/4, 4]) over random OD samples.
GradientCheckResult check_gradient(const GradientCheckOptions& opts, const GradientFn& grad = acd::gradient);

}  // namespace stainforge
