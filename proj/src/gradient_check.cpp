#include "stainforge/gradient_check.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "stainforge/rng.hpp"

namespace stainforge {

namespace {

acd::AcdParams random_point(SplitMix64& rng) {
  constexpr double lo = 0.05, hi = std::numbers::pi / 2 - 0.05;
  for (;;) {
    acd::AcdParams p;
    p.theta_h = rng.uniform(lo, hi);
    p.phi_h = rng.uniform(lo, hi);
    p.theta_e = rng.uniform(lo, hi);
    p.phi_e = rng.uniform(lo, hi);
    p.log_wh = rng.uniform(std::log(0.25), std::log(4.0));
    p.log_we = rng.uniform(std::log(0.25), std::log(4.0));
    const double sep = acd::angle_between_deg(acd::unit_vector(p.theta_h, p.phi_h),
                                              acd::unit_vector(p.theta_e, p.phi_e));
    if (sep > acd::kMinStainSeparationDeg + 2.0) return p;
  }
}

std::vector<acd::Vec3> random_samples(SplitMix64& rng, std::size_t n) {
  std::vector<acd::Vec3> out(n);
  for (auto& v : out) v = acd::Vec3(rng.uniform(0.0, 2.0), rng.uniform(0.0, 2.0), rng.uniform(0.0, 2.0));
  return out;
}

double total(std::span<const acd::Vec3> od, const acd::AcdParams& p, const acd::AcdHyperparams& hp) {
  return acd::evaluate(od, p, hp).value.total;
}

}  // namespace

GradientCheckResult check_gradient(const GradientCheckOptions& opts, const GradientFn& grad) {
  SplitMix64 rng(opts.seed);
  GradientCheckResult r;
  for (std::size_t k = 0; k < opts.points; ++k) {
    const acd::AcdParams p = random_point(rng);
    const auto od = random_samples(rng, opts.samples_per_point);
    const acd::Gradient g = grad(od, p, opts.hyperparams);
    const auto x = p.to_array();
    for (std::size_t i = 0; i < x.size(); ++i) {
      auto up = x, down = x;
      up[i] += opts.step;
      down[i] -= opts.step;
      const double fd = (total(od, acd::AcdParams::from_array(up), opts.hyperparams) -
                         total(od, acd::AcdParams::from_array(down), opts.hyperparams)) /
                        (2.0 * opts.step);
      const double diff = std::abs(g[i] - fd);
      const double scale = std::max(std::abs(g[i]), std::abs(fd));
      bool ok = false;
      if (scale < opts.abs_floor) {
        r.max_abs_error = std::max(r.max_abs_error, diff);
        ok = diff < opts.abs_floor;
      } else {
        const double rel = diff / scale;
        if (rel > r.max_rel_error || !std::isfinite(rel)) {
          r.max_rel_error = rel;
          r.worst_point = k;
          r.worst_coord = i;
        }
        ok = rel < opts.rel_tol;
      }
      if (!ok) ++r.failures;
    }
    ++r.points;
  }
  return r;
}

}  // namespace stainforge
