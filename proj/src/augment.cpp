#include "stainforge/augment.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "stainforge/error.hpp"

namespace stainforge {

namespace {

using Mat3 = Eigen::Matrix3d;

Mat3 translation(double tx, double ty) {
  Mat3 m = Mat3::Identity();
  m(0, 2) = tx;
  m(1, 2) = ty;
  return m;
}

Mat3 rotation(double radians) {
  Mat3 m = Mat3::Identity();
  const double c = std::cos(radians), s = std::sin(radians);
  m(0, 0) = c;
  m(0, 1) = -s;
  m(1, 0) = s;
  m(1, 1) = c;
  return m;
}

Mat3 scale(double sx, double sy) {
  Mat3 m = Mat3::Identity();
  m(0, 0) = sx;
  m(1, 1) = sy;
  return m;
}

Mat3 shear_x(double factor) {
  Mat3 m = Mat3::Identity();
  m(0, 1) = factor;
  return m;
}

std::size_t nearest_index(double v, std::size_t extent) {
  const double r = std::floor(v + 0.5);
  if (!(r > 0.0)) return 0;  // also catches NaN
  const double hi = static_cast<double>(extent - 1);
  return static_cast<std::size_t>(std::min(r, hi));
}

}  // namespace

void AugmentConfig::validate() const {
  auto bad = [](const std::string& what) { throw Error(ErrorCode::InvalidArgument, what); };
  for (double r : {shear_range, zoom_range, rotation_range, width_shift_range, height_shift_range}) {
    if (!(r >= 0.0) || !std::isfinite(r)) bad("augmentation ranges must be finite and >= 0");
  }
  if (!(zoom_range < 1.0)) bad("zoom_range must be < 1");
}

bool AffineTransform::is_identity() const { return *this == identity(); }

AugmentParams sample_params(const AugmentConfig& cfg, SplitMix64& rng, std::size_t width,
                            std::size_t height) {
  cfg.validate();
  // Every draw consumes the same number of values regardless of which ranges
  // are zero, so streams stay aligned across configurations.
  AugmentParams p;
  p.shear = rng.uniform(-cfg.shear_range, cfg.shear_range);
  p.rotation_deg = rng.uniform(-cfg.rotation_range, cfg.rotation_range);
  p.zoom = rng.uniform(1.0 - cfg.zoom_range, 1.0 + cfg.zoom_range);
  p.shift_x = rng.uniform(-cfg.width_shift_range, cfg.width_shift_range) * static_cast<double>(width);
  p.shift_y = rng.uniform(-cfg.height_shift_range, cfg.height_shift_range) * static_cast<double>(height);
  const bool coin = rng.coin();
  p.flip = cfg.horizontal_flip && coin;
  // -0.0 from a zero range would spoil exact identity comparisons
  for (double* v : {&p.shear, &p.rotation_deg, &p.shift_x, &p.shift_y}) {
    if (*v == 0.0) *v = 0.0;
  }
  return p;
}

AffineTransform make_transform(const AugmentParams& p, std::size_t width, std::size_t height) {
  if (!(p.zoom > 0.0)) throw Error(ErrorCode::InvalidArgument, "zoom must be > 0");
  const double cx = (static_cast<double>(width) - 1.0) / 2.0;
  const double cy = (static_cast<double>(height) - 1.0) / 2.0;
  const double theta = p.rotation_deg * std::numbers::pi / 180.0;

  // Inverse of C * flip * shift * shear * zoom * rotate * C^-1, built from the
  // analytic inverse of each factor.
  Mat3 flip_inv = Mat3::Identity();
  if (p.flip) flip_inv(0, 0) = -1.0;
  const Mat3 inv = translation(cx, cy) * rotation(-theta) * scale(1.0 / p.zoom, 1.0 / p.zoom) *
                   shear_x(-std::tan(p.shear)) * translation(-p.shift_x, -p.shift_y) * flip_inv *
                   translation(-cx, -cy);

  AffineTransform t;
  t.m = {inv(0, 0), inv(0, 1), inv(0, 2), inv(1, 0), inv(1, 1), inv(1, 2)};
  for (double& v : t.m) {
    if (v == 0.0) v = 0.0;
    if (!std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "non-finite affine transform");
  }
  return t;
}

AffineTransform sample_transform(const AugmentConfig& cfg, SplitMix64& rng, std::size_t width,
                                 std::size_t height) {
  return make_transform(sample_params(cfg, rng, width, height), width, height);
}

RgbImage apply_transform(const RgbImage& img, const AffineTransform& t) {
  RgbImage out(img.width(), img.height());
  if (img.empty()) return out;
  const auto& m = t.m;
  for (std::size_t y = 0; y < img.height(); ++y) {
    for (std::size_t x = 0; x < img.width(); ++x) {
      const double fx = static_cast<double>(x), fy = static_cast<double>(y);
      const std::size_t sx = nearest_index(m[0] * fx + m[1] * fy + m[2], img.width());
      const std::size_t sy = nearest_index(m[3] * fx + m[4] * fy + m[5], img.height());
      for (std::size_t c = 0; c < 3; ++c) out.at(x, y, c) = img.at(sx, sy, c);
    }
  }
  return out;
}

AugmentStream::AugmentStream(const RgbImage& img, const AugmentConfig& cfg)
    : img_(img), cfg_(cfg), rng_(cfg.seed) {
  cfg_.validate();
}

RgbImage AugmentStream::next() {
  last_ = sample_params(cfg_, rng_, img_.width(), img_.height());
  return apply_transform(img_, make_transform(last_, img_.width(), img_.height()));
}

std::vector<RgbImage> augment_stream(const RgbImage& img, const AugmentConfig& cfg, std::size_t count) {
  std::vector<RgbImage> out;
  out.reserve(count);
  AugmentStream stream(img, cfg);
  for (std::size_t i = 0; i < count; ++i) out.push_back(stream.next());
  return out;
}

}  // namespace stainforge
