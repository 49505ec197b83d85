#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "stainforge/image.hpp"
#include "stainforge/rng.hpp"

namespace stainforge {

enum class FillMode { Nearest };

/// Random affine augmentation ranges. Defaults: shear 0.2 rad, zoom 0.2,
/// rotation 25 degrees, horizontal flip, 0.1 width/height shift, nearest fill.
struct AugmentConfig {
  double shear_range = 0.2;
  double zoom_range = 0.2;
  double rotation_range = 25.0;
  bool horizontal_flip = true;
  double width_shift_range = 0.1;
  double height_shift_range = 0.1;
  FillMode fill_mode = FillMode::Nearest;
  std::uint64_t seed = 0;

  void validate() const;
};

/// One draw of the augmentation parameters.
struct AugmentParams {
  double shear = 0.0;         // radians, x-axis shear angle
  double rotation_deg = 0.0;
  double zoom = 1.0;
  double shift_x = 0.0;       // pixels
  double shift_y = 0.0;       // pixels
  bool flip = false;

  friend bool operator==(const AugmentParams&, const AugmentParams&) = default;
};

/// Maps output pixel coordinates to input coordinates:
/// (x_in, y_in) = [m00 m01 m02; m10 m11 m12] * (x_out, y_out, 1).
struct AffineTransform {
  std::array<double, 6> m{1.0, 0.0, 0.0, 0.0, 1.0, 0.0};

  static AffineTransform identity() { return {}; }
  bool is_identity() const;

  friend bool operator==(const AffineTransform&, const AffineTransform&) = default;
};

AugmentParams sample_params(const AugmentConfig& cfg, SplitMix64& rng, std::size_t width,
                            std::size_t height);

/// Forward map flip . shift . shear . zoom . rotate about the image center,
/// returned as its inverse.
AffineTransform make_transform(const AugmentParams& p, std::size_t width, std::size_t height);

AffineTransform sample_transform(const AugmentConfig& cfg, SplitMix64& rng, std::size_t width,
                                 std::size_t height);

/// Nearest-neighbour resampling; out-of-range source coordinates clamp to the border.
RgbImage apply_transform(const RgbImage& img, const AffineTransform& t);

/// Owns its generator; not shareable across threads mid-iteration.
class AugmentStream {
 public:
  AugmentStream(const RgbImage& img, const AugmentConfig& cfg);

  RgbImage next();
  const AugmentParams& last_params() const { return last_; }

 private:
  const RgbImage& img_;
  AugmentConfig cfg_;
  SplitMix64 rng_;
  AugmentParams last_;
};

std::vector<RgbImage> augment_stream(const RgbImage& img, const AugmentConfig& cfg, std::size_t count);

}  // namespace stainforge
