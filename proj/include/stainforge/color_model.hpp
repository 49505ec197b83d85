#pragma once

#include <array>
#include <filesystem>

#include "stainforge/image.hpp"

namespace stainforge {

/// Per-channel background (white) level I_m used by the optical density model.
struct BackgroundIntensity {
  std::array<double, 3> level{255.0, 255.0, 255.0};

  BackgroundIntensity() = default;
  explicit BackgroundIntensity(double scalar);
  explicit BackgroundIntensity(const std::array<double, 3>& per_channel);

  friend bool operator==(const BackgroundIntensity&, const BackgroundIntensity&) = default;
};

/// Intensity floor applied before taking the logarithm.
inline constexpr double kIntensityFloor = 1.0;
inline constexpr double kDefaultTissueThreshold = 0.15;

/// od = -ln(max(I, 1) / I_m), clamped to >= 0.
OdImage rgb_to_od(const RgbImage& img, const BackgroundIntensity& bg = {});

/// I = round(I_m * exp(-od)), clamped to [0, 255].
RgbImage od_to_rgb(const OdImage& od, const BackgroundIntensity& bg = {});

/// Pixel is tissue iff the mean of its three OD channels exceeds the threshold.
TissueMask tissue_mask(const OdImage& od, double threshold = kDefaultTissueThreshold);

/// Per-channel 95th percentile of intensities (nearest rank), floored at 1.
BackgroundIntensity estimate_background(const RgbImage& img);

// Debug dump: "ODIM", u32 width, u32 height, u32 reserved, then float32
// samples, row-major and channel-interleaved; all little-endian.
void write_od_dump(const std::filesystem::path& path, const OdImage& od);
OdImage read_od_dump(const std::filesystem::path& path);

}  // namespace stainforge
