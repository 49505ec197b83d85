#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace stainforge {

/// Row-major, channel-interleaved 3-channel raster. The tag keeps RGB, optical
/// density and stain density images from being mixed up at call sites.
template <typename T, typename Tag>
class Raster3 {
 public:
  using value_type = T;

  Raster3() = default;
  Raster3(std::size_t width, std::size_t height, T fill = T{})
      : width_(width), height_(height), data_(width * height * 3, fill) {}
  Raster3(std::size_t width, std::size_t height, std::vector<T> data);

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t pixel_count() const noexcept { return width_ * height_; }
  bool empty() const noexcept { return data_.empty(); }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }

  T& at(std::size_t x, std::size_t y, std::size_t c) { return data_[(y * width_ + x) * 3 + c]; }
  const T& at(std::size_t x, std::size_t y, std::size_t c) const {
    return data_[(y * width_ + x) * 3 + c];
  }

  std::array<T, 3> pixel(std::size_t i) const {
    return {data_[3 * i], data_[3 * i + 1], data_[3 * i + 2]};
  }
  void set_pixel(std::size_t i, const std::array<T, 3>& v) {
    data_[3 * i] = v[0];
    data_[3 * i + 1] = v[1];
    data_[3 * i + 2] = v[2];
  }

  friend bool operator==(const Raster3&, const Raster3&) = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<T> data_;
};

struct RgbTag {};
struct OdTag {};
struct DensityTag {};

/// 8-bit RGB image; the unit of all pipeline I/O.
using RgbImage = Raster3<std::uint8_t, RgbTag>;
/// Per-pixel optical densities, finite and >= 0.
using OdImage = Raster3<double, OdTag>;
/// Per-pixel stain densities (h, e, residual).
using StainDensityMap = Raster3<double, DensityTag>;

class TissueMask {
 public:
  TissueMask() = default;
  TissueMask(std::size_t width, std::size_t height, bool fill = false)
      : width_(width), height_(height), bits_(width * height, fill ? 1 : 0) {}

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t size() const noexcept { return bits_.size(); }

  bool operator[](std::size_t i) const { return bits_[i] != 0; }
  void set(std::size_t i, bool v) { bits_[i] = v ? 1 : 0; }

  std::size_t count() const;
  std::vector<std::size_t> indices() const;

  friend bool operator==(const TissueMask&, const TissueMask&) = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<std::uint8_t> bits_;
};

}  // namespace stainforge

#include "stainforge/detail/image_impl.hpp"
