#pragma once

#include <algorithm>
#include <string>

#include "stainforge/error.hpp"

namespace stainforge {

template <typename T, typename Tag>
Raster3<T, Tag>::Raster3(std::size_t width, std::size_t height, std::vector<T> data)
    : width_(width), height_(height), data_(std::move(data)) {
  if (data_.size() != width_ * height_ * 3) {
    throw Error(ErrorCode::InvalidArgument,
                "raster data length " + std::to_string(data_.size()) + " does not match " +
                    std::to_string(width_) + "x" + std::to_string(height_) + "x3");
  }
}

inline std::size_t TissueMask::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

inline std::vector<std::size_t> TissueMask::indices() const {
  std::vector<std::size_t> out;
  out.reserve(count());
  for (std::size_t i = 0; i < bits_.size(); ++i) {
    if (bits_[i]) out.push_back(i);
  }
  return out;
}

}  // namespace stainforge
