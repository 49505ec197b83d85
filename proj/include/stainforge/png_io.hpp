#pragma once

#include <filesystem>

#include "stainforge/image.hpp"

namespace stainforge {

/// Decodes any PNG (gray, palette, alpha and 16-bit inputs are converted) to 8-bit RGB.
RgbImage read_png(const std::filesystem::path& path);

void write_png(const std::filesystem::path& path, const RgbImage& img);

}  // namespace stainforge
