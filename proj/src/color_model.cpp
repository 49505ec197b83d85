#include "stainforge/color_model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "stainforge/error.hpp"

namespace stainforge {

namespace {

void check_level(double v) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw Error(ErrorCode::InvalidArgument,
                "background intensity must be finite and > 0, got " + std::to_string(v));
  }
}

std::array<std::array<double, 256>, 3> od_lookup(const BackgroundIntensity& bg) {
  std::array<std::array<double, 256>, 3> lut{};
  for (std::size_t c = 0; c < 3; ++c) {
    for (int i = 0; i < 256; ++i) {
      const double v = -std::log(std::max(static_cast<double>(i), kIntensityFloor) / bg.level[c]);
      lut[c][static_cast<std::size_t>(i)] = v > 0.0 ? v : 0.0;
    }
  }
  return lut;
}

void put_u32(std::ostream& out, std::uint32_t v) {
  const char bytes[4] = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                         static_cast<char>((v >> 16) & 0xFF), static_cast<char>((v >> 24) & 0xFF)};
  out.write(bytes, 4);
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

BackgroundIntensity::BackgroundIntensity(double scalar) : level{scalar, scalar, scalar} {
  check_level(scalar);
}

BackgroundIntensity::BackgroundIntensity(const std::array<double, 3>& per_channel)
    : level(per_channel) {
  for (double v : level) check_level(v);
}

OdImage rgb_to_od(const RgbImage& img, const BackgroundIntensity& bg) {
  for (double v : bg.level) check_level(v);
  const auto lut = od_lookup(bg);
  OdImage out(img.width(), img.height());
  auto src = img.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = lut[i % 3][src[i]];
  return out;
}

RgbImage od_to_rgb(const OdImage& od, const BackgroundIntensity& bg) {
  RgbImage out(od.width(), od.height());
  auto src = od.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) {
    const double v = std::round(bg.level[i % 3] * std::exp(-src[i]));
    dst[i] = static_cast<std::uint8_t>(std::clamp(std::isfinite(v) ? v : 0.0, 0.0, 255.0));
  }
  return out;
}

TissueMask tissue_mask(const OdImage& od, double threshold) {
  if (!(threshold >= 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "tissue threshold must be >= 0");
  }
  TissueMask mask(od.width(), od.height());
  auto d = od.data();
  for (std::size_t i = 0; i < od.pixel_count(); ++i) {
    const double mean = (d[3 * i] + d[3 * i + 1] + d[3 * i + 2]) / 3.0;
    mask.set(i, mean > threshold);
  }
  return mask;
}

BackgroundIntensity estimate_background(const RgbImage& img) {
  if (img.empty()) throw Error(ErrorCode::InvalidArgument, "cannot estimate background of empty image");
  std::array<double, 3> level{};
  const std::size_t n = img.pixel_count();
  // nearest-rank percentile
  const std::size_t rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(n)));
  auto d = img.data();
  for (std::size_t c = 0; c < 3; ++c) {
    std::array<std::size_t, 256> hist{};
    for (std::size_t i = 0; i < n; ++i) ++hist[d[3 * i + c]];
    std::size_t seen = 0;
    for (std::size_t v = 0; v < 256; ++v) {
      seen += hist[v];
      if (seen >= rank) {
        level[c] = std::max(static_cast<double>(v), kIntensityFloor);
        break;
      }
    }
  }
  return BackgroundIntensity(level);
}

void write_od_dump(const std::filesystem::path& path, const OdImage& od) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  out.write("ODIM", 4);
  put_u32(out, static_cast<std::uint32_t>(od.width()));
  put_u32(out, static_cast<std::uint32_t>(od.height()));
  put_u32(out, 0);
  for (double v : od.data()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

OdImage read_od_dump(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 16 || bytes[0] != 'O' || bytes[1] != 'D' || bytes[2] != 'I' || bytes[3] != 'M') {
    throw Error(ErrorCode::ParseError, path.string() + ": not an ODIM dump");
  }
  const std::size_t w = get_u32(bytes.data() + 4);
  const std::size_t h = get_u32(bytes.data() + 8);
  if (bytes.size() != 16 + w * h * 3 * 4) {
    throw Error(ErrorCode::ParseError, path.string() + ": truncated ODIM payload");
  }
  std::vector<double> data(w * h * 3);
  for (std::size_t i = 0; i < data.size(); ++i) {
    data[i] = std::bit_cast<float>(get_u32(bytes.data() + 16 + 4 * i));
  }
  return OdImage(w, h, std::move(data));
}

}  // namespace stainforge
