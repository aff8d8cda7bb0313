#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rawnoise/error.hpp"

namespace rawnoise {

// Packed channel order is always (R, G1, G2, B); G1 is the green site that
// comes first in raster order within the 2x2 tile.
enum Channel : int { kRed = 0, kGreen1 = 1, kGreen2 = 2, kBlue = 3 };
inline constexpr int kChannelCount = 4;

// Tile site index of each packed channel, site = 2 * row + col.
using ChannelSites = std::array<int, kChannelCount>;

inline ChannelSites parse_cfa(const std::string& pattern) {
  require(pattern.size() == 4, ErrorCode::format, "CFA pattern must have 4 characters: '" + pattern + "'");
  ChannelSites sites{-1, -1, -1, -1};
  int greens = 0;
  for (int site = 0; site < 4; ++site) {
    switch (pattern[site]) {
      case 'R':
        require(sites[kRed] < 0, ErrorCode::format, "CFA pattern has two red sites: " + pattern);
        sites[kRed] = site;
        break;
      case 'B':
        require(sites[kBlue] < 0, ErrorCode::format, "CFA pattern has two blue sites: " + pattern);
        sites[kBlue] = site;
        break;
      case 'G':
        require(greens < 2, ErrorCode::format, "CFA pattern has more than two green sites: " + pattern);
        sites[greens == 0 ? kGreen1 : kGreen2] = site;
        ++greens;
        break;
      default:
        fail(ErrorCode::format, "unknown CFA pattern: " + pattern);
    }
  }
  require(greens == 2 && sites[kRed] >= 0 && sites[kBlue] >= 0, ErrorCode::format,
          "CFA pattern must contain R, G, G, B: " + pattern);
  return sites;
}

struct SensorMeta {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::string cfa_pattern = "RGGB";
  // Indexed by tile site (2 * row + col), not by packed channel.
  std::array<double, 4> black_level{};
  double white_level = 65535.0;
  std::uint32_t iso = 100;
  double exposure_time = 1.0 / 30.0;
  std::optional<double> system_gain_k;

  double black_at(std::size_t x, std::size_t y) const noexcept { return black_level[(y & 1) * 2 + (x & 1)]; }

  double channel_black(int channel) const { return black_level[parse_cfa(cfa_pattern)[channel]]; }

  void validate() const {
    require(width % 2 == 0 && height % 2 == 0, ErrorCode::dimension,
            "frame dimensions must be even, got " + std::to_string(width) + "x" + std::to_string(height));
    parse_cfa(cfa_pattern);
    for (double b : black_level)
      require(b >= 0.0 && b < white_level, ErrorCode::format, "black level must lie in [0, white_level)");
    require(iso > 0, ErrorCode::format, "iso must be positive");
    require(exposure_time > 0.0, ErrorCode::format, "exposure time must be positive");
    require(!system_gain_k || *system_gain_k > 0.0, ErrorCode::format, "system gain must be positive");
  }

  bool operator==(const SensorMeta&) const = default;
};

struct Plane {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> data;

  Plane() = default;
  Plane(std::size_t w, std::size_t h, double fill = 0.0) : width(w), height(h), data(w * h, fill) {}

  double& at(std::size_t x, std::size_t y) noexcept { return data[y * width + x]; }
  double at(std::size_t x, std::size_t y) const noexcept { return data[y * width + x]; }
  std::size_t size() const noexcept { return data.size(); }

  bool operator==(const Plane&) const = default;
};

enum class SampleKind { quantized, real };

// One Bayer mosaic. Values are DN; when black_subtracted is set they are
// relative to the per-site black level recorded in meta.
struct RawFrame {
  SensorMeta meta;
  Plane pixels;
  SampleKind kind = SampleKind::quantized;
  bool black_subtracted = false;
  std::map<std::string, std::string> attributes;

  RawFrame() = default;
  RawFrame(SensorMeta m, SampleKind k = SampleKind::quantized)
      : meta(std::move(m)), pixels(meta.width, meta.height), kind(k) {}

  std::size_t width() const noexcept { return pixels.width; }
  std::size_t height() const noexcept { return pixels.height; }
  double& at(std::size_t x, std::size_t y) noexcept { return pixels.at(x, y); }
  double at(std::size_t x, std::size_t y) const noexcept { return pixels.at(x, y); }

  void validate() const {
    meta.validate();
    require(pixels.width == meta.width && pixels.height == meta.height && pixels.size() == pixels.width * pixels.height,
            ErrorCode::dimension, "pixel data does not match metadata dimensions");
    if (kind == SampleKind::quantized) {
      require(!black_subtracted, ErrorCode::format, "quantized frames hold raw sensor output");
      for (double v : pixels.data)
        require(v >= 0.0 && v <= meta.white_level && v == std::floor(v), ErrorCode::format,
                "quantized frame holds a value outside [0, white_level] or non-integral");
    }
  }

  bool operator==(const RawFrame&) const = default;
};

// Four half-resolution planes in (R, G1, G2, B) order.
struct PackedImage {
  SensorMeta meta;
  std::array<Plane, kChannelCount> channels;
  SampleKind kind = SampleKind::quantized;
  bool black_subtracted = false;
  std::map<std::string, std::string> attributes;

  std::size_t plane_width() const noexcept { return channels[0].width; }
  std::size_t plane_height() const noexcept { return channels[0].height; }

  // Saturation ceiling of a channel in the image's own value domain.
  double ceiling(int channel) const {
    return black_subtracted ? meta.white_level - meta.channel_black(channel) : meta.white_level;
  }

  void validate() const {
    meta.validate();
    for (const auto& p : channels)
      require(p.width * 2 == meta.width && p.height * 2 == meta.height && p.size() == p.width * p.height,
              ErrorCode::dimension, "packed plane must be half the mosaic size in each axis");
  }

  bool operator==(const PackedImage&) const = default;
};

inline bool same_geometry(const SensorMeta& a, const SensorMeta& b) noexcept {
  return a.width == b.width && a.height == b.height && a.cfa_pattern == b.cfa_pattern;
}

// Copy of a frame with the per-site black level removed; result is real-valued.
inline RawFrame subtract_black(const RawFrame& frame) {
  if (frame.black_subtracted) return frame;
  RawFrame out = frame;
  out.kind = SampleKind::real;
  out.black_subtracted = true;
  for (std::size_t y = 0; y < out.height(); ++y)
    for (std::size_t x = 0; x < out.width(); ++x) out.at(x, y) -= frame.meta.black_at(x, y);
  return out;
}

inline PackedImage subtract_black(const PackedImage& img) {
  if (img.black_subtracted) return img;
  PackedImage out = img;
  out.kind = SampleKind::real;
  out.black_subtracted = true;
  for (int c = 0; c < kChannelCount; ++c) {
    const double black = img.meta.channel_black(c);
    for (double& v : out.channels[c].data) v -= black;
  }
  return out;
}

// Round half to even, then clip to [0, white]. This rounding is the
// quantization step of the sensor model.
inline double quantize_dn(double value, double white_level) noexcept {
  const double r = std::nearbyint(value);
  return r < 0.0 ? 0.0 : (r > white_level ? white_level : r);
}

}  // namespace rawnoise
