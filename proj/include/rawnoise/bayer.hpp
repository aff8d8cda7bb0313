#pragma once

#include <string>

#include "rawnoise/raw_frame.hpp"

namespace rawnoise {

inline std::string format_channel_sites(const ChannelSites& sites) {
  std::string s;
  for (int c = 0; c < kChannelCount; ++c) {
    if (c) s += ',';
    s += std::to_string(sites[c]);
  }
  return s;
}

inline PackedImage pack_bayer(const RawFrame& frame) {
  require(frame.width() % 2 == 0 && frame.height() % 2 == 0, ErrorCode::dimension,
          "cannot pack a mosaic with odd dimensions");
  const ChannelSites sites = parse_cfa(frame.meta.cfa_pattern);
  const std::size_t w = frame.width() / 2;
  const std::size_t h = frame.height() / 2;

  PackedImage out;
  out.meta = frame.meta;
  out.kind = frame.kind;
  out.black_subtracted = frame.black_subtracted;
  out.attributes = frame.attributes;
  out.attributes["bayer.channel_sites"] = format_channel_sites(sites);
  for (int c = 0; c < kChannelCount; ++c) {
    const std::size_t dy = static_cast<std::size_t>(sites[c] / 2);
    const std::size_t dx = static_cast<std::size_t>(sites[c] % 2);
    Plane& plane = out.channels[c];
    plane = Plane(w, h);
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) plane.at(x, y) = frame.at(2 * x + dx, 2 * y + dy);
  }
  return out;
}

inline RawFrame unpack_bayer(const PackedImage& img) {
  const std::size_t w = img.channels[0].width;
  const std::size_t h = img.channels[0].height;
  for (const Plane& p : img.channels)
    require(p.width == w && p.height == h && p.size() == w * h, ErrorCode::dimension,
            "packed planes differ in shape");
  require(img.meta.width == 2 * w && img.meta.height == 2 * h, ErrorCode::dimension,
          "packed planes do not match the mosaic dimensions in metadata");
  const ChannelSites sites = parse_cfa(img.meta.cfa_pattern);

  RawFrame out;
  out.meta = img.meta;
  out.pixels = Plane(2 * w, 2 * h);
  out.kind = img.kind;
  out.black_subtracted = img.black_subtracted;
  out.attributes = img.attributes;
  out.attributes.erase("bayer.channel_sites");
  for (int c = 0; c < kChannelCount; ++c) {
    const std::size_t dy = static_cast<std::size_t>(sites[c] / 2);
    const std::size_t dx = static_cast<std::size_t>(sites[c] % 2);
    const Plane& plane = img.channels[c];
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) out.at(2 * x + dx, 2 * y + dy) = plane.at(x, y);
  }
  return out;
}

}  // namespace rawnoise
