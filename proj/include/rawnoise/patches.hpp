#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "rawnoise/random.hpp"
#include "rawnoise/raw_frame.hpp"

namespace rawnoise {

enum class GeometricTransform { identity, rotate90, rotate180, rotate270, hflip, vflip };

constexpr GeometricTransform inverse(GeometricTransform t) noexcept {
  switch (t) {
    case GeometricTransform::rotate90: return GeometricTransform::rotate270;
    case GeometricTransform::rotate270: return GeometricTransform::rotate90;
    default: return t;
  }
}

// Rotations are clockwise.
inline Plane apply_transform(const Plane& in, GeometricTransform t) {
  const std::size_t w = in.width;
  const std::size_t h = in.height;
  switch (t) {
    case GeometricTransform::identity:
      return in;
    case GeometricTransform::rotate90: {
      Plane out(h, w);
      for (std::size_t y = 0; y < w; ++y)
        for (std::size_t x = 0; x < h; ++x) out.at(x, y) = in.at(y, h - 1 - x);
      return out;
    }
    case GeometricTransform::rotate180: {
      Plane out(w, h);
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) out.at(x, y) = in.at(w - 1 - x, h - 1 - y);
      return out;
    }
    case GeometricTransform::rotate270: {
      Plane out(h, w);
      for (std::size_t y = 0; y < w; ++y)
        for (std::size_t x = 0; x < h; ++x) out.at(x, y) = in.at(w - 1 - y, x);
      return out;
    }
    case GeometricTransform::hflip: {
      Plane out(w, h);
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) out.at(x, y) = in.at(w - 1 - x, y);
      return out;
    }
    case GeometricTransform::vflip: {
      Plane out(w, h);
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) out.at(x, y) = in.at(x, h - 1 - y);
      return out;
    }
  }
  return in;
}

struct PatchRect {
  std::size_t x = 0;
  std::size_t y = 0;
  std::size_t size = 0;

  bool intersects(const PatchRect& o) const noexcept {
    return x < o.x + o.size && o.x < x + size && y < o.y + o.size && o.y < y + size;
  }
  bool operator==(const PatchRect&) const = default;
};

struct PatchSpec {
  std::size_t patch_size = 512;
  std::size_t count = 8;
  bool overlap_allowed = false;
  std::vector<GeometricTransform> geometric_aug{GeometricTransform::rotate90, GeometricTransform::rotate180,
                                                GeometricTransform::rotate270, GeometricTransform::hflip,
                                                GeometricTransform::vflip};
};

struct PatchPlacement {
  PatchRect rect;
  GeometricTransform transform = GeometricTransform::identity;
  bool operator==(const PatchPlacement&) const = default;
};

template <typename Image>
struct Patch {
  PatchRect rect;
  GeometricTransform transform = GeometricTransform::identity;
  Image image;
};

inline constexpr int kMaxPatchRejections = 1000;

namespace detail {

inline std::size_t uniform_index(CounterEngine& eng, std::size_t n) {
  const auto i = static_cast<std::size_t>(eng.uniform() * static_cast<double>(n));
  return std::min(i, n - 1);
}

}  // namespace detail

// Chooses rectangles inside a width x height domain with origins on multiples
// of `align`. Disjoint layouts use rejection sampling and fall back to a
// shuffled grid after kMaxPatchRejections rejections.
inline std::vector<PatchPlacement> plan_patches(std::size_t width, std::size_t height, std::size_t align,
                                                const PatchSpec& spec, const RandomSource& rng) {
  const std::size_t p = spec.patch_size;
  require(p > 0 && spec.count > 0, ErrorCode::capacity, "patch size and count must be positive");
  require(p % align == 0, ErrorCode::dimension, "patch size must be a multiple of " + std::to_string(align));
  require(p <= width && p <= height, ErrorCode::capacity, "image smaller than one patch");
  const std::size_t cells = (width / p) * (height / p);
  require(spec.overlap_allowed || spec.count <= cells, ErrorCode::capacity,
          "image cannot host " + std::to_string(spec.count) + " disjoint patches of size " + std::to_string(p));

  CounterEngine layout = rng.derive(stream_tag::patch_layout).engine();
  const std::size_t nx = (width - p) / align + 1;
  const std::size_t ny = (height - p) / align + 1;

  std::vector<PatchRect> rects;
  rects.reserve(spec.count);
  int rejections = 0;
  while (rects.size() < spec.count && rejections < kMaxPatchRejections) {
    PatchRect r{detail::uniform_index(layout, nx) * align, detail::uniform_index(layout, ny) * align, p};
    const bool clash = !spec.overlap_allowed &&
                       std::any_of(rects.begin(), rects.end(), [&](const PatchRect& o) { return o.intersects(r); });
    if (clash) {
      ++rejections;
      continue;
    }
    rects.push_back(r);
  }
  if (rects.size() < spec.count) {
    std::vector<PatchRect> grid;
    grid.reserve(cells);
    for (std::size_t gy = 0; gy < height / p; ++gy)
      for (std::size_t gx = 0; gx < width / p; ++gx) grid.push_back({gx * p, gy * p, p});
    for (std::size_t i = grid.size() - 1; i > 0; --i) std::swap(grid[i], grid[detail::uniform_index(layout, i + 1)]);
    rects.assign(grid.begin(), grid.begin() + static_cast<std::ptrdiff_t>(spec.count));
  }

  std::vector<GeometricTransform> choices{GeometricTransform::identity};
  choices.insert(choices.end(), spec.geometric_aug.begin(), spec.geometric_aug.end());
  const RandomSource transform_rng = rng.derive(stream_tag::patch_transform);
  std::vector<PatchPlacement> out;
  out.reserve(rects.size());
  for (std::size_t i = 0; i < rects.size(); ++i) {
    CounterEngine eng = transform_rng.engine(static_cast<std::uint32_t>(i));
    out.push_back({rects[i], choices[detail::uniform_index(eng, choices.size())]});
  }
  return out;
}

inline Plane crop(const Plane& in, const PatchRect& r) {
  Plane out(r.size, r.size);
  for (std::size_t y = 0; y < r.size; ++y)
    std::copy_n(in.data.begin() + static_cast<std::ptrdiff_t>((r.y + y) * in.width + r.x), r.size,
                out.data.begin() + static_cast<std::ptrdiff_t>(y * r.size));
  return out;
}

// The CFA tile and per-site black levels move with the pixels.
inline void transform_tile(SensorMeta& meta, GeometricTransform t) {
  Plane idx(2, 2);
  for (int s = 0; s < 4; ++s) idx.data[s] = s;
  const Plane moved = apply_transform(idx, t);
  const std::string old_cfa = meta.cfa_pattern;
  const auto old_black = meta.black_level;
  for (int s = 0; s < 4; ++s) {
    const int from = static_cast<int>(moved.data[s]);
    meta.cfa_pattern[s] = old_cfa[from];
    meta.black_level[s] = old_black[from];
  }
}

inline std::vector<Patch<PackedImage>> sample_patches(const PackedImage& img, const PatchSpec& spec,
                                                      const RandomSource& rng) {
  img.validate();
  std::vector<Patch<PackedImage>> out;
  for (const auto& place : plan_patches(img.plane_width(), img.plane_height(), 1, spec, rng)) {
    Patch<PackedImage> patch{place.rect, place.transform, {}};
    patch.image.meta = img.meta;
    patch.image.kind = img.kind;
    patch.image.black_subtracted = img.black_subtracted;
    patch.image.attributes = img.attributes;
    for (int c = 0; c < kChannelCount; ++c)
      patch.image.channels[c] = apply_transform(crop(img.channels[c], place.rect), place.transform);
    patch.image.meta.width = static_cast<std::uint32_t>(2 * patch.image.channels[0].width);
    patch.image.meta.height = static_cast<std::uint32_t>(2 * patch.image.channels[0].height);
    out.push_back(std::move(patch));
  }
  return out;
}

// Mosaic-domain sampling: origins and sizes stay on CFA tile boundaries.
inline std::vector<Patch<RawFrame>> sample_patches(const RawFrame& frame, const PatchSpec& spec,
                                                   const RandomSource& rng) {
  frame.meta.validate();
  std::vector<Patch<RawFrame>> out;
  for (const auto& place : plan_patches(frame.width(), frame.height(), 2, spec, rng)) {
    Patch<RawFrame> patch{place.rect, place.transform, {}};
    patch.image.meta = frame.meta;
    patch.image.kind = frame.kind;
    patch.image.black_subtracted = frame.black_subtracted;
    patch.image.attributes = frame.attributes;
    patch.image.pixels = apply_transform(crop(frame.pixels, place.rect), place.transform);
    patch.image.meta.width = static_cast<std::uint32_t>(patch.image.pixels.width);
    patch.image.meta.height = static_cast<std::uint32_t>(patch.image.pixels.height);
    transform_tile(patch.image.meta, place.transform);
    out.push_back(std::move(patch));
  }
  return out;
}

}  // namespace rawnoise
