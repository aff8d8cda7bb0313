#pragma once

// Dark shading correction. Dark shading (the temporally stable expectation of
// read noise) is modeled per pixel as
//
//   D_ds(iso) = fpn_k * iso + fpn_b + ble(iso)
//
// where ble is a tabulated global offset and the FPN maps come from an
// ordinary least-squares fit across calibration ISOs after the BLE of each
// ISO has been removed.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rawnoise/container.hpp"
#include "rawnoise/iso_table.hpp"
#include "rawnoise/noise_model.hpp"
#include "rawnoise/raw_frame.hpp"

namespace rawnoise {

inline constexpr std::size_t kDefaultDarkFrameCount = 400;
inline constexpr std::size_t kLowDarkFrameCount = 100;
// Reconstructed shading is snapped to this grid so that subtracting it from
// an integer frame and adding it back is exact in double precision.
inline constexpr double kShadingResolution = 1.0 / 65536.0;

struct DarkFrameSet {
  std::uint32_t iso = 0;
  double exposure_time = 1.0 / 30.0;
  std::vector<RawFrame> frames;

  std::size_t frame_count() const noexcept { return frames.size(); }

  void validate() const {
    require(frames.size() >= 2, ErrorCode::set, "a dark frame set needs at least 2 frames");
    for (const RawFrame& f : frames) {
      require(f.meta == frames.front().meta, ErrorCode::set, "dark frames do not share identical metadata");
      require(f.pixels.size() == frames.front().pixels.size(), ErrorCode::set, "dark frames differ in size");
    }
    require(frames.front().meta.iso == iso, ErrorCode::set, "dark frame ISO does not match the set ISO");
  }
};

// Streaming per-pixel mean and unbiased temporal variance (Welford).
class DarkStackAccumulator {
 public:
  void add(const RawFrame& frame) {
    if (count_ == 0) {
      meta_ = frame.meta;
      width_ = frame.width();
      black_subtracted_ = frame.black_subtracted;
      mean_.assign(frame.pixels.size(), 0.0);
      m2_.assign(frame.pixels.size(), 0.0);
    } else {
      require(frame.meta == meta_ && frame.pixels.size() == mean_.size() &&
                  frame.black_subtracted == black_subtracted_,
              ErrorCode::set, "dark frames do not share identical metadata");
    }
    ++count_;
    const double inv = 1.0 / static_cast<double>(count_);
    const double* x = frame.pixels.data.data();
    for (std::size_t i = 0; i < mean_.size(); ++i) {
      const double d = x[i] - mean_[i];
      mean_[i] += d * inv;
      m2_[i] += d * (x[i] - mean_[i]);
    }
  }

  std::size_t count() const noexcept { return count_; }

  // Black-subtracted temporal mean.
  RawFrame mean_frame() const {
    require(count_ > 0, ErrorCode::set, "no frames accumulated");
    RawFrame out(meta_, SampleKind::real);
    out.black_subtracted = true;
    for (std::size_t i = 0; i < mean_.size(); ++i)
      out.pixels.data[i] = mean_[i] - (black_subtracted_ ? 0.0 : meta_.black_at(i % width_, i / width_));
    return out;
  }

  Plane temporal_sigma() const {
    require(count_ >= 2, ErrorCode::set, "temporal sigma needs at least 2 frames");
    Plane out(meta_.width, meta_.height);
    const double inv = 1.0 / static_cast<double>(count_ - 1);
    for (std::size_t i = 0; i < m2_.size(); ++i) out.data[i] = std::sqrt(std::max(0.0, m2_[i] * inv));
    return out;
  }

 private:
  SensorMeta meta_;
  std::size_t width_ = 0;
  bool black_subtracted_ = false;
  std::size_t count_ = 0;
  std::vector<double> mean_;
  std::vector<double> m2_;
};

struct DarkAverage {
  RawFrame mean_frame;  // black-subtracted
  Plane temporal_sigma;
  std::size_t frame_count = 0;
  bool low_frame_count = false;  // fewer than kLowDarkFrameCount frames
};

inline DarkAverage average_dark_frames(const DarkFrameSet& set) {
  set.validate();
  DarkStackAccumulator acc;
  for (const RawFrame& f : set.frames) acc.add(f);
  return {acc.mean_frame(), acc.temporal_sigma(), acc.count(), acc.count() < kLowDarkFrameCount};
}

// Spatial mean of a (black-subtracted) mean dark frame.
inline double compute_ble(const RawFrame& mean_frame) {
  const RawFrame f = subtract_black(mean_frame);
  double sum = 0.0;
  for (double v : f.pixels.data) sum += v;
  return f.pixels.data.empty() ? 0.0 : sum / static_cast<double>(f.pixels.size());
}

struct CalibrationProfile {
  SensorMeta meta;
  std::vector<float> fpn_k_map;  // DN per ISO unit
  std::vector<float> fpn_b_map;  // DN
  IsoTable ble_table;
  std::vector<std::uint32_t> calibration_isos;
  std::map<std::uint32_t, double> residual_rms;
  std::string sensor_id;
  IsoLookupPolicy ble_policy;

  double ble(double iso) const { return lookup_iso(ble_table, iso, ble_policy, ErrorCode::coverage); }

  // Spatial mean of fpn_k * iso + fpn_b; BLE carries the global offset so
  // this should vanish at every calibration ISO.
  double fpn_spatial_mean(double iso) const {
    double sum = 0.0;
    for (std::size_t i = 0; i < fpn_k_map.size(); ++i)
      sum += static_cast<double>(fpn_k_map[i]) * iso + static_cast<double>(fpn_b_map[i]);
    return fpn_k_map.empty() ? 0.0 : sum / static_cast<double>(fpn_k_map.size());
  }

  bool operator==(const CalibrationProfile& o) const {
    return meta == o.meta && fpn_k_map == o.fpn_k_map && fpn_b_map == o.fpn_b_map && ble_table == o.ble_table &&
           calibration_isos == o.calibration_isos && residual_rms == o.residual_rms && sensor_id == o.sensor_id &&
           ble_policy.interpolate == o.ble_policy.interpolate && ble_policy.extrapolate == o.ble_policy.extrapolate;
  }
};

struct IsoMeanFrame {
  std::uint32_t iso = 0;
  RawFrame mean_frame;
};

// Per-pixel OLS of (mean_frame(s) - ble(s)) against s.
inline CalibrationProfile fit_fpn(std::span<const IsoMeanFrame> mean_frames, const IsoTable& ble_table,
                                  std::string sensor_id = {}) {
  require(mean_frames.size() >= 2, ErrorCode::insufficient_data, "FPN regression needs at least 2 ISOs");
  std::set<std::uint32_t> distinct;
  for (const auto& m : mean_frames) distinct.insert(m.iso);
  require(distinct.size() >= 2, ErrorCode::rank, "FPN regression needs at least 2 distinct ISOs");

  const RawFrame& first = mean_frames.front().mean_frame;
  const std::size_t n_pix = first.pixels.size();
  std::vector<std::vector<double>> ys;
  std::vector<double> isos;
  for (const auto& m : mean_frames) {
    require(same_geometry(m.mean_frame.meta, first.meta) && m.mean_frame.pixels.size() == n_pix, ErrorCode::dimension,
            "calibration mean frames differ in geometry");
    const auto ble_it = ble_table.find(m.iso);
    require(ble_it != ble_table.end(), ErrorCode::coverage, "BLE table lacks calibration ISO " + std::to_string(m.iso));
    RawFrame y = subtract_black(m.mean_frame);
    for (double& v : y.pixels.data) v -= ble_it->second;
    ys.push_back(std::move(y.pixels.data));
    isos.push_back(m.iso);
  }

  const double n = static_cast<double>(isos.size());
  double x_mean = 0.0;
  for (double x : isos) x_mean += x;
  x_mean /= n;
  double sxx = 0.0;
  for (double x : isos) sxx += (x - x_mean) * (x - x_mean);
  // slope = sum_s w_s y_s, intercept = sum_s v_s y_s
  std::vector<double> w(isos.size()), v(isos.size());
  for (std::size_t s = 0; s < isos.size(); ++s) {
    w[s] = (isos[s] - x_mean) / sxx;
    v[s] = 1.0 / n - x_mean * w[s];
  }

  CalibrationProfile profile;
  profile.meta = first.meta;
  profile.sensor_id = std::move(sensor_id);
  profile.fpn_k_map.resize(n_pix);
  profile.fpn_b_map.resize(n_pix);
  parallel_for(n_pix, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      double k = 0.0, b = 0.0;
      for (std::size_t s = 0; s < ys.size(); ++s) {
        k += w[s] * ys[s][i];
        b += v[s] * ys[s][i];
      }
      profile.fpn_k_map[i] = static_cast<float>(k);
      profile.fpn_b_map[i] = static_cast<float>(b);
    }
  });

  for (std::size_t s = 0; s < ys.size(); ++s) {
    double ss = 0.0;
    for (std::size_t i = 0; i < n_pix; ++i) {
      const double r = ys[s][i] - (static_cast<double>(profile.fpn_k_map[i]) * isos[s] +
                                   static_cast<double>(profile.fpn_b_map[i]));
      ss += r * r;
    }
    profile.residual_rms[static_cast<std::uint32_t>(isos[s])] = std::sqrt(ss / static_cast<double>(n_pix));
  }
  for (const auto iso : distinct) profile.ble_table[iso] = ble_table.at(iso);
  profile.calibration_isos.assign(distinct.begin(), distinct.end());
  return profile;
}

// Averages each ISO stack, tabulates BLE, and fits the FPN maps.
inline CalibrationProfile calibrate_dark(std::span<const DarkFrameSet> sets, std::string sensor_id = {}) {
  std::vector<IsoMeanFrame> means;
  IsoTable ble;
  for (const auto& set : sets) {
    DarkAverage avg = average_dark_frames(set);
    ble[set.iso] = compute_ble(avg.mean_frame);
    means.push_back({set.iso, std::move(avg.mean_frame)});
  }
  return fit_fpn(means, ble, std::move(sensor_id));
}

inline double snap_shading(double v) noexcept { return std::nearbyint(v / kShadingResolution) * kShadingResolution; }

// Dark shading at `iso` in black-subtracted DN.
inline RawFrame reconstruct_dark_shading(const CalibrationProfile& profile, std::uint32_t iso) {
  require(iso > 0, ErrorCode::domain, "iso must be positive");
  const double offset = profile.ble(iso);
  RawFrame out(profile.meta, SampleKind::real);
  out.meta.iso = iso;
  out.black_subtracted = true;
  for (std::size_t i = 0; i < out.pixels.size(); ++i)
    out.pixels.data[i] = snap_shading(static_cast<double>(profile.fpn_k_map[i]) * iso +
                                      static_cast<double>(profile.fpn_b_map[i]) + offset);
  return out;
}

// noisy - black - D_ds(noisy ISO). Output may be negative and is not clipped.
inline RawFrame correct_frame(const RawFrame& noisy, const CalibrationProfile& profile) {
  require(same_geometry(noisy.meta, profile.meta) && noisy.pixels.size() == profile.fpn_k_map.size(),
          ErrorCode::profile, "calibration profile does not match the frame's sensor geometry");
  const RawFrame shading = reconstruct_dark_shading(profile, noisy.meta.iso);
  RawFrame out = subtract_black(noisy);
  for (std::size_t i = 0; i < out.pixels.size(); ++i) out.pixels.data[i] -= shading.pixels.data[i];
  return out;
}

// ---------------------------------------------------------------------------
// Persistence

inline Container to_container(const CalibrationProfile& p) {
  const std::size_t n = std::size_t{p.meta.width} * p.meta.height;
  require(p.fpn_k_map.size() == n && p.fpn_b_map.size() == n, ErrorCode::dimension,
          "FPN maps do not match profile dimensions");
  Container c;
  c.kind = ContainerKind::calibration_profile;
  c.encoding = SampleEncoding::f32;
  put_sensor_meta(c.metadata, p.meta);
  c.metadata["profile.sensor_id"] = p.sensor_id;
  std::string isos;
  for (std::size_t i = 0; i < p.calibration_isos.size(); ++i)
    isos += (i ? "," : "") + std::to_string(p.calibration_isos[i]);
  c.metadata["profile.calibration_isos"] = isos;
  for (const auto& [iso, v] : p.ble_table) c.metadata["profile.ble." + std::to_string(iso)] = format_number(v);
  for (const auto& [iso, v] : p.residual_rms)
    c.metadata["profile.residual_rms." + std::to_string(iso)] = format_number(v);
  c.metadata["profile.ble_interpolate"] = p.ble_policy.interpolate ? "1" : "0";
  c.metadata["profile.ble_extrapolate"] = p.ble_policy.extrapolate ? "1" : "0";
  Plane k(p.meta.width, p.meta.height), b(p.meta.width, p.meta.height);
  std::copy(p.fpn_k_map.begin(), p.fpn_k_map.end(), k.data.begin());
  std::copy(p.fpn_b_map.begin(), p.fpn_b_map.end(), b.data.begin());
  c.planes = {std::move(k), std::move(b)};
  return c;
}

inline CalibrationProfile profile_from_container(const Container& c) {
  require(c.kind == ContainerKind::calibration_profile && c.planes.size() == 2, ErrorCode::format,
          "container does not hold a calibration profile");
  CalibrationProfile p;
  p.meta = get_sensor_meta(c.metadata);
  require(c.planes[0].width == p.meta.width && c.planes[0].height == p.meta.height, ErrorCode::dimension,
          "profile maps do not match metadata dimensions");
  p.sensor_id = get_key(c.metadata, "profile.sensor_id");
  for (double v : parse_number_list(get_key(c.metadata, "profile.calibration_isos"), "profile.calibration_isos"))
    p.calibration_isos.push_back(static_cast<std::uint32_t>(v));
  p.ble_table = get_iso_table(c.metadata, "profile.ble.");
  p.residual_rms = get_iso_table(c.metadata, "profile.residual_rms.");
  p.ble_policy.interpolate = get_key(c.metadata, "profile.ble_interpolate") == "1";
  p.ble_policy.extrapolate = get_key(c.metadata, "profile.ble_extrapolate") == "1";
  p.fpn_k_map.assign(c.planes[0].data.begin(), c.planes[0].data.end());
  p.fpn_b_map.assign(c.planes[1].data.begin(), c.planes[1].data.end());
  return p;
}

inline void write_profile(const CalibrationProfile& p, const std::filesystem::path& path) {
  write_container(to_container(p), path);
}

inline CalibrationProfile read_profile(const std::filesystem::path& path) {
  return profile_from_container(read_container_file(path));
}

}  // namespace rawnoise
