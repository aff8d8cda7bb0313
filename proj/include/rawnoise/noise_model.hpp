#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rawnoise/container.hpp"
#include "rawnoise/iso_table.hpp"
#include "rawnoise/parallel.hpp"
#include "rawnoise/poisson.hpp"
#include "rawnoise/random.hpp"
#include "rawnoise/raw_frame.hpp"

namespace rawnoise {

// ---------------------------------------------------------------------------
// Poisson-Gaussian synthesis

namespace detail {

// Adds sigma * N(0, 1) to every element; element i uses half i % 2 of
// normal pair i / 2 from `rng`.
inline void add_gaussian(std::span<double> values, double sigma, const RandomSource& rng) {
  if (sigma == 0.0) return;
  const std::size_t n = values.size();
  parallel_for((n + 1) / 2, [&](std::size_t begin, std::size_t end) {
    for (std::size_t p = begin; p < end; ++p) {
      const auto z = rng.normal_pair(static_cast<std::uint32_t>(p));
      values[2 * p] += sigma * z[0];
      if (2 * p + 1 < n) values[2 * p + 1] += sigma * z[1];
    }
  });
}

// values[i] += k * Poisson(rate[i]) with one engine per element.
inline void add_scaled_poisson(std::span<double> values, std::span<const double> rate, double k,
                               const RandomSource& rng) {
  parallel_for(values.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      CounterEngine eng = rng.engine(static_cast<std::uint32_t>(i));
      values[i] += k * static_cast<double>(poisson_draw(rate[i], eng));
    }
  });
}

}  // namespace detail

// D = K * P((clean - black) / K) + N(0, read_sigma) + black. Output stays in
// the input's domain (raw or black-subtracted). Unless `quantize` overrides,
// quantized input yields quantized output (round half even, clip to white).
inline RawFrame synthesize_pg(const RawFrame& clean, double k, double read_sigma, const RandomSource& rng,
                              std::optional<bool> quantize = std::nullopt) {
  require(k > 0.0 && std::isfinite(k), ErrorCode::domain, "system gain K must be positive");
  require(read_sigma >= 0.0, ErrorCode::domain, "read noise sigma must be non-negative");
  const bool q = quantize.value_or(clean.kind == SampleKind::quantized);
  require(!(q && clean.black_subtracted), ErrorCode::domain, "quantized output requires a raw-domain input");

  const std::size_t w = clean.width();
  std::vector<double> rate(clean.pixels.size());
  std::vector<double> out(clean.pixels.size());
  for (std::size_t i = 0; i < rate.size(); ++i) {
    const double black = clean.black_subtracted ? 0.0 : clean.meta.black_at(i % w, i / w);
    const double signal = clean.pixels.data[i] - black;
    require(signal >= 0.0 && std::isfinite(signal), ErrorCode::domain, "clean frame below black level");
    rate[i] = signal / k;
    out[i] = black;
  }
  detail::add_scaled_poisson(out, rate, k, rng.derive(stream_tag::shot_noise));
  detail::add_gaussian(out, read_sigma, rng.derive(stream_tag::read_noise));

  RawFrame result = clean;
  result.kind = q ? SampleKind::quantized : SampleKind::real;
  result.pixels.data = std::move(out);
  if (q)
    for (double& v : result.pixels.data) v = quantize_dn(v, clean.meta.white_level);
  return result;
}

// ---------------------------------------------------------------------------
// Synthetic sensor

// Ground truth for the simulator: the expectation of a dark frame at ISO s is
// black + fpn_k * s + fpn_b + ble(s), exactly.
struct SensorSpec {
  SensorMeta meta;
  double system_gain_k = 1.0;
  double read_sigma = 0.0;
  std::vector<float> fpn_k_map;  // DN per ISO unit
  std::vector<float> fpn_b_map;  // DN
  IsoTable ble_table;
  bool quantize = true;

  void validate() const {
    meta.validate();
    require(system_gain_k > 0.0, ErrorCode::domain, "system gain must be positive");
    require(read_sigma >= 0.0, ErrorCode::domain, "read sigma must be non-negative");
    const std::size_t n = std::size_t{meta.width} * meta.height;
    require(fpn_k_map.size() == n && fpn_b_map.size() == n, ErrorCode::dimension,
            "FPN maps do not match sensor dimensions");
    require(!ble_table.empty(), ErrorCode::domain, "BLE table is empty");
  }

  double ble(double iso) const { return lookup_iso(ble_table, iso, {}, ErrorCode::domain); }

  // Dark shading in black-subtracted DN.
  RawFrame dark_shading(std::uint32_t iso) const {
    const double offset = ble(iso);
    RawFrame f(meta, SampleKind::real);
    f.meta.iso = iso;
    f.black_subtracted = true;
    for (std::size_t i = 0; i < f.pixels.size(); ++i)
      f.pixels.data[i] = static_cast<double>(fpn_k_map[i]) * iso + static_cast<double>(fpn_b_map[i]) + offset;
    return f;
  }

  // Noise-free dark frame in raw DN (before quantization).
  RawFrame expected_dark_frame(std::uint32_t iso) const {
    RawFrame f = dark_shading(iso);
    f.black_subtracted = false;
    for (std::size_t i = 0; i < f.pixels.size(); ++i) f.pixels.data[i] += meta.black_at(i % meta.width, i / meta.width);
    return f;
  }
};

// Gaussian field with standard deviation `stddev`; a fraction `row_share` of
// the variance is shared along each row.
inline std::vector<float> make_fpn_field(std::size_t width, std::size_t height, double stddev, double row_share,
                                         const RandomSource& rng) {
  require(row_share >= 0.0 && row_share <= 1.0, ErrorCode::domain, "row share must lie in [0, 1]");
  std::vector<double> field(width * height, 0.0);
  detail::add_gaussian(field, stddev * std::sqrt(1.0 - row_share), rng.derive(stream_tag::fpn_intercept));
  std::vector<double> rows(height, 0.0);
  detail::add_gaussian(rows, stddev * std::sqrt(row_share), rng.derive(stream_tag::fpn_rows));
  std::vector<float> out(field.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<float>(field[i] + rows[i / width]);
  return out;
}

struct SensorSimConfig {
  std::uint32_t width = 256;
  std::uint32_t height = 256;
  std::string cfa = "RGGB";
  double black_level = 512.0;
  double white_level = 16383.0;
  double system_gain_k = 2.0;
  double read_sigma = 2.0;
  double fpn_k_std = 2e-5;
  double fpn_b_std = 1.0;
  double row_share = 0.0;
  bool quantize = true;
  IsoTable ble_table{{100, 0.4},   {200, -0.3},  {400, 0.8},   {800, 1.5},   {1600, 0.9},
                     {3200, 2.1},  {6400, 3.2},  {12800, 1.1}, {25600, 4.0}};
};

inline SensorSpec make_sensor_spec(const SensorSimConfig& cfg, const RandomSource& rng) {
  SensorSpec spec;
  spec.meta.width = cfg.width;
  spec.meta.height = cfg.height;
  spec.meta.cfa_pattern = cfg.cfa;
  spec.meta.black_level.fill(cfg.black_level);
  spec.meta.white_level = cfg.white_level;
  spec.meta.system_gain_k = cfg.system_gain_k;
  spec.system_gain_k = cfg.system_gain_k;
  spec.read_sigma = cfg.read_sigma;
  spec.fpn_k_map = make_fpn_field(cfg.width, cfg.height, cfg.fpn_k_std, cfg.row_share, rng.derive(stream_tag::fpn_slope));
  spec.fpn_b_map = make_fpn_field(cfg.width, cfg.height, cfg.fpn_b_std, cfg.row_share, rng.derive(stream_tag::fpn_intercept));
  spec.ble_table = cfg.ble_table;
  spec.quantize = cfg.quantize;
  spec.validate();
  return spec;
}

namespace detail {

inline RawFrame simulate_frame(const SensorSpec& spec, std::uint32_t iso, double exposure, const Plane* electrons,
                               double electron_rate, const RandomSource& rng) {
  require(exposure > 0.0, ErrorCode::domain, "exposure must be positive");
  require(std::isfinite(electron_rate) && electron_rate >= 0.0, ErrorCode::domain, "electron rate must be >= 0");
  RawFrame f = spec.expected_dark_frame(iso);
  f.meta.exposure_time = exposure;
  f.meta.system_gain_k = spec.system_gain_k;
  if (electrons || electron_rate > 0.0) {
    std::vector<double> rate(f.pixels.size(), electron_rate);
    if (electrons) {
      require(electrons->width == f.width() && electrons->height == f.height(), ErrorCode::dimension,
              "electron map does not match sensor");
      for (std::size_t i = 0; i < rate.size(); ++i) {
        check_rate(electrons->data[i]);
        rate[i] = electrons->data[i];
      }
    }
    add_scaled_poisson(f.pixels.data, rate, spec.system_gain_k, rng.derive(stream_tag::shot_noise));
  }
  add_gaussian(f.pixels.data, spec.read_sigma, rng.derive(stream_tag::read_noise));
  if (spec.quantize) {
    f.kind = SampleKind::quantized;
    for (double& v : f.pixels.data) v = quantize_dn(v, spec.meta.white_level);
  }
  return f;
}

}  // namespace detail

// Each call consumes only `rng`; derive a distinct source per frame.
inline RawFrame simulate_dark_frame(const SensorSpec& spec, std::uint32_t iso, double exposure,
                                    const RandomSource& rng) {
  return detail::simulate_frame(spec, iso, exposure, nullptr, 0.0, rng);
}

// Uniform illumination of `electron_rate` photo-electrons per pixel.
inline RawFrame simulate_flat_frame(const SensorSpec& spec, std::uint32_t iso, double electron_rate,
                                    const RandomSource& rng, double exposure = 1.0 / 30.0) {
  return detail::simulate_frame(spec, iso, exposure, nullptr, electron_rate, rng);
}

inline RawFrame simulate_scene_frame(const SensorSpec& spec, std::uint32_t iso, const Plane& electrons,
                                     const RandomSource& rng, double exposure = 1.0 / 30.0) {
  return detail::simulate_frame(spec, iso, exposure, &electrons, 0.0, rng);
}

// ---------------------------------------------------------------------------
// Photon transfer

struct PtcSample {
  double mean = 0.0;      // DN above black
  double variance = 0.0;  // temporal, DN^2
};

struct PTCEstimate {
  double system_gain_k = 0.0;
  double read_variance = 0.0;
  double fit_r2 = 0.0;
  std::vector<PtcSample> samples;
};

struct FlatPair {
  RawFrame a;
  RawFrame b;
};

// Least-squares line variance = K * mean + read_variance.
inline PTCEstimate fit_ptc_line(std::vector<PtcSample> samples) {
  require(samples.size() >= 3, ErrorCode::insufficient_data, "photon transfer needs at least 3 illumination levels");
  const double n = static_cast<double>(samples.size());
  double mx = 0.0, my = 0.0;
  for (const auto& s : samples) {
    mx += s.mean;
    my += s.variance;
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const auto& s : samples) {
    sxx += (s.mean - mx) * (s.mean - mx);
    sxy += (s.mean - mx) * (s.variance - my);
    syy += (s.variance - my) * (s.variance - my);
  }
  require(sxx > 0.0, ErrorCode::calibration_failed, "all illumination levels have the same mean");
  PTCEstimate est;
  est.system_gain_k = sxy / sxx;
  est.read_variance = my - est.system_gain_k * mx;
  require(est.system_gain_k > 0.0, ErrorCode::calibration_failed, "photon transfer slope is not positive");
  est.fit_r2 = syy > 0.0 ? std::clamp(sxy * sxy / (sxx * syy), 0.0, 1.0) : 1.0;
  est.samples = std::move(samples);
  return est;
}

// Temporal variance is var(A - B) / 2, which cancels fixed pattern noise.
inline PtcSample ptc_sample(const RawFrame& a, const RawFrame& b) {
  require(same_geometry(a.meta, b.meta) && a.pixels.size() == b.pixels.size() && !a.pixels.data.empty(),
          ErrorCode::pairing, "flat-field pair frames differ in geometry");
  const std::size_t w = a.width();
  const double n = static_cast<double>(a.pixels.size());
  double sum = 0.0, dsum = 0.0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    const double black = a.black_subtracted ? 0.0 : a.meta.black_at(i % w, i / w);
    sum += 0.5 * (a.pixels.data[i] + b.pixels.data[i]) - black;
    dsum += a.pixels.data[i] - b.pixels.data[i];
  }
  const double dmean = dsum / n;
  double ss = 0.0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    const double d = a.pixels.data[i] - b.pixels.data[i] - dmean;
    ss += d * d;
  }
  return {sum / n, ss / (n - 1.0) / 2.0};
}

inline PTCEstimate estimate_gain_ptc(std::span<const FlatPair> pairs) {
  require(pairs.size() >= 3, ErrorCode::insufficient_data, "photon transfer needs at least 3 illumination levels");
  std::vector<PtcSample> samples;
  samples.reserve(pairs.size());
  for (const auto& p : pairs) samples.push_back(ptc_sample(p.a, p.b));
  return fit_ptc_line(std::move(samples));
}

// ---------------------------------------------------------------------------
// Persistence: sensor metadata plus the two FPN maps as f32 planes.

inline Container to_container(const SensorSpec& spec) {
  spec.validate();
  Container c;
  c.kind = ContainerKind::sensor_spec;
  c.encoding = SampleEncoding::f32;
  put_sensor_meta(c.metadata, spec.meta);
  c.metadata["spec.system_gain_k"] = format_number(spec.system_gain_k);
  c.metadata["spec.read_sigma"] = format_number(spec.read_sigma);
  c.metadata["spec.quantize"] = spec.quantize ? "1" : "0";
  for (const auto& [iso, v] : spec.ble_table) c.metadata["spec.ble." + std::to_string(iso)] = format_number(v);
  Plane k(spec.meta.width, spec.meta.height), b(spec.meta.width, spec.meta.height);
  std::copy(spec.fpn_k_map.begin(), spec.fpn_k_map.end(), k.data.begin());
  std::copy(spec.fpn_b_map.begin(), spec.fpn_b_map.end(), b.data.begin());
  c.planes = {std::move(k), std::move(b)};
  return c;
}

inline IsoTable get_iso_table(const std::map<std::string, std::string>& md, const std::string& prefix) {
  IsoTable table;
  for (const auto& [key, value] : md)
    if (key.starts_with(prefix))
      table[static_cast<std::uint32_t>(parse_number(std::string_view(key).substr(prefix.size()), key))] =
          parse_number(value, key);
  return table;
}

inline SensorSpec sensor_spec_from_container(const Container& c) {
  require(c.kind == ContainerKind::sensor_spec && c.planes.size() == 2, ErrorCode::format,
          "container does not hold a sensor spec");
  SensorSpec spec;
  spec.meta = get_sensor_meta(c.metadata);
  spec.system_gain_k = parse_number(get_key(c.metadata, "spec.system_gain_k"), "spec.system_gain_k");
  spec.read_sigma = parse_number(get_key(c.metadata, "spec.read_sigma"), "spec.read_sigma");
  spec.quantize = get_key(c.metadata, "spec.quantize") == "1";
  spec.ble_table = get_iso_table(c.metadata, "spec.ble.");
  spec.fpn_k_map.assign(c.planes[0].data.begin(), c.planes[0].data.end());
  spec.fpn_b_map.assign(c.planes[1].data.begin(), c.planes[1].data.end());
  spec.validate();
  return spec;
}

inline void write_sensor_spec(const SensorSpec& spec, const std::filesystem::path& path) {
  write_container(to_container(spec), path);
}

inline SensorSpec read_sensor_spec(const std::filesystem::path& path) {
  return sensor_spec_from_container(read_container_file(path));
}

}  // namespace rawnoise
