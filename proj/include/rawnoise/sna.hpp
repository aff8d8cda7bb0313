#pragma once

// Shot noise augmentation. Poisson counts are additive, so raising a clean
// signal by dD >= 0 is matched on the noisy side by dN ~ K * P(dD / K): the
// augmented noisy image then follows the same noise law at the augmented
// clean level, including the unknown read-noise part.

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>

#include "rawnoise/noise_model.hpp"
#include "rawnoise/poisson.hpp"
#include "rawnoise/random.hpp"
#include "rawnoise/raw_frame.hpp"

namespace rawnoise {

struct GainTriple {
  double r = 1.0;
  double g = 1.0;
  double b = 1.0;

  double for_channel(int channel) const noexcept {
    return channel == kRed ? r : channel == kBlue ? b : g;
  }
  bool operator==(const GainTriple&) const = default;
};

enum class SaturationPolicy { clip_to_white, reject_patch };

struct SnaConfig {
  double mu = 0.5;
  double sigma = 0.25;
  double apply_probability = 0.75;
  SaturationPolicy saturation_policy = SaturationPolicy::clip_to_white;
  // Patches with more clipped pixels than this are flagged (clip_to_white)
  // or left unaugmented (reject_patch).
  double flag_clip_fraction = 0.01;

  double max_gain() const noexcept { return 4.0 * mu + 1.0; }

  void validate() const {
    require(mu > 0.0 && std::isfinite(mu), ErrorCode::config, "mu must be positive");
    require(sigma > 0.0 && std::isfinite(sigma), ErrorCode::config, "sigma must be positive");
    require(apply_probability >= 0.0 && apply_probability <= 1.0, ErrorCode::config,
            "apply probability must lie in [0, 1]");
    require(flag_clip_fraction >= 0.0 && flag_clip_fraction <= 1.0, ErrorCode::config,
            "flag clip fraction must lie in [0, 1]");
  }
};

// eps_g ~ N(mu + 1, sigma), eps_r, eps_b ~ N(1, sigma);
// gain_g = clip(eps_g), gain_r = clip(gain_g * eps_r), gain_b = clip(gain_g * eps_b),
// every clip to [1, 4 mu + 1].
inline GainTriple sample_gains(const SnaConfig& config, const RandomSource& rng) {
  config.validate();
  CounterEngine eng = rng.derive(stream_tag::sna_gains).engine();
  const double eps_g = config.mu + 1.0 + config.sigma * eng.normal();
  const double eps_r = 1.0 + config.sigma * eng.normal();
  const double eps_b = 1.0 + config.sigma * eng.normal();
  const double hi = config.max_gain();
  GainTriple gains;
  gains.g = std::clamp(eps_g, 1.0, hi);
  gains.r = std::clamp(gains.g * eps_r, 1.0, hi);
  gains.b = std::clamp(gains.g * eps_b, 1.0, hi);
  return gains;
}

struct Increments {
  std::array<Plane, kChannelCount> delta_d;
  std::array<Plane, kChannelCount> delta_n;
};

// delta_d = (gain - 1) * clean per channel, delta_n = K * P(delta_d / K).
// Draw for channel c, pixel i uses engine element c * plane_size + i.
inline Increments make_increments(const PackedImage& clean, const GainTriple& gains, double k,
                                  const RandomSource& rng) {
  require(k > 0.0 && std::isfinite(k), ErrorCode::domain, "system gain K must be positive");
  require(clean.black_subtracted, ErrorCode::domain, "subtract the black level before augmenting");
  require(gains.r >= 1.0 && gains.g >= 1.0 && gains.b >= 1.0, ErrorCode::domain, "gains must be >= 1");
  const RandomSource draws = rng.derive(stream_tag::sna_increments);
  Increments inc;
  const std::size_t plane_size = clean.channels[0].size();
  for (int c = 0; c < kChannelCount; ++c) {
    const Plane& src = clean.channels[c];
    const double extra = gains.for_channel(c) - 1.0;
    inc.delta_d[c] = Plane(src.width, src.height);
    inc.delta_n[c] = Plane(src.width, src.height);
    for (std::size_t i = 0; i < src.size(); ++i) {
      require(src.data[i] >= 0.0 && std::isfinite(src.data[i]), ErrorCode::domain,
              "clean image has negative values; subtract the black level first");
      inc.delta_d[c].data[i] = extra * src.data[i];
    }
    const std::size_t base = static_cast<std::size_t>(c) * plane_size;
    parallel_for(src.size(), [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) {
        CounterEngine eng = draws.engine(static_cast<std::uint32_t>(base + i));
        inc.delta_n[c].data[i] = k * static_cast<double>(poisson_draw(inc.delta_d[c].data[i] / k, eng));
      }
    });
  }
  return inc;
}

struct AugmentResult {
  PackedImage clean;
  PackedImage noisy;
  bool applied = false;
  bool rejected = false;
  std::optional<GainTriple> gains;
  double clip_fraction = 0.0;
  bool flagged = false;
};

inline void check_pair(const PackedImage& clean, const PackedImage& noisy) {
  require(same_geometry(clean.meta, noisy.meta) && clean.meta.black_level == noisy.meta.black_level &&
              clean.meta.white_level == noisy.meta.white_level,
          ErrorCode::pairing, "clean and noisy metadata differ");
  for (int c = 0; c < kChannelCount; ++c)
    require(clean.channels[c].width == noisy.channels[c].width && clean.channels[c].height == noisy.channels[c].height,
            ErrorCode::pairing, "clean and noisy planes differ in shape");
  require(clean.black_subtracted && noisy.black_subtracted, ErrorCode::pairing,
          "augmentation pairs must both be black-subtracted");
}

// Applies fixed gains; the saturation policy comes from `config`.
inline AugmentResult augment_pair_with_gains(const PackedImage& clean, const PackedImage& noisy, const GainTriple& gains,
                                             const SnaConfig& config, double k, const RandomSource& rng) {
  check_pair(clean, noisy);
  const Increments inc = make_increments(clean, gains, k, rng);

  AugmentResult out{clean, noisy, true, false, gains, 0.0, false};
  out.clean.kind = out.noisy.kind = SampleKind::real;
  std::size_t clipped = 0, total = 0;
  for (int c = 0; c < kChannelCount; ++c) {
    const double ceiling = clean.ceiling(c);
    auto& cp = out.clean.channels[c].data;
    auto& np = out.noisy.channels[c].data;
    for (std::size_t i = 0; i < cp.size(); ++i) {
      cp[i] += inc.delta_d[c].data[i];
      np[i] += inc.delta_n[c].data[i];
      if (cp[i] > ceiling || np[i] > ceiling) {
        ++clipped;
        cp[i] = std::min(cp[i], ceiling);
        np[i] = std::min(np[i], ceiling);
      }
    }
    total += cp.size();
  }
  out.clip_fraction = total ? static_cast<double>(clipped) / static_cast<double>(total) : 0.0;
  out.flagged = out.clip_fraction > config.flag_clip_fraction;
  if (out.flagged && config.saturation_policy == SaturationPolicy::reject_patch) {
    out.clean = clean;
    out.noisy = noisy;
    out.applied = false;
    out.rejected = true;
  }
  return out;
}

// With probability apply_probability: sample gains, add dD to the clean image
// and dN to the noisy one. Otherwise the pair passes through unchanged.
inline AugmentResult augment_pair(const PackedImage& clean, const PackedImage& noisy, const SnaConfig& config, double k,
                                  const RandomSource& rng) {
  config.validate();
  check_pair(clean, noisy);
  CounterEngine coin = rng.derive(stream_tag::sna_apply).engine();
  if (!(coin.uniform() < config.apply_probability)) {
    AugmentResult passthrough;
    passthrough.clean = clean;
    passthrough.noisy = noisy;
    return passthrough;
  }
  return augment_pair_with_gains(clean, noisy, sample_gains(config, rng), config, k, rng);
}

}  // namespace rawnoise
