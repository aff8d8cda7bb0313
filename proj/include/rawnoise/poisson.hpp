#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "rawnoise/error.hpp"
#include "rawnoise/parallel.hpp"
#include "rawnoise/random.hpp"

namespace rawnoise {

// Rates below this use exact samplers; at or above it the normal
// approximation floor(lambda + sqrt(lambda) * z + 1/2) (continuity-corrected
// rounding, clamped at zero) is used.
inline constexpr double kPoissonNormalThreshold = 1000.0;
// Below this rate the multiplication (inversion) method is cheapest.
inline constexpr double kPoissonInversionThreshold = 10.0;

namespace detail {

inline std::int64_t poisson_inversion(double lambda, CounterEngine& eng) {
  const double limit = std::exp(-lambda);
  double prod = eng.uniform();
  std::int64_t k = 0;
  while (prod > limit) {
    prod *= eng.uniform();
    ++k;
  }
  return k;
}

// Transformed rejection with squeeze (Hormann 1993), exact for lambda >= 10.
inline std::int64_t poisson_ptrs(double lambda, CounterEngine& eng) {
  const double slam = std::sqrt(lambda);
  const double loglam = std::log(lambda);
  const double b = 0.931 + 2.53 * slam;
  const double a = -0.059 + 0.02483 * b;
  const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
  const double vr = 0.9277 - 3.6224 / (b - 2.0);
  while (true) {
    const double u = eng.uniform() - 0.5;
    const double v = eng.uniform();
    const double us = 0.5 - std::fabs(u);
    const double k = std::floor((2.0 * a / us + b) * u + lambda + 0.43);
    if (us >= 0.07 && v <= vr) return static_cast<std::int64_t>(k);
    if (k < 0.0 || (us < 0.013 && v > us)) continue;
    if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <= -lambda + k * loglam - std::lgamma(k + 1.0))
      return static_cast<std::int64_t>(k);
  }
}

}  // namespace detail

// One Poisson draw. The caller guarantees lambda is finite and >= 0.
inline std::int64_t poisson_draw(double lambda, CounterEngine& eng) {
  if (lambda <= 0.0) return 0;
  if (lambda < kPoissonInversionThreshold) return detail::poisson_inversion(lambda, eng);
  if (lambda < kPoissonNormalThreshold) return detail::poisson_ptrs(lambda, eng);
  const double x = std::floor(lambda + std::sqrt(lambda) * eng.normal() + 0.5);
  return x < 0.0 ? 0 : static_cast<std::int64_t>(x);
}

inline void check_rate(double lambda) {
  require(std::isfinite(lambda) && lambda >= 0.0, ErrorCode::domain, "Poisson rate must be finite and non-negative");
}

// Element i draws from engine (rng, i), so the output does not depend on how
// the work is split.
inline std::vector<std::int64_t> sample_poisson(std::span<const double> rate, const RandomSource& rng) {
  for (double r : rate) check_rate(r);
  std::vector<std::int64_t> out(rate.size());
  parallel_for(rate.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      CounterEngine eng = rng.engine(static_cast<std::uint32_t>(i));
      out[i] = poisson_draw(rate[i], eng);
    }
  });
  return out;
}

}  // namespace rawnoise
