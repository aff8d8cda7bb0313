#pragma once

// Counter-based random numbers. Every draw is a pure function of
// (seed, stream, element, sub-counter), so per-pixel sampling gives the same
// result no matter how the work is split across threads or tiles.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace rawnoise {

// Philox4x32-10 (Salmon et al., "Parallel random numbers: as easy as 1, 2, 3").
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr Counter generate(Counter ctr, Key key) noexcept {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += 0x9E3779B9u;
        key[1] += 0xBB67AE85u;
      }
      const std::uint64_t p0 = std::uint64_t{0xD2511F53u} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{0xCD9E8D57u} * ctr[2];
      const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const auto lo0 = static_cast<std::uint32_t>(p0);
      const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const auto lo1 = static_cast<std::uint32_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
  }
};

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Maps two 32-bit words to a double in the open interval (0, 1) with 53 bits.
constexpr double open_unit(std::uint32_t hi, std::uint32_t lo) noexcept {
  const std::uint64_t bits = (std::uint64_t{hi >> 5} << 26) | (lo >> 6);
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

// Sequential engine bound to one (seed, stream, element) triple. Satisfies
// UniformRandomBitGenerator so it can also feed <random> distributions.
class CounterEngine {
 public:
  using result_type = std::uint32_t;

  constexpr CounterEngine(std::uint64_t seed, std::uint64_t stream, std::uint32_t element) noexcept
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        stream_(stream),
        element_(element) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    if (used_ == 4) refill();
    return block_[used_++];
  }

  double uniform() noexcept {
    const std::uint32_t hi = (*this)();
    const std::uint32_t lo = (*this)();
    return open_unit(hi, lo);
  }

  // Box-Muller; the second variate of each pair is kept for the next call.
  double normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  void refill() noexcept {
    block_ = Philox4x32::generate({sub_++, element_, static_cast<std::uint32_t>(stream_),
                                   static_cast<std::uint32_t>(stream_ >> 32)},
                                  key_);
    used_ = 0;
  }

  Philox4x32::Key key_;
  std::uint64_t stream_;
  std::uint32_t element_;
  std::uint32_t sub_ = 0;
  Philox4x32::Counter block_{};
  int used_ = 4;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// A seed plus a stream identifier. Operations derive child streams per
// purpose so no two consumers ever share counter space.
class RandomSource {
 public:
  constexpr explicit RandomSource(std::uint64_t seed, std::uint64_t stream = 0) noexcept
      : seed_(seed), stream_(stream) {}

  constexpr std::uint64_t seed() const noexcept { return seed_; }
  constexpr std::uint64_t stream() const noexcept { return stream_; }

  constexpr RandomSource derive(std::uint64_t tag) const noexcept {
    return RandomSource(seed_, splitmix64(stream_ ^ splitmix64(tag + 0x632BE59BD9B4E019ull)));
  }

  constexpr CounterEngine engine(std::uint32_t element = 0) const noexcept {
    return CounterEngine(seed_, stream_, element);
  }

  // Two standard normals for pair index p, used for bulk Gaussian fills where
  // element 2p takes the first and 2p+1 the second.
  std::array<double, 2> normal_pair(std::uint32_t p) const noexcept {
    const auto w = Philox4x32::generate(
        {0, p, static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)},
        {static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32)});
    const double r = std::sqrt(-2.0 * std::log(open_unit(w[0], w[1])));
    const double theta = 2.0 * std::numbers::pi * open_unit(w[2], w[3]);
    return {r * std::cos(theta), r * std::sin(theta)};
  }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
};

// Stream tags, kept in one place so derived streams never collide.
namespace stream_tag {
inline constexpr std::uint64_t read_noise = 1;
inline constexpr std::uint64_t shot_noise = 2;
inline constexpr std::uint64_t fpn_slope = 3;
inline constexpr std::uint64_t fpn_intercept = 4;
inline constexpr std::uint64_t fpn_rows = 5;
inline constexpr std::uint64_t sna_apply = 10;
inline constexpr std::uint64_t sna_gains = 11;
inline constexpr std::uint64_t sna_increments = 12;
inline constexpr std::uint64_t patch_layout = 20;
inline constexpr std::uint64_t patch_transform = 21;
}  // namespace stream_tag

}  // namespace rawnoise
