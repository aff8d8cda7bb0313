// Acceptance suite. `acceptance <criterion>` runs one criterion, `acceptance`
// or `acceptance all` runs every one. Each prints a single PASS/FAIL line;
// the exit status is non-zero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "cli_app.hpp"
#include "rawnoise/rawnoise.hpp"

namespace {

using namespace rawnoise;
using Clock = std::chrono::steady_clock;

// ---------------------------------------------------------------------------
// Pinned thresholds

constexpr double kPtcGainK = 2.0;
constexpr double kPtcReadSigma = 2.0;
constexpr int kPtcLevels = 20;
constexpr double kPtcMinFraction = 0.01;
constexpr double kPtcMaxFraction = 0.50;
constexpr double kPtcMaxSeconds = 10.0;

constexpr double kSnaLevel = 500.0;
constexpr double kSnaK = 4.0;
constexpr double kSnaGain = 1.5;
constexpr std::size_t kSnaMinPixels = 100000;
constexpr double kSnaMomentMaxSeconds = 5.0;

constexpr std::size_t kEquivRepetitions = 10000;
constexpr std::uint32_t kEquivPatch = 16;  // mosaic side; 8x8 per channel plane
constexpr double kEquivReadSigma = 2.0;
constexpr std::size_t kEquivBins = 100;
constexpr double kEquivMaxSeconds = 60.0;

constexpr std::uint32_t kDscSize = 512;
constexpr double kDscReadSigma = 5.0;
constexpr double kDscKStd = 2e-5;
constexpr double kDscBStd = 1.0;
constexpr std::uint32_t kDscTestIso = 25600;
constexpr std::uint32_t kResidualIso = 6400;
constexpr std::size_t kResidualFrames = 1000;
constexpr double kDscMaxSeconds = 120.0;
constexpr double kResidualMaxSeconds = 60.0;

constexpr std::size_t kFuzzFrames = 100;

const std::vector<std::uint32_t> kCalibrationIsos{100, 200, 400, 800, 1600, 3200, 6400, 12800, 25600};

// ---------------------------------------------------------------------------

struct Verdict {
  bool passed = true;
  std::ostringstream detail;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      passed = false;
      detail << " [failed: " << what << "]";
    }
  }
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string num(double v, int precision = 6) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double correlation(std::span<const float> a, std::span<const float> b) {
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(a.size());
  mb /= static_cast<double>(b.size());
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  return sab / std::sqrt(saa * sbb);
}

double rmse(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s / static_cast<double>(a.size()));
}

// ---------------------------------------------------------------------------
// PTC

Verdict ptc_gain_recovery() {
  Verdict v;
  const auto t0 = Clock::now();
  SensorSimConfig cfg;
  cfg.width = cfg.height = 256;
  cfg.system_gain_k = kPtcGainK;
  cfg.read_sigma = kPtcReadSigma;
  const SensorSpec spec = make_sensor_spec(cfg, RandomSource(2024));
  const double full_well_e = (spec.meta.white_level - cfg.black_level) / spec.system_gain_k;
  const RandomSource rng(2025);
  std::vector<FlatPair> pairs;
  for (int i = 0; i < kPtcLevels; ++i) {
    const double frac = kPtcMinFraction + (kPtcMaxFraction - kPtcMinFraction) * i / (kPtcLevels - 1);
    pairs.push_back({simulate_flat_frame(spec, 100, frac * full_well_e, rng.derive(2 * i)),
                     simulate_flat_frame(spec, 100, frac * full_well_e, rng.derive(2 * i + 1))});
  }
  const PTCEstimate est = estimate_gain_ptc(pairs);
  const double elapsed = seconds_since(t0);
  const double rel = std::fabs(est.system_gain_k - kPtcGainK) / kPtcGainK;
  v.detail << "K=" << num(est.system_gain_k) << " rel_err=" << num(rel, 3) << " r2=" << num(est.fit_r2, 8)
           << " read_var=" << num(est.read_variance, 4) << " time=" << num(elapsed, 3) << "s";
  v.check(rel <= tolerances::kPtcGainRelError, "K within 2%");
  v.check(est.fit_r2 > tolerances::kPtcMinR2, "r2 > 0.999");
  v.check(elapsed < kPtcMaxSeconds, "runtime < 10 s");
  return v;
}

// ---------------------------------------------------------------------------
// SNA

PackedImage constant_packed(const SensorMeta& meta, double level) {
  PackedImage img;
  img.meta = meta;
  img.kind = SampleKind::real;
  img.black_subtracted = true;
  for (auto& p : img.channels) p = Plane(meta.width / 2, meta.height / 2, level);
  return img;
}

Verdict sna_moment_identity() {
  Verdict v;
  const auto t0 = Clock::now();
  SensorMeta meta;
  meta.width = meta.height = 320;  // 4 planes of 160x160 = 102400 pixels
  const PackedImage clean = constant_packed(meta, kSnaLevel);
  const Increments inc = make_increments(clean, {kSnaGain, kSnaGain, kSnaGain}, kSnaK, RandomSource(77));
  std::vector<double> dn;
  for (const Plane& p : inc.delta_n) dn.insert(dn.end(), p.data.begin(), p.data.end());
  const double expected_mean = (kSnaGain - 1.0) * kSnaLevel;  // 250 DN
  const double expected_var = kSnaK * expected_mean;          // 1000 DN^2
  const TestReport r = moment_match_test(dn, expected_mean, expected_var, tolerances::kSnaMeanRelError);
  const double elapsed = seconds_since(t0);
  const double mean_err = std::stod(r.details.at("mean_rel_error"));
  const double var_err = std::stod(r.details.at("variance_rel_error"));
  v.detail << "pixels=" << dn.size() << " mean=" << r.details.at("mean") << " var=" << r.details.at("variance")
           << " mean_rel_err=" << num(mean_err, 3) << " var_rel_err=" << num(var_err, 3) << " time=" << num(elapsed, 3)
           << "s";
  v.check(dn.size() >= kSnaMinPixels, "at least 1e5 pixels");
  v.check(mean_err <= tolerances::kSnaMeanRelError, "mean within 1%");
  v.check(var_err <= tolerances::kSnaVarRelError, "variance within 3%");
  v.check(elapsed < kSnaMomentMaxSeconds, "runtime < 5 s");
  return v;
}

// Augments simulator pairs with fixed gains and compares against frames
// synthesized directly at the augmented exposure.
struct EquivalenceRun {
  std::array<double, 3> mean_err{};  // per gain group (R, G, B)
  std::array<double, 3> var_err{};
  double worst_pixel_var_err = 0.0;
  TestReport chi2;
};

EquivalenceRun run_equivalence(int trial) {
  SensorSimConfig cfg;
  cfg.width = cfg.height = kEquivPatch;
  cfg.system_gain_k = kSnaK;
  cfg.read_sigma = kEquivReadSigma;
  const SensorSpec spec = make_sensor_spec(cfg, RandomSource(500, trial));
  const GainTriple gains{1.3, 1.5, 1.8};
  const std::uint32_t iso = 800;

  Plane electrons(kEquivPatch, kEquivPatch, kSnaLevel / kSnaK);
  Plane boosted(kEquivPatch, kEquivPatch);
  const ChannelSites sites = parse_cfa(spec.meta.cfa_pattern);
  for (int c = 0; c < kChannelCount; ++c)
    for (std::size_t y = sites[c] / 2; y < kEquivPatch; y += 2)
      for (std::size_t x = sites[c] % 2; x < kEquivPatch; x += 2) boosted.at(x, y) = electrons.at(x, y) * gains.for_channel(c);

  const PackedImage clean = constant_packed(spec.meta, kSnaLevel);
  const SnaConfig sna;
  const std::size_t plane = (kEquivPatch / 2) * (kEquivPatch / 2);
  // samples[c][pixel][rep]
  std::vector<std::vector<double>> aug(kChannelCount * plane), direct(kChannelCount * plane);
  for (auto& s : aug) s.reserve(kEquivRepetitions);
  for (auto& s : direct) s.reserve(kEquivRepetitions);

  const RandomSource base(600, trial);
  for (std::size_t rep = 0; rep < kEquivRepetitions; ++rep) {
    const RandomSource r = base.derive(rep);
    const PackedImage noisy = subtract_black(pack_bayer(simulate_scene_frame(spec, iso, electrons, r.derive(1))));
    const AugmentResult out = augment_pair_with_gains(clean, noisy, gains, sna, kSnaK, r.derive(2));
    const PackedImage ref = subtract_black(pack_bayer(simulate_scene_frame(spec, iso, boosted, r.derive(3))));
    for (int c = 0; c < kChannelCount; ++c)
      for (std::size_t i = 0; i < plane; ++i) {
        aug[c * plane + i].push_back(out.noisy.channels[c].data[i]);
        direct[c * plane + i].push_back(ref.channels[c].data[i]);
      }
  }

  const auto moments = [](const std::vector<double>& s) {
    const double m = mean_of(s);
    double ss = 0.0;
    for (double x : s) ss += (x - m) * (x - m);
    return std::pair{m, ss / static_cast<double>(s.size() - 1)};
  };
  EquivalenceRun run;
  std::array<double, 3> ma{}, mb{}, va{}, vb{};
  std::array<int, 3> count{};
  for (int c = 0; c < kChannelCount; ++c) {
    const int group = c == kRed ? 0 : c == kBlue ? 2 : 1;
    for (std::size_t i = 0; i < plane; ++i) {
      const auto [m1, v1] = moments(aug[c * plane + i]);
      const auto [m2, v2] = moments(direct[c * plane + i]);
      ma[group] += m1;
      mb[group] += m2;
      va[group] += v1;
      vb[group] += v2;
      ++count[group];
      run.worst_pixel_var_err = std::max(run.worst_pixel_var_err, std::fabs(v1 - v2) / v2);
    }
  }
  for (int g = 0; g < 3; ++g) {
    run.mean_err[g] = std::fabs(ma[g] - mb[g]) / mb[g];
    run.var_err[g] = std::fabs(va[g] - vb[g]) / vb[g];
  }
  std::vector<double> pooled_a, pooled_b;
  for (const auto& s : aug) pooled_a.insert(pooled_a.end(), s.begin(), s.end());
  for (const auto& s : direct) pooled_b.insert(pooled_b.end(), s.begin(), s.end());
  run.chi2 = histogram_chi2_test(pooled_a, pooled_b, kEquivBins, tolerances::kChi2Alpha);
  return run;
}

Verdict sna_distribution_equivalence() {
  Verdict v;
  const auto t0 = Clock::now();
  std::vector<EquivalenceRun> runs;
  const TestReport vote = majority_vote([&](int trial) {
    runs.push_back(run_equivalence(trial));
    return runs.back().chi2;
  });
  const double elapsed = seconds_since(t0);
  const EquivalenceRun& first = runs.front();
  double worst_mean = 0.0, worst_var = 0.0;
  for (int g = 0; g < 3; ++g) {
    worst_mean = std::max(worst_mean, first.mean_err[g]);
    worst_var = std::max(worst_var, first.var_err[g]);
  }
  v.detail << "reps=" << kEquivRepetitions << " mean_rel_err=" << num(worst_mean, 3)
           << " var_rel_err=" << num(worst_var, 3) << " worst_single_pixel_var_err=" << num(first.worst_pixel_var_err, 3)
           << " chi2_p=[";
  for (std::size_t i = 0; i < runs.size(); ++i) v.detail << (i ? "," : "") << num(runs[i].chi2.statistic, 3);
  v.detail << "] majority=" << vote.details.at("majority.passes") << "/" << vote.details.at("majority.runs")
           << " time=" << num(elapsed, 3) << "s";
  v.check(worst_mean <= tolerances::kSnaEquivalenceRelError, "per-pixel mean within 3%");
  v.check(worst_var <= tolerances::kSnaEquivalenceRelError, "per-pixel variance within 3%");
  v.check(vote.passed, "pooled chi-square majority at alpha 0.01");
  v.check(elapsed < kEquivMaxSeconds, "runtime < 60 s");
  return v;
}

// ---------------------------------------------------------------------------
// DSC

struct SimulatedCalibration {
  SensorSpec spec;
  CalibrationProfile profile;
  std::vector<IsoMeanFrame> means;
  double seconds = 0.0;
};

SimulatedCalibration calibrate_simulator() {
  const auto t0 = Clock::now();
  SensorSimConfig cfg;
  cfg.width = cfg.height = kDscSize;
  cfg.read_sigma = kDscReadSigma;
  cfg.fpn_k_std = kDscKStd;
  cfg.fpn_b_std = kDscBStd;
  SimulatedCalibration sim;
  sim.spec = make_sensor_spec(cfg, RandomSource(31337));
  IsoTable ble;
  const RandomSource rng(4242);
  for (std::uint32_t iso : kCalibrationIsos) {
    DarkStackAccumulator acc;
    const RandomSource per_iso = rng.derive(iso);
    for (std::size_t i = 0; i < kDefaultDarkFrameCount; ++i)
      acc.add(simulate_dark_frame(sim.spec, iso, 1.0 / 30.0, per_iso.derive(i)));
    RawFrame mean = acc.mean_frame();
    ble[iso] = compute_ble(mean);
    sim.means.push_back({iso, std::move(mean)});
  }
  sim.profile = fit_fpn(sim.means, ble, "simulator");
  sim.seconds = seconds_since(t0);
  return sim;
}

Verdict dsc_calibration_round_trip() {
  Verdict v;
  const SimulatedCalibration sim = calibrate_simulator();
  const double corr_k = correlation(sim.profile.fpn_k_map, sim.spec.fpn_k_map);
  const double corr_b = correlation(sim.profile.fpn_b_map, sim.spec.fpn_b_map);
  const double err = rmse(reconstruct_dark_shading(sim.profile, kDscTestIso).pixels.data,
                          sim.spec.dark_shading(kDscTestIso).pixels.data);
  v.detail << "size=" << kDscSize << " frames=" << kDefaultDarkFrameCount << "x" << kCalibrationIsos.size()
           << " corr_k=" << num(corr_k, 5) << " corr_b=" << num(corr_b, 5) << " rmse@25600=" << num(err, 4)
           << " time=" << num(sim.seconds, 3) << "s";
  v.check(corr_k > tolerances::kDscMapCorrelation, "k map correlation > 0.999");
  v.check(corr_b > tolerances::kDscMapCorrelation, "b map correlation > 0.999");
  v.check(err < tolerances::kDscReconstructionRmse, "RMSE at ISO 25600 < 0.3 DN");
  v.check(sim.seconds < kDscMaxSeconds, "runtime < 2 min");
  return v;
}

Verdict dsc_residual_mean() {
  Verdict v;
  const SimulatedCalibration sim = calibrate_simulator();
  const auto t0 = Clock::now();
  DarkStackAccumulator corrected, uncorrected;
  const RandomSource rng(8888);
  for (std::size_t i = 0; i < kResidualFrames; ++i) {
    const RawFrame f = simulate_dark_frame(sim.spec, kResidualIso, 1.0 / 30.0, rng.derive(i));
    corrected.add(correct_frame(f, sim.profile));
    uncorrected.add(f);
  }
  const TestReport with = residual_mean_test(corrected.mean_frame().pixels, kResidualFrames,
                                             tolerances::kDscResidualMeanBound);
  const TestReport without = residual_mean_test(uncorrected.mean_frame().pixels, kResidualFrames,
                                                tolerances::kDscResidualMeanBound);
  const double elapsed = seconds_since(t0);
  v.detail << "frames=" << kResidualFrames << " corrected_fraction=" << num(with.statistic, 4)
           << " corrected_q999=" << with.details.at("abs_mean_q999") << " corrected_global=" << with.details.at("global_mean")
           << " uncorrected_fraction=" << num(without.statistic, 4) << " time=" << num(elapsed, 3)
           << "s (+" << num(sim.seconds, 3) << "s calibration)";
  v.check(with.passed, ">= 99.9% of corrected pixels under 0.1 DN");
  v.check(!without.passed, "uncorrected frames fail");
  v.check(elapsed < kResidualMaxSeconds, "runtime < 1 min");
  return v;
}

Verdict dsc_regression_regularization() {
  Verdict v;
  const SimulatedCalibration sim = calibrate_simulator();
  double worst_margin = 1e300;
  for (const IsoMeanFrame& m : sim.means) {
    const auto truth = sim.spec.dark_shading(m.iso).pixels.data;
    const double fitted = rmse(reconstruct_dark_shading(sim.profile, m.iso).pixels.data, truth);
    const double averaged = rmse(m.mean_frame.pixels.data, truth);
    v.detail << m.iso << ":" << num(fitted, 3) << "<" << num(averaged, 3) << " ";
    worst_margin = std::min(worst_margin, averaged - fitted);
    v.check(fitted < averaged, "ISO " + std::to_string(m.iso));
  }
  v.detail << "worst_margin=" << num(worst_margin, 3);
  return v;
}

// ---------------------------------------------------------------------------
// Plumbing

std::filesystem::path scratch_dir() {
  const auto p = std::filesystem::temp_directory_path() / ("rawnoise_acceptance_" + std::to_string(::getpid()));
  std::filesystem::create_directories(p);
  return p;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

int cli_run(std::vector<std::string> args) {
  args.insert(args.begin(), {"rawnoise", "--log-level=quiet"});
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  return cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
}

Verdict bit_exact_plumbing() {
  Verdict v;
  const auto dir = scratch_dir();
  const std::vector<std::string> cfas{"RGGB", "BGGR", "GRBG", "GBRG"};
  CounterEngine eng = RandomSource(9090).engine();
  const auto pick = [&](std::uint32_t n) { return static_cast<std::uint32_t>(eng.uniform() * n); };
  std::size_t mismatches = 0;
  for (std::size_t i = 0; i < kFuzzFrames; ++i) {
    SensorMeta meta;
    meta.width = 2 * (1 + pick(64));
    meta.height = 2 * (1 + pick(64));
    meta.cfa_pattern = cfas[pick(4)];
    meta.white_level = static_cast<double>((1u << (10 + pick(7))) - 1);
    for (double& b : meta.black_level) b = static_cast<double>(pick(64));
    meta.iso = 100u << pick(9);
    meta.exposure_time = 1.0 / (1 + pick(1000));
    if (i % 2) meta.system_gain_k = 0.5 + eng.uniform();
    RawFrame f(meta, i % 3 == 2 ? SampleKind::real : SampleKind::quantized);
    for (double& x : f.pixels.data) {
      x = std::floor(eng.uniform() * (meta.white_level + 1.0));
      if (f.kind == SampleKind::real) x = static_cast<double>(static_cast<float>(x - 0.37 * meta.white_level));
    }
    if (f.kind == SampleKind::real) f.black_subtracted = true;
    f.attributes["fuzz.index"] = std::to_string(i);

    const PackedImage packed = pack_bayer(f);
    if (unpack_bayer(packed) != f) ++mismatches;
    if (frame_from_container(decode_container(encode_container(to_container(f)))) != f) ++mismatches;
    if (packed_from_container(decode_container(encode_container(to_container(packed)))) != packed) ++mismatches;
    const auto path = dir / ("fuzz_" + std::to_string(i) + ".rawc");
    write_frame(f, path);
    if (read_frame(path) != f) ++mismatches;
    write_packed(packed, path);
    if (unpack_bayer(read_packed(path)) != f) ++mismatches;
  }
  v.detail << "fuzzed_frames=" << kFuzzFrames << " mismatches=" << mismatches;
  v.check(mismatches == 0, "zero round-trip mismatches");

  // CLI determinism: same seed twice gives identical bytes, another seed differs.
  RawFrame clean(SensorMeta{}, SampleKind::quantized);
  clean.meta.width = clean.meta.height = 64;
  clean.meta.black_level.fill(64.0);
  clean.meta.white_level = 4095.0;
  clean.pixels = Plane(64, 64, 564.0);
  write_frame(clean, dir / "c.rawc");
  write_frame(synthesize_pg(clean, 2.0, 2.0, RandomSource(1)), dir / "n.rawc");
  const auto augment = [&](const std::string& seed, const std::string& out) {
    return cli_run({"augment", "--mu", "0.5", "--sigma", "0.25", "--seed", seed, "--probability", "1", "--k", "2",
                    "--clean", (dir / "c.rawc").string(), "--noisy", (dir / "n.rawc").string(), "-o",
                    (dir / out).string()});
  };
  const bool ran = augment("42", "a") == 0 && augment("42", "b") == 0 && augment("43", "c") == 0;
  const std::vector<std::string> files{"clean.rawc", "noisy.rawc"};
  bool identical = ran, differs = false;
  for (const auto& name : files) {
    identical = identical && slurp(dir / "a" / name) == slurp(dir / "b" / name);
    differs = differs || slurp(dir / "a" / name) != slurp(dir / "c" / name);
  }
  const bool synth_same =
      cli_run({"synthesize", "--mode", "pg", "-i", (dir / "c.rawc").string(), "--k", "2", "--read-sigma", "2", "--seed", "7",
               "-o", (dir / "s1.rawc").string()}) == 0 &&
      cli_run({"synthesize", "--mode", "pg", "-i", (dir / "c.rawc").string(), "--k", "2", "--read-sigma", "2", "--seed", "7",
               "-o", (dir / "s2.rawc").string()}) == 0 &&
      slurp(dir / "s1.rawc") == slurp(dir / "s2.rawc");
  v.detail << " cli_augment_identical=" << identical << " cli_seed_sensitive=" << differs
           << " cli_synthesize_identical=" << synth_same;
  v.check(identical && synth_same, "CLI outputs byte-identical under a fixed seed");
  v.check(differs, "CLI output depends on the seed");

  std::error_code ec;
  std::filesystem::remove_all(dir, ec);
  return v;
}

const std::vector<std::pair<std::string, std::function<Verdict()>>> kCriteria{
    {"ptc_gain_recovery", ptc_gain_recovery},
    {"sna_moment_identity", sna_moment_identity},
    {"sna_distribution_equivalence", sna_distribution_equivalence},
    {"dsc_calibration_round_trip", dsc_calibration_round_trip},
    {"dsc_residual_mean", dsc_residual_mean},
    {"dsc_regression_regularization", dsc_regression_regularization},
    {"bit_exact_plumbing", bit_exact_plumbing},
};

}  // namespace

int main(int argc, char** argv) {
  const std::string which = argc > 1 ? argv[1] : "all";
  bool any = false, all_passed = true;
  for (const auto& [name, fn] : kCriteria) {
    if (which != "all" && which != name) continue;
    any = true;
    Verdict v;
    try {
      v = fn();
    } catch (const std::exception& e) {
      v.passed = false;
      v.detail << "exception: " << e.what();
    }
    std::cout << (v.passed ? "PASS " : "FAIL ") << name << ": " << v.detail.str() << std::endl;
    all_passed = all_passed && v.passed;
  }
  if (!any) {
    std::cerr << "unknown criterion '" << which << "'; choose one of:";
    for (const auto& [name, fn] : kCriteria) std::cerr << ' ' << name;
    std::cerr << " or all\n";
    return 2;
  }
  return all_passed ? 0 : 1;
}
