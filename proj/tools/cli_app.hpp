#pragma once

// Command-line front end. Kept in a header so tests can drive run() in-process.

#include <CLI11.hpp>
#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rawnoise/rawnoise.hpp"

namespace rawnoise::cli {

namespace fs = std::filesystem;
using nlohmann::json;

enum ExitCode : int { kOk = 0, kUsage = 2, kData = 3, kCalibration = 4, kValidation = 5 };

inline int exit_code_for(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::config:
      return kUsage;
    case ErrorCode::insufficient_data:
    case ErrorCode::calibration_failed:
    case ErrorCode::rank:
      return kCalibration;
    default:
      return kData;
  }
}

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class LogLevel { quiet, info, debug };

// State shared by one invocation.
struct Context {
  Context(std::ostream& o, std::ostream& e) : out(o), err(e) {}

  std::ostream& out;
  std::ostream& err;
  LogLevel log_level = LogLevel::info;
  CLI::App* command = nullptr;
  json config;  // resolved options of the active subcommand
  std::string config_hash;
  std::optional<std::uint64_t> seed;

  void log(const std::string& msg) const {
    if (log_level != LogLevel::quiet) err << "rawnoise: " << msg << '\n';
  }
  void debug(const std::string& msg) const {
    if (log_level == LogLevel::debug) err << "rawnoise: " << msg << '\n';
  }
};

inline std::string hex32(std::uint32_t v) {
  char buf[9];
  std::snprintf(buf, sizeof buf, "%08x", v);
  return buf;
}

// Output locations do not change results, so they stay out of the hash.
inline std::string config_hash_of(json config) {
  config.erase("output");
  config.erase("report");
  const std::string canon = config.dump();
  return hex32(detail::crc32(reinterpret_cast<const std::uint8_t*>(canon.data()), canon.size()));
}

inline json telemetry_base(const Context& ctx) {
  json t;
  t["tool"] = "rawnoise";
  t["tool_version"] = kVersion;
  t["tolerance_version"] = std::string(tolerances::kToleranceVersion);
  t["subcommand"] = ctx.command->get_name();
  t["seed"] = ctx.seed ? json(*ctx.seed) : json(nullptr);
  t["config"] = ctx.config;
  t["config_hash"] = ctx.config_hash;
  return t;
}

inline void stamp(Container& c, const Context& ctx) {
  c.metadata["tool.version"] = kVersion;
  c.metadata["tool.config_hash"] = ctx.config_hash;
  c.metadata["tool.subcommand"] = ctx.command->get_name();
  if (ctx.seed) c.metadata["tool.seed"] = std::to_string(*ctx.seed);
}

template <typename T>
void write_artifact(const T& value, const fs::path& path, const Context& ctx) {
  Container c = to_container(value);
  stamp(c, ctx);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_container(c, path);
  ctx.debug("wrote " + path.string());
}

inline void write_json(const json& j, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_text_atomic(path, j.dump(2) + "\n");
}

// Telemetry for a single-file output lives next to it as <file>.json.
inline fs::path telemetry_path(const fs::path& output) { return fs::path(output.string() + ".json"); }

inline std::vector<fs::path> sorted_matches(const fs::path& dir, const std::string& prefix, const std::string& suffix,
                                            bool want_dirs) {
  require(fs::is_directory(dir), ErrorCode::io, "not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (entry.is_directory() != want_dirs) continue;
    if (name.size() >= prefix.size() + suffix.size() && name.starts_with(prefix) && name.ends_with(suffix))
      out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline std::uint32_t parse_suffix_number(const fs::path& dir, const std::string& prefix) {
  const std::string name = dir.filename().string().substr(prefix.size());
  return static_cast<std::uint32_t>(parse_number(name, dir.string()));
}

inline std::string frame_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%04zu.rawc", i);
  return buf;
}

// ---------------------------------------------------------------------------
// Option registry: lets config files fill in anything not given as a flag.

struct Command {
  CLI::App* app = nullptr;
  std::vector<std::string> required;
  std::function<int(Context&)> action;
};

inline std::string json_scalar_to_string(const json& v, const std::string& key) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  if (v.is_number_unsigned()) return std::to_string(v.get<std::uint64_t>());
  if (v.is_number_float()) return format_number(v.get<double>());
  fail(ErrorCode::config, "config key '" + key + "' must be a scalar or a list of scalars");
}

inline void apply_config_file(CLI::App& sub, const fs::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::config, "cannot open config file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    fail(ErrorCode::config, "config file is not valid JSON: " + std::string(e.what()));
  }
  require(j.is_object(), ErrorCode::config, "config file must hold a JSON object");
  for (const auto& [key, value] : j.items()) {
    CLI::Option* opt = key == "config" || key == "help" ? nullptr : sub.get_option_no_throw("--" + key);
    require(opt != nullptr, ErrorCode::config, "unknown config key '" + key + "' for " + sub.get_name());
    if (opt->count() > 0) continue;  // flags win
    if (value.is_array())
      for (const auto& item : value) opt->add_result(json_scalar_to_string(item, key));
    else
      opt->add_result(json_scalar_to_string(value, key));
    try {
      opt->run_callback();
    } catch (const CLI::Error& e) {
      fail(ErrorCode::config, "config key '" + key + "': " + e.what());
    }
  }
}

inline json resolved_options(const CLI::App& sub) {
  json j = json::object();
  for (const CLI::Option* opt : sub.get_options()) {
    const std::string name = opt->get_single_name();
    if (name == "help" || name == "config" || name.empty()) continue;
    if (opt->count() > 0) {
      const auto& r = opt->results();
      if (r.size() == 1) {
        j[name] = r.front();
      } else {
        j[name] = r;
      }
    } else {
      j[name] = opt->get_default_str();
    }
  }
  return j;
}

inline SaturationPolicy parse_policy(const std::string& s) {
  if (s == "clip_to_white" || s == "clip") return SaturationPolicy::clip_to_white;
  if (s == "reject_patch" || s == "reject") return SaturationPolicy::reject_patch;
  fail(ErrorCode::config, "unknown saturation policy '" + s + "'");
}

inline json report_json(const TestReport& r) { return json(r); }

inline std::string summary_line(const TestReport& r) {
  std::ostringstream s;
  s << (r.passed ? "PASS " : "FAIL ") << r.test_name << " statistic=" << format_number(r.statistic)
    << " threshold=" << format_number(r.threshold) << " n=" << r.sample_size;
  return s.str();
}

// ---------------------------------------------------------------------------
// Subcommands

struct Options {
  // shared
  std::string input, output, config_path;
  std::uint64_t seed = 0;
  // pack / unpack: input, output only
  // synthesize
  std::string mode = "pg";
  std::string sensor_path;
  double k = 0.0;
  double read_sigma = 0.0;
  std::string quantize = "auto";
  std::uint32_t width = 256, height = 256;
  std::string cfa = "RGGB";
  double black = 512.0, white = 16383.0;
  double fpn_k_std = 2e-5, fpn_b_std = 1.0, row_share = 0.0;
  std::vector<std::uint32_t> isos{100, 200, 400, 800, 1600, 3200, 6400, 12800, 25600};
  std::uint32_t iso = 100;
  std::size_t frames = kDefaultDarkFrameCount;
  std::size_t levels = 20;
  double min_fraction = 0.01, max_fraction = 0.5;
  double exposure = 1.0 / 30.0;
  // calibrate
  std::string report_path, sensor_id, truth_path;
  bool allow_extrapolation = false;
  // correct
  std::string profile_path;
  // augment
  std::string clean_path, noisy_path;
  double mu = 0.5, sigma = 0.25, probability = 0.75, flag_fraction = 0.01;
  std::string policy = "clip_to_white";
  // validate
  std::string test;
  std::string reference;
  double bound = tolerances::kDscResidualMeanBound;
  double alpha = tolerances::kChi2Alpha;
  std::size_t bins = 50;
  double expected_mean = 0.0, expected_var = 0.0, tolerance = tolerances::kSnaMeanRelError;
  double min_r2 = tolerances::kPtcMinR2;
};

inline int cmd_pack(Context& ctx, const Options& o) {
  const PackedImage img = pack_bayer(read_frame(o.input));
  write_artifact(img, o.output, ctx);
  json t = telemetry_base(ctx);
  t["outputs"] = {o.output};
  write_json(t, telemetry_path(o.output));
  return kOk;
}

inline int cmd_unpack(Context& ctx, const Options& o) {
  const RawFrame f = unpack_bayer(read_packed(o.input));
  write_artifact(f, o.output, ctx);
  json t = telemetry_base(ctx);
  t["outputs"] = {o.output};
  write_json(t, telemetry_path(o.output));
  return kOk;
}

inline SensorSimConfig sim_config(const Options& o) {
  SensorSimConfig cfg;
  cfg.width = o.width;
  cfg.height = o.height;
  cfg.cfa = o.cfa;
  cfg.black_level = o.black;
  cfg.white_level = o.white;
  cfg.system_gain_k = o.k > 0.0 ? o.k : cfg.system_gain_k;
  cfg.read_sigma = o.read_sigma;
  cfg.fpn_k_std = o.fpn_k_std;
  cfg.fpn_b_std = o.fpn_b_std;
  cfg.row_share = o.row_share;
  cfg.quantize = o.quantize != "false";
  return cfg;
}

inline int cmd_synthesize(Context& ctx, const Options& o) {
  const RandomSource rng(o.seed);
  json t = telemetry_base(ctx);
  const fs::path out(o.output);
  if (o.mode == "pg") {
    if (o.input.empty()) throw UsageError("--mode pg requires --input");
    if (!(o.k > 0.0)) throw UsageError("--mode pg requires --k > 0");
    std::optional<bool> q;
    if (o.quantize == "true") q = true;
    if (o.quantize == "false") q = false;
    RawFrame noisy = synthesize_pg(read_frame(o.input), o.k, o.read_sigma, rng, q);
    noisy.meta.system_gain_k = o.k;
    write_artifact(noisy, out, ctx);
    t["outputs"] = {out.string()};
    write_json(t, telemetry_path(out));
    return kOk;
  }
  if (o.mode == "sensor") {
    const SensorSpec spec = make_sensor_spec(sim_config(o), rng);
    write_artifact(spec, out, ctx);
    t["outputs"] = {out.string()};
    write_json(t, telemetry_path(out));
    return kOk;
  }
  if (o.sensor_path.empty()) throw UsageError("--mode " + o.mode + " requires --sensor");
  const SensorSpec spec = read_sensor_spec(o.sensor_path);
  if (o.mode == "dark") {
    if (o.frames < 1) throw UsageError("--frames must be positive");
    std::vector<std::string> written;
    for (std::uint32_t iso : o.isos) {
      const RandomSource per_iso = rng.derive(iso);
      const fs::path dir = out / ("iso_" + std::to_string(iso));
      fs::create_directories(dir);
      for (std::size_t i = 0; i < o.frames; ++i) {
        write_artifact(simulate_dark_frame(spec, iso, o.exposure, per_iso.derive(i)), dir / frame_name(i), ctx);
      }
      written.push_back(dir.string());
      ctx.log("iso " + std::to_string(iso) + ": " + std::to_string(o.frames) + " dark frames");
    }
    t["outputs"] = written;
    write_json(t, out / "telemetry.json");
    return kOk;
  }
  if (o.mode == "flat") {
    if (o.levels < 3) throw UsageError("--levels must be at least 3");
    const double full_well_e = (spec.meta.white_level - spec.meta.channel_black(kRed)) / spec.system_gain_k;
    json levels = json::array();
    for (std::size_t i = 0; i < o.levels; ++i) {
      const double frac =
          o.min_fraction + (o.max_fraction - o.min_fraction) * static_cast<double>(i) / static_cast<double>(o.levels - 1);
      const double electrons = frac * full_well_e;
      const fs::path dir = out / ("level_" + std::to_string(i));
      write_artifact(simulate_flat_frame(spec, o.iso, electrons, rng.derive(2 * i), o.exposure), dir / "a.rawc", ctx);
      write_artifact(simulate_flat_frame(spec, o.iso, electrons, rng.derive(2 * i + 1), o.exposure), dir / "b.rawc", ctx);
      levels.push_back({{"dir", dir.string()}, {"electrons", electrons}});
    }
    t["outputs"] = levels;
    write_json(t, out / "telemetry.json");
    return kOk;
  }
  throw UsageError("unknown --mode '" + o.mode + "' (pg, sensor, dark, flat)");
}

inline int cmd_calibrate_gain(Context& ctx, const Options& o) {
  std::vector<FlatPair> pairs;
  for (const fs::path& dir : sorted_matches(o.input, "level_", "", true))
    pairs.push_back({read_frame(dir / "a.rawc"), read_frame(dir / "b.rawc")});
  const PTCEstimate est = estimate_gain_ptc(pairs);
  const TestReport lin = ptc_linearity_test(est, o.min_r2);
  json t = telemetry_base(ctx);
  json samples = json::array();
  for (const auto& s : est.samples) samples.push_back({{"mean", s.mean}, {"variance", s.variance}});
  t["estimate"] = {{"system_gain_k", est.system_gain_k},
                   {"read_variance", est.read_variance},
                   {"fit_r2", est.fit_r2},
                   {"samples", samples}};
  t["linearity"] = report_json(lin);
  write_json(t, o.output);
  ctx.out << "K = " << format_number(est.system_gain_k) << " DN/e-, read variance = "
          << format_number(est.read_variance) << " DN^2, r2 = " << format_number(est.fit_r2) << '\n';
  if (!lin.passed) {
    ctx.log("photon transfer curve is not linear enough (r2 below " + format_number(o.min_r2) + ")");
    return kCalibration;
  }
  return kOk;
}

inline int cmd_calibrate_dark(Context& ctx, const Options& o) {
  std::vector<IsoMeanFrame> means;
  IsoTable ble;
  json per_iso = json::object();
  for (const fs::path& dir : sorted_matches(o.input, "iso_", "", true)) {
    const std::uint32_t iso = parse_suffix_number(dir, "iso_");
    DarkStackAccumulator acc;
    for (const fs::path& file : sorted_matches(dir, "frame_", ".rawc", false)) {
      const RawFrame f = read_frame(file);
      require(f.meta.iso == iso, ErrorCode::set, file.string() + " does not carry ISO " + std::to_string(iso));
      acc.add(f);
    }
    require(acc.count() >= 2, ErrorCode::set, dir.string() + " needs at least 2 dark frames");
    RawFrame mean = acc.mean_frame();
    ble[iso] = compute_ble(mean);
    per_iso[std::to_string(iso)] = {{"frame_count", acc.count()},
                                    {"low_frame_count", acc.count() < kLowDarkFrameCount},
                                    {"ble", ble[iso]}};
    if (acc.count() < kLowDarkFrameCount)
      ctx.log("iso " + std::to_string(iso) + " has only " + std::to_string(acc.count()) + " frames");
    means.push_back({iso, std::move(mean)});
  }
  require(!means.empty(), ErrorCode::insufficient_data, "no iso_<value> directories under " + o.input);
  std::sort(means.begin(), means.end(), [](const auto& a, const auto& b) { return a.iso < b.iso; });
  CalibrationProfile profile = fit_fpn(means, ble, o.sensor_id);
  profile.ble_policy.extrapolate = o.allow_extrapolation;
  for (const auto& [iso, rms] : profile.residual_rms) {
    per_iso[std::to_string(iso)]["residual_rms"] = rms;
    per_iso[std::to_string(iso)]["fpn_spatial_mean"] = profile.fpn_spatial_mean(iso);
  }
  if (!o.truth_path.empty()) {
    const SensorSpec truth = read_sensor_spec(o.truth_path);
    for (std::uint32_t iso : profile.calibration_isos) {
      const RawFrame fit = reconstruct_dark_shading(profile, iso);
      const RawFrame ref = truth.dark_shading(iso);
      require(fit.pixels.size() == ref.pixels.size(), ErrorCode::profile, "truth sensor does not match the profile");
      double ss = 0.0;
      for (std::size_t i = 0; i < fit.pixels.size(); ++i)
        ss += (fit.pixels.data[i] - ref.pixels.data[i]) * (fit.pixels.data[i] - ref.pixels.data[i]);
      per_iso[std::to_string(iso)]["reconstruction_rmse"] = std::sqrt(ss / static_cast<double>(fit.pixels.size()));
    }
  }
  write_artifact(profile, o.output, ctx);
  json t = telemetry_base(ctx);
  t["outputs"] = {o.output};
  t["residuals"] = per_iso;
  const fs::path report = o.report_path.empty() ? telemetry_path(o.output) : fs::path(o.report_path);
  write_json(t, report);
  if (!o.report_path.empty()) write_json(t, telemetry_path(o.output));
  ctx.out << "calibrated " << profile.calibration_isos.size() << " ISOs into " << o.output << '\n';
  return kOk;
}

inline int cmd_correct(Context& ctx, const Options& o) {
  const CalibrationProfile profile = read_profile(o.profile_path);
  const RawFrame out = correct_frame(read_frame(o.input), profile);
  write_artifact(out, o.output, ctx);
  json t = telemetry_base(ctx);
  t["outputs"] = {o.output};
  t["iso"] = out.meta.iso;
  write_json(t, telemetry_path(o.output));
  return kOk;
}

inline int cmd_augment(Context& ctx, const Options& o) {
  SnaConfig cfg;
  cfg.mu = o.mu;
  cfg.sigma = o.sigma;
  cfg.apply_probability = o.probability;
  cfg.saturation_policy = parse_policy(o.policy);
  cfg.flag_clip_fraction = o.flag_fraction;
  cfg.validate();

  const PackedImage clean = subtract_black(read_as_packed(o.clean_path));
  const PackedImage noisy = subtract_black(read_as_packed(o.noisy_path));
  double k = o.k;
  if (!(k > 0.0)) {
    require(noisy.meta.system_gain_k.has_value(), ErrorCode::config,
            "no --k given and the noisy frame records no system gain");
    k = *noisy.meta.system_gain_k;
  }
  const AugmentResult r = augment_pair(clean, noisy, cfg, k, RandomSource(o.seed));
  const fs::path dir(o.output);
  write_artifact(r.clean, dir / "clean.rawc", ctx);
  write_artifact(r.noisy, dir / "noisy.rawc", ctx);
  json t = telemetry_base(ctx);
  t["outputs"] = {(dir / "clean.rawc").string(), (dir / "noisy.rawc").string()};
  t["system_gain_k"] = k;
  t["applied"] = r.applied;
  t["rejected"] = r.rejected;
  t["gains"] = r.gains ? json{{"r", r.gains->r}, {"g", r.gains->g}, {"b", r.gains->b}} : json(nullptr);
  t["clip_fraction"] = r.clip_fraction;
  t["flagged"] = r.flagged;
  write_json(t, dir / "telemetry.json");
  return kOk;
}

inline std::vector<fs::path> expand_inputs(const std::string& input) {
  if (fs::is_directory(input)) return sorted_matches(input, "", ".rawc", false);
  return {fs::path(input)};
}

inline std::vector<double> pixel_values(const std::string& input) {
  std::vector<double> values;
  for (const fs::path& p : expand_inputs(input)) {
    const PackedImage img = subtract_black(read_as_packed(p));
    for (const Plane& c : img.channels) values.insert(values.end(), c.data.begin(), c.data.end());
  }
  return values;
}

inline int cmd_validate(Context& ctx, const Options& o) {
  TestReport report;
  if (o.test == "residual-mean") {
    std::optional<CalibrationProfile> profile;
    if (!o.profile_path.empty()) profile = read_profile(o.profile_path);
    DarkStackAccumulator acc;
    for (const fs::path& p : expand_inputs(o.input)) {
      const RawFrame f = read_frame(p);
      acc.add(profile ? correct_frame(f, *profile) : subtract_black(f));
    }
    require(acc.count() >= 2, ErrorCode::input, "residual mean test needs at least 2 frames");
    report = residual_mean_test(acc.mean_frame().pixels, acc.count(), o.bound);
  } else if (o.test == "chi2") {
    if (o.reference.empty()) throw UsageError("--test chi2 requires --reference");
    report = histogram_chi2_test(pixel_values(o.input), pixel_values(o.reference), o.bins, o.alpha);
  } else if (o.test == "moments") {
    report = moment_match_test(pixel_values(o.input), o.expected_mean, o.expected_var, o.tolerance);
  } else if (o.test == "ptc") {
    std::vector<FlatPair> pairs;
    for (const fs::path& dir : sorted_matches(o.input, "level_", "", true))
      pairs.push_back({read_frame(dir / "a.rawc"), read_frame(dir / "b.rawc")});
    report = ptc_linearity_test(estimate_gain_ptc(pairs), o.min_r2);
  } else {
    throw UsageError("unknown --test '" + o.test + "' (residual-mean, chi2, moments, ptc)");
  }
  const fs::path dir(o.output);
  json t = telemetry_base(ctx);
  t["reports"] = json::array({report_json(report)});
  t["passed"] = report.passed;
  write_json(t, dir / "report.json");
  const std::string summary = summary_line(report) + "\n";
  write_text_atomic(dir / "summary.txt", summary);
  ctx.out << summary;
  return report.passed ? kOk : kValidation;
}

// ---------------------------------------------------------------------------

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Raw sensor noise modelling, augmentation and dark shading correction", "rawnoise"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));
  app.option_defaults()->always_capture_default();
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "quiet, info or debug")->check(CLI::IsMember({"quiet", "info", "debug"}));

  Options o;
  std::vector<Command> commands;
  const auto add = [&](const std::string& name, const std::string& about, std::vector<std::string> required,
                       std::function<int(Context&)> action) -> CLI::App* {
    CLI::App* sub = app.add_subcommand(name, about);
    sub->add_option("--config", o.config_path, "JSON file with option values; flags win");
    commands.push_back({sub, std::move(required), std::move(action)});
    return sub;
  };

  CLI::App* pack = add("pack", "Split a Bayer mosaic into four channel planes", {"input", "output"},
                       [&](Context& c) { return cmd_pack(c, o); });
  pack->add_option("-i,--input", o.input, "mosaic container");
  pack->add_option("-o,--output", o.output, "packed container");

  CLI::App* unpack = add("unpack", "Reassemble a packed image into a mosaic", {"input", "output"},
                         [&](Context& c) { return cmd_unpack(c, o); });
  unpack->add_option("-i,--input", o.input, "packed container");
  unpack->add_option("-o,--output", o.output, "mosaic container");

  CLI::App* synth = add("synthesize", "Poisson-Gaussian synthesis and sensor simulation", {"output"},
                        [&](Context& c) { return cmd_synthesize(c, o); });
  synth->add_option("--mode", o.mode, "pg, sensor, dark or flat")->check(CLI::IsMember({"pg", "sensor", "dark", "flat"}));
  synth->add_option("-i,--input", o.input, "clean mosaic (pg)");
  synth->add_option("-o,--output", o.output, "output file (pg, sensor) or directory (dark, flat)");
  synth->add_option("--sensor", o.sensor_path, "sensor spec container (dark, flat)");
  synth->add_option("--seed", o.seed);
  synth->add_option("--k", o.k, "system gain in DN per electron");
  synth->add_option("--read-sigma", o.read_sigma, "read noise in DN");
  synth->add_option("--quantize", o.quantize, "auto, true or false")->check(CLI::IsMember({"auto", "true", "false"}));
  synth->add_option("--width", o.width);
  synth->add_option("--height", o.height);
  synth->add_option("--cfa", o.cfa);
  synth->add_option("--black", o.black);
  synth->add_option("--white", o.white);
  synth->add_option("--fpn-k-std", o.fpn_k_std, "DN per ISO unit");
  synth->add_option("--fpn-b-std", o.fpn_b_std, "DN");
  synth->add_option("--row-share", o.row_share);
  synth->add_option("--isos", o.isos)->delimiter(',');
  synth->add_option("--iso", o.iso, "ISO of flat frames");
  synth->add_option("--frames", o.frames, "dark frames per ISO");
  synth->add_option("--levels", o.levels, "illumination levels (flat)");
  synth->add_option("--min-fraction", o.min_fraction, "lowest level as a fraction of full well");
  synth->add_option("--max-fraction", o.max_fraction, "highest level as a fraction of full well");
  synth->add_option("--exposure", o.exposure, "seconds");

  CLI::App* cgain = add("calibrate-gain", "Photon transfer estimate of K from <root>/level_<n>/{a,b}.rawc",
                        {"input", "output"}, [&](Context& c) { return cmd_calibrate_gain(c, o); });
  cgain->add_option("-i,--input", o.input, "root directory");
  cgain->add_option("-o,--output", o.output, "JSON estimate");
  cgain->add_option("--min-r2", o.min_r2);

  CLI::App* cdark = add("calibrate-dark", "Fit a dark shading profile from <root>/iso_<value>/frame_*.rawc",
                        {"input", "output"}, [&](Context& c) { return cmd_calibrate_dark(c, o); });
  cdark->add_option("-i,--input", o.input, "root directory");
  cdark->add_option("-o,--output", o.output, "profile container");
  cdark->add_option("--report", o.report_path, "residual report JSON");
  cdark->add_option("--sensor-id", o.sensor_id);
  cdark->add_option("--truth", o.truth_path, "simulator sensor spec; adds reconstruction RMSE to the report");
  cdark->add_flag("--allow-extrapolation", o.allow_extrapolation, "extend BLE beyond the calibrated ISO range");

  CLI::App* corr = add("correct", "Subtract black level and dark shading", {"input", "profile", "output"},
                       [&](Context& c) { return cmd_correct(c, o); });
  corr->add_option("-i,--input", o.input, "mosaic container");
  corr->add_option("--profile", o.profile_path, "calibration profile");
  corr->add_option("-o,--output", o.output, "corrected container (float payload)");

  CLI::App* aug = add("augment", "Shot noise augmentation of a clean/noisy pair", {"clean", "noisy", "output"},
                      [&](Context& c) { return cmd_augment(c, o); });
  aug->add_option("--clean", o.clean_path);
  aug->add_option("--noisy", o.noisy_path);
  aug->add_option("-o,--output", o.output, "output directory");
  aug->add_option("--mu", o.mu);
  aug->add_option("--sigma", o.sigma);
  aug->add_option("--probability", o.probability);
  aug->add_option("--policy", o.policy, "clip_to_white or reject_patch");
  aug->add_option("--flag-fraction", o.flag_fraction, "clip fraction above which a patch is flagged");
  aug->add_option("--seed", o.seed);
  aug->add_option("--k", o.k, "system gain; defaults to the noisy frame's sensor.system_gain_k");

  CLI::App* val = add("validate", "Statistical checks with a JSON report bundle", {"test", "input", "output"},
                      [&](Context& c) { return cmd_validate(c, o); });
  val->add_option("--test", o.test, "residual-mean, chi2, moments or ptc");
  val->add_option("-i,--input", o.input, "container, directory of containers, or PTC root");
  val->add_option("-o,--output", o.output, "report directory");
  val->add_option("--reference", o.reference, "second sample (chi2)");
  val->add_option("--profile", o.profile_path, "correct frames before the residual test");
  val->add_option("--bound", o.bound, "residual bound in DN");
  val->add_option("--alpha", o.alpha);
  val->add_option("--bins", o.bins);
  val->add_option("--expected-mean", o.expected_mean);
  val->add_option("--expected-var", o.expected_var);
  val->add_option("--tolerance", o.tolerance);
  val->add_option("--min-r2", o.min_r2);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  Context ctx{out, err};
  ctx.log_level = log_level == "quiet" ? LogLevel::quiet : log_level == "debug" ? LogLevel::debug : LogLevel::info;
  Command* active = nullptr;
  for (Command& c : commands)
    if (c.app->parsed()) active = &c;
  ctx.command = active->app;

  try {
    if (!o.config_path.empty()) apply_config_file(*active->app, o.config_path);
    for (const std::string& name : active->required)
      if (active->app->get_option("--" + name)->count() == 0)
        throw UsageError("missing required option --" + name);
    ctx.config = resolved_options(*active->app);
    ctx.config_hash = config_hash_of(ctx.config);
    if (active->app->get_option_no_throw("--seed")) ctx.seed = o.seed;
    return active->action(ctx);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n\n" << active->app->help();
    return kUsage;
  } catch (const Error& e) {
    err << "error [" << to_string(e.code()) << "]: " << e.what() << '\n';
    if (e.code() == ErrorCode::config) err << '\n' << active->app->help();
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kData;
  }
}

}  // namespace rawnoise::cli
