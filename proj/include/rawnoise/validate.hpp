#pragma once

#include <algorithm>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <nlohmann/json.hpp>
#include <span>
#include <string>
#include <vector>

#include "rawnoise/noise_model.hpp"
#include "rawnoise/raw_frame.hpp"
#include "rawnoise/tolerances.hpp"

namespace rawnoise {

// passed is true exactly when `statistic` satisfies `threshold` in the sense
// documented by the test that produced the report.
struct TestReport {
  std::string test_name;
  double statistic = 0.0;
  double threshold = 0.0;
  bool passed = false;
  std::size_t sample_size = 0;
  std::map<std::string, std::string> details;

  bool operator==(const TestReport&) const = default;
};

namespace detail {

// JSON has no infinity, so non-finite numbers travel as strings.
inline nlohmann::json number_to_json(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

inline double number_from_json(const nlohmann::json& j) {
  if (j.is_number()) return j.get<double>();
  const std::string s = j.get<std::string>();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  return std::numeric_limits<double>::quiet_NaN();
}

inline std::string fmt(double v) { return format_number(v); }

}  // namespace detail

inline void to_json(nlohmann::json& j, const TestReport& r) {
  j = nlohmann::json{{"test_name", r.test_name},
                     {"statistic", detail::number_to_json(r.statistic)},
                     {"threshold", detail::number_to_json(r.threshold)},
                     {"passed", r.passed},
                     {"sample_size", r.sample_size},
                     {"details", r.details}};
}

inline void from_json(const nlohmann::json& j, TestReport& r) {
  r.test_name = j.at("test_name").get<std::string>();
  r.statistic = detail::number_from_json(j.at("statistic"));
  r.threshold = detail::number_from_json(j.at("threshold"));
  r.passed = j.at("passed").get<bool>();
  r.sample_size = j.at("sample_size").get<std::size_t>();
  r.details = j.at("details").get<std::map<std::string, std::string>>();
}

// Statistic: fraction of pixels whose temporal mean has |mean| < bound;
// passes when that fraction is >= 99.9% and |global mean| < bound / 10.
inline TestReport residual_mean_test(const Plane& temporal_mean, std::size_t frame_count, double bound) {
  require(!temporal_mean.data.empty(), ErrorCode::input, "residual mean test needs a non-empty frame");
  std::size_t within = 0;
  double sum = 0.0;
  for (double m : temporal_mean.data) {
    if (std::fabs(m) < bound) ++within;
    sum += m;
  }
  const double n = static_cast<double>(temporal_mean.size());
  const double fraction = static_cast<double>(within) / n;
  const double global = sum / n;
  std::vector<double> mags(temporal_mean.data.size());
  std::transform(temporal_mean.data.begin(), temporal_mean.data.end(), mags.begin(), [](double v) { return std::fabs(v); });
  const auto q = mags.begin() + static_cast<std::ptrdiff_t>(std::floor(tolerances::kDscResidualPixelFraction * (n - 1)));
  std::nth_element(mags.begin(), q, mags.end());

  TestReport r;
  r.test_name = "residual_mean";
  r.statistic = fraction;
  r.threshold = tolerances::kDscResidualPixelFraction;
  r.sample_size = frame_count;
  r.passed = fraction >= tolerances::kDscResidualPixelFraction && std::fabs(global) < bound / 10.0;
  r.details = {{"bound", detail::fmt(bound)},
               {"global_mean", detail::fmt(global)},
               {"abs_mean_q999", detail::fmt(*q)},
               {"pixels", std::to_string(temporal_mean.size())}};
  return r;
}

inline TestReport residual_mean_test(std::span<const RawFrame> corrected_stack, double bound) {
  require(corrected_stack.size() >= 2, ErrorCode::input, "residual mean test needs at least 2 frames");
  Plane mean(corrected_stack.front().width(), corrected_stack.front().height());
  for (const RawFrame& f : corrected_stack) {
    require(f.pixels.size() == mean.size(), ErrorCode::input, "frames in the stack differ in size");
    for (std::size_t i = 0; i < mean.size(); ++i) mean.data[i] += f.pixels.data[i];
  }
  for (double& v : mean.data) v /= static_cast<double>(corrected_stack.size());
  return residual_mean_test(mean, corrected_stack.size(), bound);
}

// Statistic: max(|mean error| / mean, |var error| / (3 var)); passes when it
// is <= rel_tol, i.e. the mean is within rel_tol and the variance within
// 3 * rel_tol.
inline TestReport moment_match_test(std::span<const double> samples, double expected_mean, double expected_var,
                                    double rel_tol) {
  require(expected_mean > 0.0 && expected_var > 0.0, ErrorCode::domain,
          "relative tolerances need positive expected moments");
  require(samples.size() >= 2, ErrorCode::input, "moment test needs at least 2 samples");
  const double n = static_cast<double>(samples.size());
  double mean = 0.0;
  for (double s : samples) mean += s;
  mean /= n;
  double ss = 0.0;
  for (double s : samples) ss += (s - mean) * (s - mean);
  const double var = ss / (n - 1.0);
  const double mean_err = std::fabs(mean - expected_mean) / expected_mean;
  const double var_err = std::fabs(var - expected_var) / expected_var;

  TestReport r;
  r.test_name = "moment_match";
  r.statistic = std::max(mean_err, var_err / 3.0);
  r.threshold = rel_tol;
  r.sample_size = samples.size();
  r.passed = mean_err <= rel_tol && var_err <= 3.0 * rel_tol;
  r.details = {{"mean", detail::fmt(mean)},
               {"variance", detail::fmt(var)},
               {"expected_mean", detail::fmt(expected_mean)},
               {"expected_variance", detail::fmt(expected_var)},
               {"mean_rel_error", detail::fmt(mean_err)},
               {"variance_rel_error", detail::fmt(var_err)}};
  return r;
}

// Two-sample chi-square on shared equal-width bins. Adjacent bins are merged
// left to right until each merged bin expects >= 5 counts from both samples.
// Statistic: p-value; passes when p >= alpha.
inline TestReport histogram_chi2_test(std::span<const double> a, std::span<const double> b, std::size_t bins,
                                      double alpha) {
  require(a.size() >= tolerances::kChi2MinSamples && b.size() >= tolerances::kChi2MinSamples, ErrorCode::input,
          "chi-square test needs at least 10^4 samples on each side");
  require(bins >= 2, ErrorCode::binning, "chi-square test needs at least 2 bins");
  const auto [amin, amax] = std::minmax_element(a.begin(), a.end());
  const auto [bmin, bmax] = std::minmax_element(b.begin(), b.end());
  const double lo = std::min(*amin, *bmin);
  const double hi = std::max(*amax, *bmax);
  require(std::isfinite(lo) && std::isfinite(hi), ErrorCode::binning, "samples contain non-finite values");
  require(hi > lo, ErrorCode::binning, "all samples are identical; no binning possible");

  const auto bin_of = [&](double x) {
    const auto i = static_cast<std::size_t>((x - lo) / (hi - lo) * static_cast<double>(bins));
    return std::min(i, bins - 1);
  };
  std::vector<double> ca(bins, 0.0), cb(bins, 0.0);
  for (double x : a) ca[bin_of(x)] += 1.0;
  for (double x : b) cb[bin_of(x)] += 1.0;

  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double share_a = na / (na + nb);
  std::vector<std::pair<double, double>> merged;
  double acc_a = 0.0, acc_b = 0.0;
  for (std::size_t i = 0; i < bins; ++i) {
    acc_a += ca[i];
    acc_b += cb[i];
    const double total = acc_a + acc_b;
    if (total * share_a >= tolerances::kChi2MinExpectedCount &&
        total * (1.0 - share_a) >= tolerances::kChi2MinExpectedCount) {
      merged.emplace_back(acc_a, acc_b);
      acc_a = acc_b = 0.0;
    }
  }
  if (acc_a + acc_b > 0.0) {
    require(!merged.empty(), ErrorCode::binning, "no bin reaches the minimum expected count");
    merged.back().first += acc_a;
    merged.back().second += acc_b;
  }
  require(merged.size() >= 2, ErrorCode::binning, "fewer than 2 usable bins after merging");

  const double ka = std::sqrt(nb / na);
  const double kb = std::sqrt(na / nb);
  double chi2 = 0.0;
  for (const auto& [x, y] : merged) {
    const double d = ka * x - kb * y;
    chi2 += d * d / (x + y);
  }
  const double dof = static_cast<double>(merged.size() - 1);
  const double p = boost::math::gamma_q(dof / 2.0, chi2 / 2.0);

  TestReport r;
  r.test_name = "histogram_chi2";
  r.statistic = p;
  r.threshold = alpha;
  r.sample_size = a.size() + b.size();
  r.passed = p >= alpha;
  r.details = {{"chi2", detail::fmt(chi2)}, {"dof", detail::fmt(dof)}, {"bins_used", std::to_string(merged.size())}};
  return r;
}

// Statistic: fit r^2; passes when r^2 >= min_r2.
inline TestReport ptc_linearity_test(const PTCEstimate& estimate, double min_r2) {
  require(estimate.samples.size() >= 3, ErrorCode::insufficient_data, "PTC linearity needs at least 3 points");
  TestReport r;
  r.test_name = "ptc_linearity";
  r.statistic = estimate.fit_r2;
  r.threshold = min_r2;
  r.sample_size = estimate.samples.size();
  r.passed = estimate.fit_r2 >= min_r2;
  r.details = {{"system_gain_k", detail::fmt(estimate.system_gain_k)},
               {"read_variance", detail::fmt(estimate.read_variance)}};
  return r;
}

// Runs a stochastic test `runs` times (trial index passed in) and takes the
// majority verdict. The returned report is the first run's, annotated.
template <typename Trial>
TestReport majority_vote(Trial&& trial, int runs = tolerances::kMajorityRuns) {
  require(runs >= 1, ErrorCode::input, "majority vote needs at least one run");
  TestReport first;
  int passes = 0;
  for (int i = 0; i < runs; ++i) {
    TestReport r = trial(i);
    if (r.passed) ++passes;
    if (i == 0) first = std::move(r);
  }
  first.passed = 2 * passes > runs;
  first.details["majority.runs"] = std::to_string(runs);
  first.details["majority.passes"] = std::to_string(passes);
  return first;
}

}  // namespace rawnoise
