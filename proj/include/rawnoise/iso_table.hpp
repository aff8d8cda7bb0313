#pragma once

#include <cstdint>
#include <iterator>
#include <map>
#include <string>

#include "rawnoise/error.hpp"

namespace rawnoise {

using IsoTable = std::map<std::uint32_t, double>;

struct IsoLookupPolicy {
  bool interpolate = true;   // piecewise-linear between tabulated ISOs
  bool extrapolate = false;  // extend the end segments beyond the table
};

inline double lookup_iso(const IsoTable& table, double iso, IsoLookupPolicy policy = {},
                         ErrorCode on_miss = ErrorCode::coverage) {
  require(!table.empty(), on_miss, "ISO table is empty");
  const auto exact = table.find(static_cast<std::uint32_t>(iso));
  if (exact != table.end() && static_cast<double>(exact->first) == iso) return exact->second;
  const auto miss = [&] { fail(on_miss, "ISO " + std::to_string(iso) + " is not covered by the table"); };
  if (!policy.interpolate || table.size() < 2) miss();

  auto hi = table.upper_bound(static_cast<std::uint32_t>(iso));
  const bool below = hi == table.begin();
  const bool above = hi == table.end();
  if ((below || above) && !policy.extrapolate) miss();
  if (below) ++hi;
  if (above) --hi;
  const auto lo = std::prev(hi);
  const double t = (iso - lo->first) / static_cast<double>(hi->first - lo->first);
  return lo->second + t * (hi->second - lo->second);
}

}  // namespace rawnoise
