#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rawnoise {

// Every failure surfaced by the library carries one of these codes. The CLI
// maps them to process exit codes (see exit_code_for).
enum class ErrorCode {
  dimension,
  format,
  capacity,
  corrupt_header,
  checksum,
  truncated,
  version_unsupported,
  io,
  domain,
  insufficient_data,
  calibration_failed,
  rank,
  coverage,
  profile,
  pairing,
  set,
  input,
  binning,
  config,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::dimension: return "dimension";
    case ErrorCode::format: return "format";
    case ErrorCode::capacity: return "capacity";
    case ErrorCode::corrupt_header: return "corrupt_header";
    case ErrorCode::checksum: return "checksum";
    case ErrorCode::truncated: return "truncated";
    case ErrorCode::version_unsupported: return "version_unsupported";
    case ErrorCode::io: return "io";
    case ErrorCode::domain: return "domain";
    case ErrorCode::insufficient_data: return "insufficient_data";
    case ErrorCode::calibration_failed: return "calibration_failed";
    case ErrorCode::rank: return "rank";
    case ErrorCode::coverage: return "coverage";
    case ErrorCode::profile: return "profile";
    case ErrorCode::pairing: return "pairing";
    case ErrorCode::set: return "set";
    case ErrorCode::input: return "input";
    case ErrorCode::binning: return "binning";
    case ErrorCode::config: return "config";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool condition, ErrorCode code, const std::string& what) {
  if (!condition) fail(code, what);
}

}  // namespace rawnoise
