#pragma once

// Every statistical threshold used by the validation suite and the
// acceptance criteria. Bump kToleranceVersion when any value changes.

#include <cstddef>
#include <string_view>

namespace rawnoise::tolerances {

inline constexpr std::string_view kToleranceVersion = "1";

// Photon transfer
inline constexpr double kPtcGainRelError = 0.02;
inline constexpr double kPtcMinR2 = 0.999;

// Shot noise augmentation
inline constexpr double kSnaMeanRelError = 0.01;
inline constexpr double kSnaVarRelError = 0.03;
inline constexpr double kSnaEquivalenceRelError = 0.03;
inline constexpr double kChi2Alpha = 0.01;
inline constexpr int kMajorityRuns = 3;

// Dark shading correction
inline constexpr double kDscMapCorrelation = 0.999;
inline constexpr double kDscReconstructionRmse = 0.3;  // DN, at ISO 25600
inline constexpr double kDscResidualMeanBound = 0.1;   // DN
inline constexpr double kDscResidualPixelFraction = 0.999;
inline constexpr double kDscCenteringRelWhite = 1e-6;

// Statistical tests
inline constexpr std::size_t kChi2MinSamples = 10000;
inline constexpr double kChi2MinExpectedCount = 5.0;

}  // namespace rawnoise::tolerances
