#pragma once

#include "rawnoise/bayer.hpp"
#include "rawnoise/container.hpp"
#include "rawnoise/dsc.hpp"
#include "rawnoise/error.hpp"
#include "rawnoise/iso_table.hpp"
#include "rawnoise/noise_model.hpp"
#include "rawnoise/patches.hpp"
#include "rawnoise/poisson.hpp"
#include "rawnoise/random.hpp"
#include "rawnoise/raw_frame.hpp"
#include "rawnoise/sna.hpp"
#include "rawnoise/tolerances.hpp"
#include "rawnoise/validate.hpp"

namespace rawnoise {
inline constexpr const char* kVersion = "0.1.0";
}  // namespace rawnoise
