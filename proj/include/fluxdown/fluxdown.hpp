#pragma once

#include "fluxdown/error.hpp"
#include "fluxdown/grid.hpp"
#include "fluxdown/findiff.hpp"
#include "fluxdown/supergrid.hpp"
#include "fluxdown/spectral.hpp"
#include "fluxdown/metrics.hpp"
#include "fluxdown/synth.hpp"
#include "fluxdown/refine.hpp"
#include "fluxdown/io.hpp"

namespace fluxdown {
inline constexpr const char* version = "0.1.0";
}
