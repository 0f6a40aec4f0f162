#pragma once

#include "dcflex/config.hpp"

namespace dcflex {

/// Config text for the four bundled scenarios (1-based). They share the
/// ten-node ring and differ only in how the curtailment ceiling is set:
/// 1 uses the raw ceiling psi, 2-4 the survey-calibrated estimate at
/// neutral, sustainability-leaning, and wealth-leaning value profiles.
const char* preset_text(int which);

ScenarioConfig preset_scenario(int which);

}  // namespace dcflex
