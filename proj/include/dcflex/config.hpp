#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dcflex/controller.hpp"

namespace dcflex {

/// Inclusive interval a parameter is drawn from, uniformly.
struct RangeSpec {
  double lo = 0.0;
  double hi = 0.0;
};

/// Time-stepping knobs. "modal" advances along the exact flow of the active
/// affine piece with a geometrically growing step (handles the nine decades
/// between the load-gradient and consensus time scales); "rk4" is plain
/// fixed-step Runge-Kutta, usable when the weights keep the system mild.
struct IntegrationSettings {
  std::string method = "modal";
  double dt = 1e-4;           // initial (modal) or fixed (rk4) step
  double dt_max = 1e7;
  double growth = 1.05;       // per-step factor, modal only
  double horizon = 5e9;   // leaves room for the confirmation window at dt_max
  double tolerance = 1e-5;    // rate max-norm declaring convergence
  int window = 100;           // consecutive sub-tolerance steps required
  double divergence_norm = 1e9;
  int stride = 1;             // record every stride-th step
  bool accumulate_supply = false;

  void validate() const;  // throws std::invalid_argument
};

/// Everything a scenario run needs. Electrical parameters come either from
/// per-node/per-line literals or from ranges drawn with the seed; a literal
/// suppresses the corresponding draw. The flexibility block decides the
/// curtailment ceiling and how the utility coefficients are spread.
struct ScenarioConfig {
  std::string name = "scenario";

  // [grid]
  int nodes = 10;
  std::string topology = "ring";  // "ring" or "edges"
  std::vector<std::pair<int, int>> edges;
  std::uint64_t seed = 1;

  // [ranges] (seeded uniform draw mode)
  std::optional<RangeSpec> R_s, L_s, C, I_l, R_line, L_line;

  // [node] / [lines] literals; scalar entries broadcast
  std::optional<std::vector<double>> R_s_lit, L_s_lit, C_lit, I_l_lit;
  std::optional<std::vector<double>> R_line_lit, L_line_lit;
  std::vector<double> V_d{380.0}, V_min{379.3}, V_max{380.7}, pi_c{0.1};

  // [weights] + [gains]
  ControllerGains gains;  // gains.weights carries alpha/beta/gamma

  // [constraints]
  ConstraintSpec constraints{true, true, 1.0};

  // [flexibility]
  std::string flex_source = "ceiling";  // "ceiling" | "profile" | "explicit"
  double psi = 0.5;
  double stv = 0.0, sev = 0.0;      // profile mode, standardized scores
  double lambda_explicit = 0.0;     // explicit mode
  std::string appliance_table;      // empty = built-in table
  double spread = 0.25;             // sd of the pi_u shape draws, as a fraction of the mean
  std::vector<int> adopters;        // empty = every node

  // [integration] + [output]
  IntegrationSettings integration;

  /// Structural checks with field-path messages ("[ranges] R_s: ...").
  /// Electrical positivity of the drawn values is checked after drawing.
  void validate() const;
};

ScenarioConfig default_scenario_config();

/// Parses the INI-style config grammar. Strict: unknown sections or keys,
/// malformed numbers, wrong or missing unit suffixes, and bad ranges all
/// throw std::runtime_error naming file, line, and key. `overrides` entries
/// have the form "section.key=value" (the CLI's --set).
ScenarioConfig load_config_file(const std::string& path,
                                const std::vector<std::string>& overrides = {});
ScenarioConfig load_config_text(const std::string& text,
                                const std::string& origin = "<config>",
                                const std::vector<std::string>& overrides = {});

}  // namespace dcflex
