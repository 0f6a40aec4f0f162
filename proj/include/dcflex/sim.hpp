#pragma once

#include <string>
#include <vector>

#include "dcflex/closed_loop.hpp"
#include "dcflex/config.hpp"
#include "dcflex/psychosocial.hpp"
#include "dcflex/rng.hpp"

namespace dcflex {

struct SimEvent {
  double t = 0.0;
  std::string what;
};

/// Time-indexed record of a run. Samples are taken every `stride` accepted
/// steps plus always the final state; storage/KKT columns are evaluated at
/// the sample states.
struct SimTrace {
  std::vector<double> t;
  std::vector<GridState> plant;
  std::vector<ControllerState> ctrl;
  std::vector<double> S, S_c, S_cl, kkt;
  std::vector<SimEvent> events;

  Eigen::VectorXd final_state;
  bool converged = false;
  bool diverged = false;
  double convergence_time = 0.0;  // first instant of the confirming window
  int lyapunov_violations = 0;
  long steps = 0;
  long fallback_steps = 0;
  double supply_integral = 0.0;  // only when accumulate_supply is set
};

/// Summary a run is judged by.
struct RunCertificate {
  bool converged = false;
  bool diverged = false;
  double convergence_time = 0.0;
  double final_rate_norm = 0.0;
  double kkt_residual = 0.0;
  double plant_rate_norm = 0.0;     // max-norm of the plant rows of the rate
  double plant_eq_residual = 0.0;   // circuit equations, relative
  double loss_identity_gap = 0.0;   // relative
  bool band_compliant = false;      // every V in [V_min, V_max] (+1e-6 slack)
  double reduction_amps = 0.0;      // sum I_l (1 - u_l)
  double reduction_pct = 0.0;
  double average_voltage = 0.0;     // pi_c-weighted mean of V
  int lyapunov_violations = 0;
  GridState steady;
  ControllerState steady_ctrl;
};

struct ScenarioResult {
  GridParams params;
  double lambda_flex = 0.0;  // curtailment ceiling the pi_u were tuned to
  SimTrace trace;
  RunCertificate certificate;
};

/// Draws the electrical parameters: ranges are consumed in the fixed order
/// R_s, L_s, C, I_l, R_line, L_line (one uniform draw per node/line), then
/// the pi_u spread. A literal suppresses its draws entirely, so switching a
/// field between range and literal shifts the stream for later fields.
/// pi_c and the voltage targets come from the config literals; u_l_min is
/// 1 - psi for adopters and 1 for the rest.
GridParams draw_parameters(const ScenarioConfig& cfg, const GridTopology& topo,
                           Rng& rng);

/// The curtailment ceiling for the configured source: psi itself, the
/// survey-calibrated estimate at (stv, sev), or the explicit value.
double scenario_lambda(const ScenarioConfig& cfg);

/// Integrates the closed loop from x0. Modal mode grows the step
/// geometrically and bisects down whenever the candidate lands in a
/// different active set, so constraint activations are resolved at the base
/// step; rk4 mode is fixed-step. Convergence: rate max-norm below tolerance
/// for `window` consecutive steps. Divergence: non-finite state or max-norm
/// above divergence_norm.
SimTrace integrate(const ClosedLoopSystem& sys, const Eigen::VectorXd& x0,
                   const IntegrationSettings& settings);

/// Full pipeline: topology, draws, flexibility tuning, cold start,
/// integration, certificate.
ScenarioResult run_scenario(const ScenarioConfig& cfg);

/// Certificate for an already-integrated trace.
RunCertificate make_certificate(const ClosedLoopSystem& sys,
                                const SimTrace& trace);

/// A state scattered around the operating envelope: voltages within a few
/// volts of V_d, currents up to the load scale, multipliers in their
/// equilibrium sign ranges. Used by the convergence-uniqueness probes.
Eigen::VectorXd random_init(const ClosedLoopSystem& sys, Rng& rng);

GridTopology build_topology(const ScenarioConfig& cfg);

}  // namespace dcflex
