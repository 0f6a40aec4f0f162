#pragma once

#include <Eigen/Dense>

#include "dcflex/network.hpp"
#include "dcflex/plant.hpp"
#include "dcflex/welfare.hpp"

namespace dcflex {

/// Decision variables and multipliers of the distributed optimizer. The
/// starred vectors are the controller's internal copies of the plant
/// quantities; lambda_a/lambda_b price the node voltage law and the current
/// balance; eta_min/eta_max are the nonnegative multipliers of the voltage
/// band (used only when that constraint is enabled, kept allocated always).
struct ControllerState {
  Eigen::VectorXd u_s_star, u_l_star, I_s_star, V_star;
  Eigen::VectorXd lambda_a, lambda_b;
  Eigen::VectorXd eta_min, eta_max;

  static ControllerState zero(int n);
  Eigen::Index n() const { return u_s_star.size(); }
};

/// Time constants of the six controller blocks plus the objective weights.
struct ControllerGains {
  double tau_s = 1.0, tau_l = 1.0, tau_I = 1.0, tau_V = 1.0;
  double tau_a = 1.0, tau_b = 1.0;
  WelfareWeights weights;

  void validate() const;  // throws std::invalid_argument on tau <= 0
};

/// Controller input ports; the plant interconnection sets nu_s = -I_s and
/// nu_l = I_l V.
struct ControllerPorts {
  Eigen::VectorXd nu_s, nu_l;
  static ControllerPorts zero(int n);
};

/// Inequality-constraint toggles. clamp_u_l projects the u_l_star dynamics
/// onto [u_l_min, 1]; voltage_band runs multiplier dynamics keeping V_star
/// inside [V_min, V_max] at steady state. Both off reproduces the plain
/// saddle-point dynamics exactly.
struct ConstraintSpec {
  bool clamp_u_l = false;
  bool voltage_band = false;
  double tau_eta = 1.0;
};

/// Max-norm KKT residual with a per-block breakdown. Active box bounds
/// count only the infeasible (outward) part of the gradient; the eta rows
/// count the active-branch complementarity violation.
struct KktResidual {
  double u_s = 0.0, u_l = 0.0, I_s = 0.0, V = 0.0;
  double balance_a = 0.0, balance_b = 0.0, eta = 0.0;
  double max_norm = 0.0;
};

/// Saddle-point vector field: gradient descent on the decision variables,
/// ascent on the multipliers, all Laplacian products neighbor-only. When
/// voltage_band is on, the eta forces enter the V_star rate and each eta
/// runs projected ascent on its band violation (rate active iff eta > 0 or
/// the bound is violated). u_l_star rates are NOT box-projected here; see
/// project_box_rates.
ControllerState controller_derivative(const GridTopology& topo,
                                      const GridParams& p,
                                      const ControllerGains& gains,
                                      const ConstraintSpec& constraints,
                                      const ControllerState& cs,
                                      const ControllerPorts& ports);

/// Zeroes u_l_star rate components that sit at a box bound and point
/// outward (within 1e-12 relative of the bound). No-op unless clamp_u_l.
void project_box_rates(const GridParams& p, const ConstraintSpec& constraints,
                       const ControllerState& cs, ControllerState& rate);

/// Clamps u_l_star into its box and eta into the nonnegative orthant,
/// removing integration drift. No-op for disabled constraints.
void snap_into_box(const GridParams& p, const ConstraintSpec& constraints,
                   ControllerState& cs);

/// First-order optimality residual of the welfare problem the controller
/// solves, augmented with the port penalty when ports are given. Internally
/// evaluated in extended precision: the stationarity rows cancel terms of
/// order alpha/pi_u and double arithmetic would floor near 1e-6.
KktResidual kkt_residual(const GridTopology& topo, const GridParams& p,
                         const WelfareWeights& w,
                         const ConstraintSpec& constraints,
                         const ControllerState& cs,
                         const ControllerPorts* ports = nullptr);

/// Plant/controller coupling: u_s = u_s_star, u_l = u_l_star (clamped into
/// its box only when that constraint is enabled), nu_s = -I_s, nu_l = I_l V.
void interconnect(const GridState& gs, const ControllerState& cs,
                  const GridParams& p, const ConstraintSpec& constraints,
                  GridInput& input, ControllerPorts& ports);

/// Controller storage 1/2 sum tau_i xdot_i^2 evaluated on a rate vector;
/// includes the eta rates when the voltage band is enabled.
double controller_storage(const ControllerGains& gains,
                          const ConstraintSpec& constraints,
                          const ControllerState& rate);

/// At a plant steady state the net power drawn through the control inputs
/// equals the resistive losses in the filters and lines:
///   I_s' u_s - V' (I_l u_l) = I_s' R_s I_s + V' L V.
struct LossIdentityReport {
  double lhs = 0.0;
  double rhs = 0.0;
  double gap_rel = 0.0;          // |lhs-rhs| / max(1, |lhs|)
  double steady_residual = 0.0;  // max-norm plant rate, should be ~0
};
LossIdentityReport loss_penalty_identity(const GridTopology& topo,
                                         const GridParams& p,
                                         const GridState& gs,
                                         const GridInput& input);

}  // namespace dcflex
