#pragma once

#include <Eigen/Dense>
#include <vector>

#include "dcflex/network.hpp"

namespace dcflex {

/// Electrical data of one prosumer: source filter (R_s, L_s), shunt
/// capacitance C, nominal load current I_l, desired voltage V_d with the
/// allowed steady-state band [V_min, V_max], load control floor u_l_min,
/// and the welfare coefficients pi_c (generation) / pi_u (curtailment).
struct ProsumerParams {
  double R_s = 0.0;
  double L_s = 0.0;
  double C = 0.0;
  double I_l = 0.0;
  double V_d = 0.0;
  double V_min = 0.0;
  double V_max = 0.0;
  double u_l_min = 0.0;
  double pi_c = 0.0;
  double pi_u = 0.0;
};

/// One line: series resistance and inductance.
struct LineParams {
  double R = 0.0;
  double L = 0.0;
};

/// Column-wise aggregate of all prosumer and line parameters, the layout the
/// numerics work in.
struct GridParams {
  Eigen::VectorXd R_s, L_s, C, I_l, V_d, V_min, V_max, u_l_min, pi_c, pi_u;
  Eigen::VectorXd R_line, L_line;

  int n() const { return static_cast<int>(R_s.size()); }
  int m() const { return static_cast<int>(R_line.size()); }

  static GridParams from(const std::vector<ProsumerParams>& nodes,
                         const std::vector<LineParams>& lines);

  /// Physical sanity: positive R_s, L_s, C, line R/L; I_l >= 0; pi_c > 0
  /// with sum(pi_c) = 1 (tolerance 1e-9); pi_u >= 0; V_min <= V_d <= V_max;
  /// u_l_min in [0, 1]. Throws std::invalid_argument naming the offender.
  void validate(const GridTopology& topo) const;
};

/// Plant state: source currents I_s (n), line currents I (m), voltages V (n).
/// The same shape doubles as the state time-derivative.
struct GridState {
  Eigen::VectorXd I_s, I, V;

  static GridState zero(int n, int m);
};

/// Plant input: source voltages u_s (n) and load control signals u_l (n).
struct GridInput {
  Eigen::VectorXd u_s, u_l;

  /// Copy with u_l clamped into [0, 1], the only range the physical load
  /// switches accept.
  GridInput clamped() const;
};

/// Right-hand side of the grid dynamics:
///   L_s dI_s = -R_s I_s - V + u_s
///   L   dI   = -R I - B^T V
///   C   dV   =  I_s + B I - I_l u_l
/// u_l is clamped into [0, 1] before use.
GridState grid_derivative(const GridTopology& topo, const GridParams& p,
                          const GridState& x, const GridInput& u);

/// Steady state for constant inputs:
///   V  = (I + R_s L)^-1 (u_s - R_s I_l u_l),  L = B R^-1 B^T
///   I_s = L V + I_l u_l
///   I  = -R^-1 B^T V
GridState steady_state(const GridTopology& topo, const GridParams& p,
                       const Eigen::VectorXd& u_s, const Eigen::VectorXd& u_l);

/// Stored energy associated with the rate vector: 1/2 dx^T diag(L_s, L, C) dx.
double storage_value(const GridParams& p, const GridState& rates);

/// Report of the passivity inequality S(t1) - S(t0) <= supply integral over a
/// sampled trajectory segment.
struct DissipationReport {
  double supply_integral = 0.0;
  double storage_delta = 0.0;
  double margin = 0.0;  // supply_integral - storage_delta, >= 0 up to tolerance
};

/// Checks the plant passivity inequality on a sampled segment. plant_rates
/// holds dx at each sample, input_rates holds du at each sample; the supply
/// rate is du_s . dI_s - du_l . (I_l dV). If supply_integral_exact is given
/// (e.g. accumulated by the integrator with a better quadrature) it is used
/// instead of the trapezoid of the sampled supply.
DissipationReport dissipation_check(const GridParams& p,
                                    const std::vector<double>& t,
                                    const std::vector<GridState>& plant_rates,
                                    const std::vector<GridInput>& input_rates,
                                    const double* supply_integral_exact = nullptr);

}  // namespace dcflex
