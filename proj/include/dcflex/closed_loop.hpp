#pragma once

#include <Eigen/Dense>
#include <map>
#include <memory>
#include <vector>

#include "dcflex/controller.hpp"
#include "dcflex/network.hpp"
#include "dcflex/plant.hpp"

namespace dcflex {

/// Index map of the stacked closed-loop state
/// [I_s, I, V, u_s*, u_l*, I_s*, V*, lambda_a, lambda_b (, eta_min, eta_max)].
struct StateLayout {
  int n = 0, m = 0;
  bool band = false;

  int I_s(int i) const { return i; }
  int I(int k) const { return n + k; }
  int V(int i) const { return n + m + i; }
  int u_s(int i) const { return 2 * n + m + i; }
  int u_l(int i) const { return 3 * n + m + i; }
  int I_s_star(int i) const { return 4 * n + m + i; }
  int V_star(int i) const { return 5 * n + m + i; }
  int lambda_a(int i) const { return 6 * n + m + i; }
  int lambda_b(int i) const { return 7 * n + m + i; }
  int eta_min(int i) const { return 8 * n + m + i; }
  int eta_max(int i) const { return 9 * n + m + i; }
  int size() const { return (band ? 10 : 8) * n + m; }
};

/// The interconnected plant/controller dynamics. Between constraint events
/// the system is affine, x' = A x + b with A and b fixed by the active-set
/// signature (which u_l* coordinates are pinned at a box bound, which band
/// multipliers are running). Steps advance along the exact flow of the
/// active piece, x+ = x + dt phi1(A dt) (A x + b), via an eigendecomposition
/// of the reduced A; this is what makes time constants nine decades apart
/// integrable. Piece factorizations are cached per signature.
class ClosedLoopSystem {
 public:
  ClosedLoopSystem(GridTopology topo, GridParams params, ControllerGains gains,
                   ConstraintSpec constraints);
  ~ClosedLoopSystem();
  ClosedLoopSystem(ClosedLoopSystem&&) noexcept;
  ClosedLoopSystem& operator=(ClosedLoopSystem&&) noexcept;

  const StateLayout& layout() const { return lay_; }
  const GridTopology& topology() const { return topo_; }
  const GridParams& params() const { return p_; }
  const ControllerGains& gains() const { return gains_; }
  const ConstraintSpec& constraints() const { return constraints_; }

  Eigen::VectorXd pack(const GridState& gs, const ControllerState& cs) const;
  void unpack(const Eigen::VectorXd& x, GridState& gs, ControllerState& cs) const;

  /// Cold start: V = V* = V_d, u_s* = V_d, u_l* = 1, everything else zero.
  Eigen::VectorXd cold_start() const;

  /// Projected vector field, evaluated coordinate-wise in extended
  /// precision (the stationarity rows cancel terms of order alpha/pi_u; in
  /// plain double the residual floor would sit near the convergence
  /// tolerance). Pinned u_l* coordinates and parked band multipliers get
  /// zero rate.
  Eigen::VectorXd rate(const Eigen::VectorXd& x) const;

  /// Active-set signature at x: per node the u_l* status (0 free, 1 pinned
  /// low, 2 pinned high) followed by the eta_min/eta_max running flags.
  std::vector<char> signature(const Eigen::VectorXd& x) const;

  struct StepResult {
    Eigen::VectorXd x;
    bool used_fallback = false;  // dense expm instead of the modal factors
  };

  /// Advances dt along the exact flow of the piece active at x. If
  /// supply_increment is given, accumulates the plant port supply
  /// du_s.dI_s - du_l.(I_l dV) over the step by 3-point Gauss quadrature
  /// (the rate along the piece flow is e^{A t} r, evaluable at the nodes).
  StepResult step(const Eigen::VectorXd& x, double dt,
                  double* supply_increment = nullptr) const;

  /// Clamps u_l* into its box and the band multipliers to >= 0 (removes
  /// one-ulp integration overshoot; exact landing makes signatures crisp).
  void snap(Eigen::VectorXd& x) const;

  /// Equilibrium of the piece active at x: pinned coordinates keep their
  /// values, free ones solve A_ff x_f = -b_eff (LU plus extended-precision
  /// iterative refinement; the matrix mixes 1e-6 and 1e10 entries). Throws
  /// std::runtime_error if the piece matrix is singular.
  Eigen::VectorXd piece_equilibrium(const Eigen::VectorXd& x) const;

  /// 1/2 rate^T diag(L_s, L, C) rate over the plant block.
  double plant_storage(const Eigen::VectorXd& rate) const;
  /// 1/2 sum tau_i rate_i^2 over the controller block.
  double ctrl_storage(const Eigen::VectorXd& rate) const;
  /// Port-augmented first-order optimality residual at x.
  KktResidual kkt(const Eigen::VectorXd& x) const;
  /// Max-norm of the plant rows of rate(x).
  double plant_residual(const Eigen::VectorXd& x) const;

 private:
  struct Piece;

  const Piece& piece_for(const std::vector<char>& sig) const;
  void assemble(const std::vector<char>& sig, Piece& piece) const;

  GridTopology topo_;
  GridParams p_;
  ControllerGains gains_;
  ConstraintSpec constraints_;
  StateLayout lay_;
  mutable std::map<std::vector<char>, std::unique_ptr<Piece>> pieces_;
};

}  // namespace dcflex
