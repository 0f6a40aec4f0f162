#pragma once

#include <Eigen/Dense>

#include "dcflex/network.hpp"
#include "dcflex/plant.hpp"
#include "dcflex/qp_oracle.hpp"

namespace dcflex {

/// Objective weights: alpha scales generation cost and curtailment
/// disutility, beta the source-voltage regularizer, gamma the deviation
/// from the nominal voltage.
struct WelfareWeights {
  double alpha = 1.0;
  double beta = 0.0;
  double gamma = 0.0;
};

/// (alpha/2) sum I_s_i^2 / pi_c_i. A node with pi_c_i = 0 may not generate;
/// its term is zero when I_s_i = 0 and an error otherwise.
double generation_cost(double alpha, const Eigen::VectorXd& pi_c,
                       const Eigen::VectorXd& I_s);

/// -(alpha/2) sum I_l_i^2 (1 - u_l_i)^2 / pi_u_i, the disutility of
/// curtailing load i below its demand. pi_u_i = 0 means inflexible: the
/// term is zero when u_l_i = 1 and an error otherwise.
double load_utility(double alpha, const Eigen::VectorXd& pi_u,
                    const Eigen::VectorXd& I_l, const Eigen::VectorXd& u_l);

/// cost - utility + (beta/2)|u_s|^2 + (gamma/2)|V - V_d|^2
double welfare_objective(const WelfareWeights& w, const GridParams& p,
                         const Eigen::VectorXd& u_s, const Eigen::VectorXd& u_l,
                         const Eigen::VectorXd& I_s, const Eigen::VectorXd& V);

/// Closed form of the unregularized welfare optimum. Because shifting all
/// node voltages together is free, the balance multiplier is a single
/// uniform price and generation/curtailment split in proportion to the
/// pi weights:
///   price = alpha * sum(I_l) / (sum(pi_c) + sum(pi_u))
///   I_s_i = pi_c_i * price / alpha
///   u_l_i = 1 - pi_u_i * price / (alpha * I_l_i)
/// Nodes with I_l_i = 0 keep u_l_i = 1. Throws if the weight sums are
/// degenerate. Note the QP balance multipliers equal -price under the
/// sign convention of QpSolution::eq_mult.
struct IdealWelfareOptimum {
  Eigen::VectorXd u_l;
  Eigen::VectorXd I_s;
  double price = 0.0;
};
IdealWelfareOptimum ideal_welfare_optimum(double alpha,
                                          const Eigen::VectorXd& pi_c,
                                          const Eigen::VectorXd& pi_u,
                                          const Eigen::VectorXd& I_l);

/// Variable layout shared by the QP builders below: z = [u_s; u_l; I_s; V],
/// 4n variables. Equality rows: first n enforce u_s - R_s I_s - V = 0,
/// next n enforce -I_l u_l + I_s - L V = 0 with L the resistive network
/// Laplacian, so eq_mult.head(n) and eq_mult.segment(n, n) line up with the
/// controller's lambda_a and lambda_b.
struct WelfareQpOptions {
  bool box_u_l = false;  // u_l_i in [u_l_min_i, 1]
  bool box_V = false;    // V_i in [V_min_i, V_max_i]
  // optional linear port penalties -nu_s^T u_s and -nu_l^T u_l
  const Eigen::VectorXd* nu_s = nullptr;
  const Eigen::VectorXd* nu_l = nullptr;
};

/// Unregularized instance (beta = gamma = 0). Its KKT system is singular
/// under a uniform shift of (u_s, V), so one extra equality row pins
/// sum(V) = sum(V_d); that row's multiplier is zero at the optimum and is
/// appended after the 2n physical rows. Requires pi_u > 0 and I_l != 0.
QpProblem welfare_qp_ideal(const GridTopology& topo, const GridParams& p,
                           double alpha);

/// Regularized instance. beta and gamma may not both vanish (that case is
/// welfare_qp_ideal). Ports and boxes are optional.
QpProblem welfare_qp_regularized(const GridTopology& topo, const GridParams& p,
                                 const WelfareWeights& w,
                                 const WelfareQpOptions& opts = {});

}  // namespace dcflex
