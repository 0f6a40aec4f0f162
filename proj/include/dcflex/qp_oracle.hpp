#pragma once

#include <Eigen/Dense>
#include <limits>

namespace dcflex {

/// Strictly convex quadratic program
///   min 1/2 z^T Q z + c^T z   s.t.  A z = b,  lo <= z <= hi
/// Bounds are optional per coordinate (+-inf disables them).
struct QpProblem {
  Eigen::MatrixXd Q;
  Eigen::VectorXd c;
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  Eigen::VectorXd lo, hi;
  double obj_constant = 0.0;  // added to reported objective values

  static constexpr double kInf = std::numeric_limits<double>::infinity();

  static QpProblem equality_only(Eigen::MatrixXd Q, Eigen::VectorXd c,
                                 Eigen::MatrixXd A, Eigen::VectorXd b);
};

struct QpSolution {
  Eigen::VectorXd z;
  Eigen::VectorXd eq_mult;        // one per equality row, Lagrangian + nu^T (Az - b)
  Eigen::VectorXd mult_lo, mult_hi;  // bound multipliers, >= 0 where active
  double objective = 0.0;
};

/// Direct KKT solve of the equality-constrained problem (bounds ignored).
/// Throws std::runtime_error if the KKT matrix is singular.
QpSolution solve_equality_qp(const QpProblem& qp);

/// Reference solver used to cross-check closed-form results: enumerates
/// every lower/free/upper activity pattern of the bounded coordinates
/// (up to 3^k), solves the reduced equality KKT for each, and returns the
/// unique pattern that is primal and dual feasible. Deliberately brute
/// force; keep instances small. Throws std::runtime_error if no pattern is
/// consistent or if the pattern count exceeds max_patterns.
QpSolution brute_force_qp_oracle(const QpProblem& qp,
                                 long max_patterns = 300000);

}  // namespace dcflex
