#include "dcflex/qp_oracle.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace dcflex {

QpProblem QpProblem::equality_only(Eigen::MatrixXd Q, Eigen::VectorXd c,
                                   Eigen::MatrixXd A, Eigen::VectorXd b) {
  QpProblem qp;
  const auto nv = c.size();
  qp.Q = std::move(Q);
  qp.c = std::move(c);
  qp.A = std::move(A);
  qp.b = std::move(b);
  qp.lo = Eigen::VectorXd::Constant(nv, -kInf);
  qp.hi = Eigen::VectorXd::Constant(nv, kInf);
  return qp;
}

namespace {

double qp_objective(const QpProblem& qp, const Eigen::VectorXd& z) {
  return 0.5 * z.dot(qp.Q * z) + qp.c.dot(z) + qp.obj_constant;
}

}  // namespace

QpSolution solve_equality_qp(const QpProblem& qp) {
  const int nv = static_cast<int>(qp.c.size());
  const int ne = static_cast<int>(qp.b.size());
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(nv + ne, nv + ne);
  K.topLeftCorner(nv, nv) = qp.Q;
  if (ne > 0) {
    K.topRightCorner(nv, ne) = qp.A.transpose();
    K.bottomLeftCorner(ne, nv) = qp.A;
  }
  Eigen::VectorXd rhs(nv + ne);
  rhs.head(nv) = -qp.c;
  rhs.tail(ne) = qp.b;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
  if (!lu.isInvertible())
    throw std::runtime_error("solve_equality_qp: singular KKT system");
  const Eigen::VectorXd sol = lu.solve(rhs);
  QpSolution out;
  out.z = sol.head(nv);
  out.eq_mult = sol.tail(ne);
  out.mult_lo = Eigen::VectorXd::Zero(nv);
  out.mult_hi = Eigen::VectorXd::Zero(nv);
  out.objective = qp_objective(qp, out.z);
  return out;
}

QpSolution brute_force_qp_oracle(const QpProblem& qp, long max_patterns) {
  const int nv = static_cast<int>(qp.c.size());
  const int ne = static_cast<int>(qp.b.size());
  std::vector<int> bounded;  // coordinates with at least one finite bound
  for (int i = 0; i < nv; ++i)
    if (std::isfinite(qp.lo[i]) || std::isfinite(qp.hi[i])) bounded.push_back(i);

  long patterns = 1;
  for (std::size_t i = 0; i < bounded.size(); ++i) {
    patterns *= 3;
    if (patterns > max_patterns)
      throw std::runtime_error("brute_force_qp_oracle: too many activity patterns");
  }

  const double feas_tol = 1e-9;
  bool found = false;
  QpSolution best;

  for (long code = 0; code < patterns; ++code) {
    // decode: 0 = free, 1 = at lower, 2 = at upper
    std::vector<int> status(nv, 0);
    long rem = code;
    bool valid = true;
    for (int idx : bounded) {
      const int s = static_cast<int>(rem % 3);
      rem /= 3;
      status[idx] = s;
      if (s == 1 && !std::isfinite(qp.lo[idx])) valid = false;
      if (s == 2 && !std::isfinite(qp.hi[idx])) valid = false;
    }
    if (!valid) continue;

    std::vector<int> free_idx;
    for (int i = 0; i < nv; ++i)
      if (status[i] == 0) free_idx.push_back(i);
    const int nf = static_cast<int>(free_idx.size());

    Eigen::VectorXd z = Eigen::VectorXd::Zero(nv);
    for (int i = 0; i < nv; ++i)
      if (status[i] == 1) z[i] = qp.lo[i];
      else if (status[i] == 2) z[i] = qp.hi[i];

    // reduced KKT over the free coordinates plus all equality rows
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(nf + ne, nf + ne);
    Eigen::VectorXd rhs(nf + ne);
    for (int a = 0; a < nf; ++a) {
      for (int b2 = 0; b2 < nf; ++b2) K(a, b2) = qp.Q(free_idx[a], free_idx[b2]);
      double lin = qp.c[free_idx[a]];
      for (int i = 0; i < nv; ++i)
        if (status[i] != 0) lin += qp.Q(free_idx[a], i) * z[i];
      rhs[a] = -lin;
    }
    for (int r = 0; r < ne; ++r) {
      for (int a = 0; a < nf; ++a) {
        K(nf + r, a) = qp.A(r, free_idx[a]);
        K(a, nf + r) = qp.A(r, free_idx[a]);
      }
      double fixed = 0.0;
      for (int i = 0; i < nv; ++i)
        if (status[i] != 0) fixed += qp.A(r, i) * z[i];
      rhs[nf + r] = qp.b[r] - fixed;
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
    if (!lu.isInvertible()) continue;
    const Eigen::VectorXd sol = lu.solve(rhs);
    for (int a = 0; a < nf; ++a) z[free_idx[a]] = sol[a];
    const Eigen::VectorXd nu = sol.tail(ne);

    // primal feasibility of the free coordinates
    bool ok = true;
    for (int a = 0; a < nf && ok; ++a) {
      const int i = free_idx[a];
      if (z[i] < qp.lo[i] - feas_tol || z[i] > qp.hi[i] + feas_tol) ok = false;
    }
    if (!ok) continue;

    // dual feasibility: stationarity residual on an active coordinate is the
    // bound multiplier; it must push inward
    Eigen::VectorXd grad = qp.Q * z + qp.c + qp.A.transpose() * nu;
    Eigen::VectorXd mlo = Eigen::VectorXd::Zero(nv), mhi = Eigen::VectorXd::Zero(nv);
    for (int i = 0; i < nv && ok; ++i) {
      if (status[i] == 1) {
        mlo[i] = grad[i];  // grad - mu_lo = 0 at lower bound
        if (mlo[i] < -feas_tol) ok = false;
      } else if (status[i] == 2) {
        mhi[i] = -grad[i];
        if (mhi[i] < -feas_tol) ok = false;
      }
    }
    if (!ok) continue;

    QpSolution cand;
    cand.z = z;
    cand.eq_mult = nu;
    cand.mult_lo = mlo;
    cand.mult_hi = mhi;
    cand.objective = qp_objective(qp, z);
    if (!found || cand.objective < best.objective - 1e-12) {
      best = cand;
      found = true;
    }
  }

  if (!found)
    throw std::runtime_error(
        "brute_force_qp_oracle: no primal/dual feasible activity pattern "
        "(problem infeasible or not strictly convex)");
  return best;
}

}  // namespace dcflex
