#include "dcflex/welfare.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace dcflex {

namespace {

void check_same_size(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                     const char* what) {
  if (a.size() != b.size())
    throw std::invalid_argument(std::string("welfare: size mismatch in ") + what);
}

}  // namespace

double generation_cost(double alpha, const Eigen::VectorXd& pi_c,
                       const Eigen::VectorXd& I_s) {
  check_same_size(pi_c, I_s, "generation_cost");
  double total = 0.0;
  for (Eigen::Index i = 0; i < pi_c.size(); ++i) {
    if (pi_c[i] < 0.0)
      throw std::invalid_argument("generation_cost: pi_c must be >= 0");
    if (pi_c[i] == 0.0) {
      if (I_s[i] != 0.0)
        throw std::invalid_argument(
            "generation_cost: node with pi_c = 0 cannot generate (node " +
            std::to_string(i) + ")");
      continue;
    }
    total += I_s[i] * I_s[i] / pi_c[i];
  }
  return 0.5 * alpha * total;
}

double load_utility(double alpha, const Eigen::VectorXd& pi_u,
                    const Eigen::VectorXd& I_l, const Eigen::VectorXd& u_l) {
  check_same_size(pi_u, I_l, "load_utility");
  check_same_size(pi_u, u_l, "load_utility");
  double total = 0.0;
  for (Eigen::Index i = 0; i < pi_u.size(); ++i) {
    if (pi_u[i] < 0.0)
      throw std::invalid_argument("load_utility: pi_u must be >= 0");
    const double gap = I_l[i] * (1.0 - u_l[i]);
    if (pi_u[i] == 0.0) {
      if (std::abs(1.0 - u_l[i]) > 1e-12)
        throw std::invalid_argument(
            "load_utility: node with pi_u = 0 cannot curtail (node " +
            std::to_string(i) + ")");
      continue;
    }
    total += gap * gap / pi_u[i];
  }
  return -0.5 * alpha * total;
}

double welfare_objective(const WelfareWeights& w, const GridParams& p,
                         const Eigen::VectorXd& u_s, const Eigen::VectorXd& u_l,
                         const Eigen::VectorXd& I_s, const Eigen::VectorXd& V) {
  double obj = generation_cost(w.alpha, p.pi_c, I_s) -
               load_utility(w.alpha, p.pi_u, p.I_l, u_l);
  if (w.beta != 0.0) obj += 0.5 * w.beta * u_s.squaredNorm();
  if (w.gamma != 0.0) obj += 0.5 * w.gamma * (V - p.V_d).squaredNorm();
  return obj;
}

IdealWelfareOptimum ideal_welfare_optimum(double alpha,
                                          const Eigen::VectorXd& pi_c,
                                          const Eigen::VectorXd& pi_u,
                                          const Eigen::VectorXd& I_l) {
  check_same_size(pi_c, pi_u, "ideal_welfare_optimum");
  check_same_size(pi_c, I_l, "ideal_welfare_optimum");
  if (alpha <= 0.0)
    throw std::invalid_argument("ideal_welfare_optimum: alpha must be > 0");
  const Eigen::Index n = pi_c.size();
  if (n == 0) throw std::invalid_argument("ideal_welfare_optimum: empty grid");
  if ((pi_c.array() < 0.0).any() || (pi_u.array() < 0.0).any())
    throw std::invalid_argument("ideal_welfare_optimum: weights must be >= 0");
  const double wsum = pi_c.sum() + pi_u.sum();
  if (wsum <= 0.0)
    throw std::invalid_argument(
        "ideal_welfare_optimum: pi_c and pi_u sum to zero, price undefined");

  IdealWelfareOptimum out;
  out.price = alpha * I_l.sum() / wsum;
  out.I_s = pi_c * (out.price / alpha);
  out.u_l = Eigen::VectorXd::Ones(n);
  for (Eigen::Index i = 0; i < n; ++i)
    if (I_l[i] != 0.0)
      out.u_l[i] = 1.0 - pi_u[i] * out.price / (alpha * I_l[i]);
  return out;
}

namespace {

// shared scaffolding: 4n variables [u_s; u_l; I_s; V], 2n physical rows
struct Blocks {
  int n;
  int us(int i) const { return i; }
  int ul(int i) const { return n + i; }
  int is(int i) const { return 2 * n + i; }
  int v(int i) const { return 3 * n + i; }
};

void fill_physical_rows(const GridTopology& topo, const GridParams& p,
                        const Blocks& blk, Eigen::MatrixXd& A) {
  const int n = blk.n;
  const Eigen::MatrixXd L = weighted_laplacian(topo, p.R_line);
  for (int i = 0; i < n; ++i) {
    A(i, blk.us(i)) = 1.0;
    A(i, blk.is(i)) = -p.R_s[i];
    A(i, blk.v(i)) = -1.0;
    A(n + i, blk.ul(i)) = -p.I_l[i];
    A(n + i, blk.is(i)) = 1.0;
    for (int j = 0; j < n; ++j) A(n + i, blk.v(j)) = -L(i, j);
  }
}

void check_qp_inputs(const GridParams& p) {
  for (Eigen::Index i = 0; i < p.n(); ++i) {
    if (p.pi_u[i] <= 0.0)
      throw std::invalid_argument("welfare_qp: pi_u must be > 0 (node " +
                                  std::to_string(i) + ")");
    if (p.pi_c[i] <= 0.0)
      throw std::invalid_argument("welfare_qp: pi_c must be > 0 (node " +
                                  std::to_string(i) + ")");
    if (p.I_l[i] == 0.0)
      throw std::invalid_argument("welfare_qp: I_l must be nonzero (node " +
                                  std::to_string(i) + ")");
  }
}

QpProblem base_qp(const GridTopology& topo, const GridParams& p, double alpha,
                  int extra_rows) {
  check_qp_inputs(p);
  const int n = static_cast<int>(p.n());
  const Blocks blk{n};
  QpProblem qp;
  qp.Q = Eigen::MatrixXd::Zero(4 * n, 4 * n);
  qp.c = Eigen::VectorXd::Zero(4 * n);
  qp.A = Eigen::MatrixXd::Zero(2 * n + extra_rows, 4 * n);
  qp.b = Eigen::VectorXd::Zero(2 * n + extra_rows);
  qp.lo = Eigen::VectorXd::Constant(4 * n, -QpProblem::kInf);
  qp.hi = Eigen::VectorXd::Constant(4 * n, QpProblem::kInf);
  for (int i = 0; i < n; ++i) {
    qp.Q(blk.is(i), blk.is(i)) = alpha / p.pi_c[i];
    const double q = alpha * p.I_l[i] * p.I_l[i] / p.pi_u[i];
    qp.Q(blk.ul(i), blk.ul(i)) = q;
    qp.c[blk.ul(i)] = -q;
    qp.obj_constant += 0.5 * q;  // completes (alpha/2) I_l^2 (1-u_l)^2 / pi_u
  }
  fill_physical_rows(topo, p, blk, qp.A);
  return qp;
}

}  // namespace

QpProblem welfare_qp_ideal(const GridTopology& topo, const GridParams& p,
                           double alpha) {
  if (alpha <= 0.0)
    throw std::invalid_argument("welfare_qp_ideal: alpha must be > 0");
  const int n = static_cast<int>(p.n());
  QpProblem qp = base_qp(topo, p, alpha, 1);
  const Blocks blk{n};
  for (int i = 0; i < n; ++i) qp.A(2 * n, blk.v(i)) = 1.0;
  qp.b[2 * n] = p.V_d.sum();
  return qp;
}

QpProblem welfare_qp_regularized(const GridTopology& topo, const GridParams& p,
                                 const WelfareWeights& w,
                                 const WelfareQpOptions& opts) {
  if (w.alpha <= 0.0)
    throw std::invalid_argument("welfare_qp_regularized: alpha must be > 0");
  if (w.beta < 0.0 || w.gamma < 0.0)
    throw std::invalid_argument(
        "welfare_qp_regularized: beta and gamma must be >= 0");
  if (w.beta == 0.0 && w.gamma == 0.0)
    throw std::invalid_argument(
        "welfare_qp_regularized: beta and gamma cannot both be zero, use "
        "welfare_qp_ideal");
  const int n = static_cast<int>(p.n());
  QpProblem qp = base_qp(topo, p, w.alpha, 0);
  const Blocks blk{n};
  for (int i = 0; i < n; ++i) {
    qp.Q(blk.us(i), blk.us(i)) += w.beta;
    qp.Q(blk.v(i), blk.v(i)) += w.gamma;
    qp.c[blk.v(i)] -= w.gamma * p.V_d[i];
    qp.obj_constant += 0.5 * w.gamma * p.V_d[i] * p.V_d[i];
  }
  if (opts.nu_s) {
    check_same_size(*opts.nu_s, p.V_d, "welfare_qp_regularized nu_s");
    for (int i = 0; i < n; ++i) qp.c[blk.us(i)] -= (*opts.nu_s)[i];
  }
  if (opts.nu_l) {
    check_same_size(*opts.nu_l, p.V_d, "welfare_qp_regularized nu_l");
    for (int i = 0; i < n; ++i) qp.c[blk.ul(i)] -= (*opts.nu_l)[i];
  }
  if (opts.box_u_l)
    for (int i = 0; i < n; ++i) {
      qp.lo[blk.ul(i)] = p.u_l_min[i];
      qp.hi[blk.ul(i)] = 1.0;
    }
  if (opts.box_V)
    for (int i = 0; i < n; ++i) {
      qp.lo[blk.v(i)] = p.V_min[i];
      qp.hi[blk.v(i)] = p.V_max[i];
    }
  return qp;
}

}  // namespace dcflex
