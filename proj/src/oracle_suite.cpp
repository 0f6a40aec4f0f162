#include "dcflex/oracle_suite.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "dcflex/network.hpp"
#include "dcflex/psychosocial.hpp"
#include "dcflex/rng.hpp"
#include "dcflex/welfare.hpp"

namespace dcflex {

namespace {

double rel_gap(double got, double want) {
  return std::abs(got - want) / std::max(1.0, std::abs(want));
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

GridTopology small_topology(int n) {
  if (n >= 3) return ring_topology(n);
  GridTopology t;
  t.n_nodes = n;
  for (int i = 0; i + 1 < n; ++i) t.edges.emplace_back(i, i + 1);
  return t;
}

OracleCheck check_curtailment_qp() {
  OracleCheck c;
  c.name = "curtailment-qp";
  Rng rng(0xACCE55u);
  double worst = 0.0;
  const double tol = 1e-8;
  int count = 0;
  for (int trial = 0; trial < 50; ++trial) {
    int n = 2 + trial % 4;  // 2..5
    GridTopology topo = small_topology(n);
    GridParams p;
    p.R_s = Eigen::VectorXd::Zero(n);
    p.L_s = Eigen::VectorXd::Constant(n, 2e-3);
    p.C = Eigen::VectorXd::Constant(n, 2e-3);
    p.I_l = Eigen::VectorXd::Zero(n);
    p.V_d = Eigen::VectorXd::Constant(n, 380.0);
    p.V_min = Eigen::VectorXd::Constant(n, 379.3);
    p.V_max = Eigen::VectorXd::Constant(n, 380.7);
    p.u_l_min = Eigen::VectorXd::Zero(n);
    p.pi_c = Eigen::VectorXd::Zero(n);
    p.pi_u = Eigen::VectorXd::Zero(n);
    p.R_line = Eigen::VectorXd::Zero(topo.n_edges());
    p.L_line = Eigen::VectorXd::Constant(topo.n_edges(), 2.5e-6);
    for (int i = 0; i < n; ++i) {
      p.R_s[i] = rng.uniform(1e-3, 2e-3);
      p.I_l[i] = rng.uniform(1.0, 15.0);
      p.pi_c[i] = rng.uniform(0.05, 2.0);
      p.pi_u[i] = rng.uniform(0.05, 2.0);
    }
    for (int k = 0; k < topo.n_edges(); ++k)
      p.R_line[k] = rng.uniform(0.05, 0.1);
    double alpha = rng.uniform(0.5, 2.0);

    IdealWelfareOptimum ref =
        ideal_welfare_optimum(alpha, p.pi_c, p.pi_u, p.I_l);

    QpProblem qp = welfare_qp_ideal(topo, p, alpha);
    // wide boxes on the u_l block: inactive at the optimum, so the closed
    // form must still win, but the oracle has to walk its activity patterns
    qp.lo.segment(n, n).setConstant(-1e3);
    qp.hi.segment(n, n).setConstant(1e3);
    QpSolution sol = brute_force_qp_oracle(qp);

    for (int i = 0; i < n; ++i) {
      worst = std::max(worst, rel_gap(sol.z[n + i], ref.u_l[i]));
      worst = std::max(worst, rel_gap(sol.z[2 * n + i], ref.I_s[i]));
      // balance-row multipliers are the uniform price, negated
      worst = std::max(worst, rel_gap(-sol.eq_mult[n + i], ref.price));
    }
    ++count;
  }
  c.worst = worst;
  c.pass = worst <= tol;
  std::ostringstream os;
  os << count << " instances, worst relative gap " << fmt(worst)
     << " (tolerance " << fmt(tol) << ")";
  c.detail = os.str();
  return c;
}

OracleCheck check_flexibility_arithmetic() {
  OracleCheck c;
  c.name = "flexibility-arithmetic";
  const auto& models = default_appliances();
  const double tol = 1e-5;
  double worst = 0.0;

  struct Case {
    double stv, sev, lambda;
  };
  const Case cases[] = {
      {0.0, 0.0, 0.30798}, {2.0, -1.0, 0.35917}, {-1.0, 2.0, 0.31183}};
  for (const auto& k : cases) {
    FlexibilityEstimate est = flexibility_level(models, {k.stv, k.sev}, 0.5);
    worst = std::max(worst, std::abs(est.lambda - k.lambda));
  }

  // spot values for single appliances (thermostat is the consumption-heavy
  // one, refrigerator the likeliest to move under a sustainability profile)
  const ApplianceModel& thermostat = models.back();
  const ApplianceModel& fridge = models.front();
  worst = std::max(worst,
                   std::abs(adoption_likelihood(thermostat, {0.0, 0.0}) - 0.624));
  worst = std::max(
      worst, std::abs(adoption_likelihood(thermostat, {2.0, -1.0}) - 0.727));
  worst = std::max(worst,
                   std::abs(adoption_likelihood(fridge, {-1.0, 2.0}) - 0.580));

  c.worst = worst;
  c.pass = worst <= tol;
  std::ostringstream os;
  os << "3 ceiling values + 3 adoption likelihoods, worst gap " << fmt(worst)
     << " (tolerance " << fmt(tol) << ")";
  c.detail = os.str();
  return c;
}

OracleCheck check_sum_identity() {
  OracleCheck c;
  c.name = "utility-sum-identity";
  const double tol = 1e-12;
  double worst = 0.0;
  Rng rng(7u);
  const double lambdas[] = {0.30798, 0.5, 0.05, 0.9};
  const int masks[] = {10, 7, 3};  // adopters among 10 nodes
  for (double lambda : lambdas) {
    for (int na : masks) {
      std::vector<bool> adopt(10, false);
      for (int i = 0; i < na; ++i) adopt[i] = true;
      Eigen::VectorXd pi_u = tune_pi_u(lambda, 10, adopt, {1.0, 0.25}, rng);
      double target = 1.0 / (1.0 - lambda) - 1.0;
      worst = std::max(worst, std::abs(pi_u.sum() - target));
    }
  }
  c.worst = worst;
  c.pass = worst <= tol;
  std::ostringstream os;
  os << "4 ceilings x 3 adopter sets, worst sum gap " << fmt(worst)
     << " (tolerance " << fmt(tol) << ")";
  c.detail = os.str();
  return c;
}

}  // namespace

std::vector<OracleCheck> run_oracle_suite() {
  std::vector<OracleCheck> out;
  out.push_back(check_curtailment_qp());
  out.push_back(check_flexibility_arithmetic());
  out.push_back(check_sum_identity());
  return out;
}

bool all_passed(const std::vector<OracleCheck>& checks) {
  for (const auto& c : checks)
    if (!c.pass) return false;
  return true;
}

}  // namespace dcflex
