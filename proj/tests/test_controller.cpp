#include <Eigen/Dense>

#include "dcflex/controller.hpp"
#include "dcflex/network.hpp"
#include "dcflex/qp_oracle.hpp"
#include "dcflex/welfare.hpp"
#include "doctest.h"

using namespace dcflex;

namespace {

GridParams grid3() {
  GridParams p;
  int n = 3;
  p.R_s = Eigen::VectorXd::Constant(n, 1.5e-3);
  p.L_s = Eigen::VectorXd::Constant(n, 2.4e-3);
  p.C = Eigen::VectorXd::Constant(n, 2e-3);
  p.I_l = Eigen::VectorXd::Constant(n, 10.0);
  p.I_l[1] = 7.0;
  p.V_d = Eigen::VectorXd::Constant(n, 380.0);
  p.V_min = Eigen::VectorXd::Constant(n, 379.3);
  p.V_max = Eigen::VectorXd::Constant(n, 380.7);
  p.u_l_min = Eigen::VectorXd::Constant(n, 0.5);
  p.pi_c = Eigen::VectorXd::Constant(n, 1.0 / 3);
  p.pi_u = Eigen::VectorXd::Constant(n, 0.4);
  p.R_line = Eigen::VectorXd::Constant(n, 0.075);
  p.L_line = Eigen::VectorXd::Constant(n, 2.5e-6);
  return p;
}

ControllerGains mixed_gains() {
  ControllerGains g;
  g.tau_s = 0.7;
  g.tau_l = 1.3;
  g.tau_I = 0.9;
  g.tau_V = 1.1;
  g.tau_a = 0.8;
  g.tau_b = 1.6;
  g.weights.alpha = 1.4;
  g.weights.beta = 0.05;
  g.weights.gamma = 0.8;
  return g;
}

ControllerState sample_state(int n) {
  ControllerState cs = ControllerState::zero(n);
  for (int i = 0; i < n; ++i) {
    cs.u_s_star[i] = 380.0 + 0.1 * i;
    cs.u_l_star[i] = 0.7 + 0.05 * i;
    cs.I_s_star[i] = 3.0 - 0.5 * i;
    cs.V_star[i] = 379.9 + 0.08 * i;
    cs.lambda_a[i] = -2.0 + 0.3 * i;
    cs.lambda_b[i] = -8.0 + 1.1 * i;
  }
  return cs;
}

ControllerPorts sample_ports(int n) {
  ControllerPorts ports = ControllerPorts::zero(n);
  for (int i = 0; i < n; ++i) {
    ports.nu_s[i] = -3.0 + 0.4 * i;
    ports.nu_l[i] = 3800.0 - 5.0 * i;
  }
  return ports;
}

}  // namespace

TEST_SUITE("controller") {

TEST_CASE("rates are the tau-scaled stationarity residuals") {
  GridTopology topo = ring_topology(3);
  GridParams p = grid3();
  ControllerGains g = mixed_gains();
  ConstraintSpec off;  // both constraint handlers disabled
  off.clamp_u_l = false;
  off.voltage_band = false;
  ControllerState cs = sample_state(3);
  ControllerPorts ports = sample_ports(3);

  ControllerState rate = controller_derivative(topo, p, g, off, cs, ports);
  KktResidual kkt = kkt_residual(topo, p, g.weights, off, cs, &ports);

  auto blockmax = [](const Eigen::VectorXd& v) {
    return v.cwiseAbs().maxCoeff();
  };
  CHECK(kkt.u_s == doctest::Approx(g.tau_s * blockmax(rate.u_s_star)).epsilon(1e-12));
  CHECK(kkt.u_l == doctest::Approx(g.tau_l * blockmax(rate.u_l_star)).epsilon(1e-12));
  CHECK(kkt.I_s == doctest::Approx(g.tau_I * blockmax(rate.I_s_star)).epsilon(1e-12));
  CHECK(kkt.V == doctest::Approx(g.tau_V * blockmax(rate.V_star)).epsilon(1e-12));
  CHECK(kkt.balance_a ==
        doctest::Approx(g.tau_a * blockmax(rate.lambda_a)).epsilon(1e-12));
  CHECK(kkt.balance_b ==
        doctest::Approx(g.tau_b * blockmax(rate.lambda_b)).epsilon(1e-12));
  CHECK(kkt.max_norm >= kkt.u_l);
}

TEST_CASE("fixed-port saddle point zeroes both the rates and the residual") {
  GridTopology topo = ring_topology(3);
  GridParams p = grid3();
  ControllerGains g = mixed_gains();
  ConstraintSpec off;
  off.clamp_u_l = false;
  off.voltage_band = false;
  int n = 3;

  ControllerPorts ports = sample_ports(n);
  WelfareQpOptions opts;
  opts.nu_s = &ports.nu_s;
  opts.nu_l = &ports.nu_l;
  QpProblem qp = welfare_qp_regularized(topo, p, g.weights, opts);
  QpSolution sol = solve_equality_qp(qp);

  ControllerState cs = ControllerState::zero(n);
  cs.u_s_star = sol.z.segment(0, n);
  cs.u_l_star = sol.z.segment(n, n);
  cs.I_s_star = sol.z.segment(2 * n, n);
  cs.V_star = sol.z.segment(3 * n, n);
  cs.lambda_a = sol.eq_mult.head(n);
  cs.lambda_b = sol.eq_mult.segment(n, n);

  KktResidual kkt = kkt_residual(topo, p, g.weights, off, cs, &ports);
  CHECK(kkt.max_norm < 1e-8);
  ControllerState rate = controller_derivative(topo, p, g, off, cs, ports);
  CHECK(rate.u_s_star.cwiseAbs().maxCoeff() < 1e-8);
  CHECK(rate.u_l_star.cwiseAbs().maxCoeff() < 1e-6);  // stiffest row
  CHECK(rate.I_s_star.cwiseAbs().maxCoeff() < 1e-8);
  CHECK(rate.V_star.cwiseAbs().maxCoeff() < 1e-8);
  CHECK(rate.lambda_a.cwiseAbs().maxCoeff() < 1e-8);
  CHECK(rate.lambda_b.cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("box projection stops outward rates only") {
  GridTopology topo = ring_topology(3);
  GridParams p = grid3();
  ControllerGains g;
  g.weights.alpha = 1.0;
  ConstraintSpec clamp;
  clamp.clamp_u_l = true;
  clamp.voltage_band = false;

  ControllerState cs = sample_state(3);
  cs.u_l_star[0] = p.u_l_min[0];  // at the floor
  cs.u_l_star[1] = 1.0;           // at the ceiling
  ControllerState rate = ControllerState::zero(3);
  rate.u_l_star << -1.0, -0.5, 2.0;

  ControllerState adj = rate;
  project_box_rates(p, clamp, cs, adj);
  CHECK(adj.u_l_star[0] == 0.0);    // outward at floor: stopped
  CHECK(adj.u_l_star[1] == -0.5);   // inward at ceiling: kept
  CHECK(adj.u_l_star[2] == 2.0);    // interior: untouched

  rate.u_l_star << 1.0, -0.5, 2.0;  // now both bounds push inward
  adj = rate;
  project_box_rates(p, clamp, cs, adj);
  CHECK(adj.u_l_star[0] == 1.0);
  CHECK(adj.u_l_star[1] == -0.5);

  ConstraintSpec off;
  off.clamp_u_l = false;
  adj = rate;
  adj.u_l_star << -1.0, 0.5, 2.0;
  ControllerState before = adj;
  project_box_rates(p, off, cs, adj);
  CHECK((adj.u_l_star - before.u_l_star).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("band multipliers follow the projected-ascent branch rule") {
  GridTopology topo = ring_topology(3);
  GridParams p = grid3();
  ControllerGains g = mixed_gains();
  ConstraintSpec band;
  band.clamp_u_l = false;
  band.voltage_band = true;
  band.tau_eta = 2.0;

  ControllerState cs = sample_state(3);
  cs.V_star << 379.0, 380.0, 381.0;  // below band, inside, above
  cs.eta_min.setZero();
  cs.eta_max.setZero();
  ControllerPorts ports = sample_ports(3);
  ControllerState rate = controller_derivative(topo, p, g, band, cs, ports);

  // node 0 violates the lower bound: eta_min charges up
  CHECK(rate.eta_min[0] == doctest::Approx((379.3 - 379.0) / 2.0));
  CHECK(rate.eta_max[0] == 0.0);
  // node 1 inside: both multipliers stay parked
  CHECK(rate.eta_min[1] == 0.0);
  CHECK(rate.eta_max[1] == 0.0);
  // node 2 violates the upper bound
  CHECK(rate.eta_max[2] == doctest::Approx((381.0 - 380.7) / 2.0));
  CHECK(rate.eta_min[2] == 0.0);

  // a positive multiplier decays when its bound is slack again
  cs.eta_min[1] = 0.4;
  rate = controller_derivative(topo, p, g, band, cs, ports);
  CHECK(rate.eta_min[1] == doctest::Approx((379.3 - 380.0) / 2.0));

  // and the force shows up in the V_star row
  ControllerState cs2 = cs;
  cs2.eta_min[1] = 0.0;
  ControllerState r2 = controller_derivative(topo, p, g, band, cs2, ports);
  double diff = (rate.V_star[1] - r2.V_star[1]) * g.tau_V;
  CHECK(diff == doctest::Approx(0.4));  // -(-eta_min)/tau_V
}

TEST_CASE("interconnection wiring") {
  GridParams p = grid3();
  ConstraintSpec clamp;
  clamp.clamp_u_l = true;
  GridState gs = GridState::zero(3, 3);
  gs.I_s << 2.0, 3.0, 4.0;
  gs.V << 380.0, 379.9, 380.1;
  ControllerState cs = sample_state(3);
  cs.u_l_star << 0.3, 0.8, 1.4;  // low, inside, high

  GridInput input;
  ControllerPorts ports;
  interconnect(gs, cs, p, clamp, input, ports);
  CHECK((input.u_s - cs.u_s_star).cwiseAbs().maxCoeff() == 0.0);
  CHECK(input.u_l[0] == doctest::Approx(p.u_l_min[0]));
  CHECK(input.u_l[1] == doctest::Approx(0.8));
  CHECK(input.u_l[2] == doctest::Approx(1.0));
  CHECK((ports.nu_s + gs.I_s).cwiseAbs().maxCoeff() == 0.0);
  CHECK((ports.nu_l - p.I_l.cwiseProduct(gs.V)).cwiseAbs().maxCoeff() == 0.0);

  ConstraintSpec off;
  off.clamp_u_l = false;
  interconnect(gs, cs, p, off, input, ports);
  CHECK(input.u_l[0] == doctest::Approx(0.3));
  CHECK(input.u_l[2] == doctest::Approx(1.4));
}

TEST_CASE("controller storage sums the tau-weighted rate energy") {
  ControllerGains g = mixed_gains();
  ConstraintSpec band;
  band.voltage_band = true;
  band.tau_eta = 2.0;
  ControllerState r = ControllerState::zero(2);
  r.u_s_star << 1.0, -1.0;
  r.u_l_star << 0.5, 0.0;
  r.I_s_star << 2.0, 1.0;
  r.V_star << -0.5, 0.25;
  r.lambda_a << 1.0, 1.0;
  r.lambda_b << -2.0, 0.5;
  r.eta_min << 0.1, 0.0;
  r.eta_max << 0.0, 0.3;
  double want = 0.5 * (g.tau_s * r.u_s_star.squaredNorm() +
                       g.tau_l * r.u_l_star.squaredNorm() +
                       g.tau_I * r.I_s_star.squaredNorm() +
                       g.tau_V * r.V_star.squaredNorm() +
                       g.tau_a * r.lambda_a.squaredNorm() +
                       g.tau_b * r.lambda_b.squaredNorm() +
                       band.tau_eta * (r.eta_min.squaredNorm() +
                                       r.eta_max.squaredNorm()));
  CHECK(controller_storage(g, band, r) == doctest::Approx(want).epsilon(1e-14));

  ConstraintSpec off;
  off.voltage_band = false;
  double base = want - 0.5 * band.tau_eta * (r.eta_min.squaredNorm() +
                                             r.eta_max.squaredNorm());
  CHECK(controller_storage(g, off, r) == doctest::Approx(base).epsilon(1e-14));
}

TEST_CASE("steady-state supply equals the resistive losses") {
  GridTopology topo = ring_topology(3);
  GridParams p = grid3();
  GridInput u;
  u.u_s = Eigen::VectorXd::Constant(3, 380.05);
  u.u_s[2] = 379.98;
  u.u_l = Eigen::VectorXd::Constant(3, 0.85);
  GridState ss = steady_state(topo, p, u.u_s, u.u_l);
  LossIdentityReport rep = loss_penalty_identity(topo, p, ss, u);
  CHECK(rep.steady_residual < 1e-9);
  // the residual of the solved steady state leaks into the identity scaled
  // by the node voltages, so the gap floor sits well above roundoff
  CHECK(rep.gap_rel < 1e-8);
  CHECK(rep.lhs > 0.0);  // the grid genuinely burns power
}

}  // TEST_SUITE
