#include <Eigen/Dense>

#include "dcflex/closed_loop.hpp"
#include "dcflex/network.hpp"
#include "dcflex/sim.hpp"
#include "doctest.h"

using namespace dcflex;

namespace {

GridParams grid3(double pi_u_scale) {
  GridParams p;
  int n = 3;
  p.R_s = Eigen::VectorXd::Constant(n, 1.5e-3);
  p.L_s = Eigen::VectorXd::Constant(n, 2.4e-3);
  p.C = Eigen::VectorXd::Constant(n, 2e-3);
  p.I_l = Eigen::VectorXd::Constant(n, 10.0);
  p.I_l[1] = 7.0;
  p.I_l[2] = 12.0;
  p.V_d = Eigen::VectorXd::Constant(n, 380.0);
  p.V_min = Eigen::VectorXd::Constant(n, 379.3);
  p.V_max = Eigen::VectorXd::Constant(n, 380.7);
  p.u_l_min = Eigen::VectorXd::Constant(n, 0.5);
  p.pi_c = Eigen::VectorXd::Constant(n, 1.0 / 3);
  p.pi_u = Eigen::VectorXd::Constant(n, pi_u_scale);
  p.pi_u[1] = 1.3 * pi_u_scale;
  p.R_line = Eigen::VectorXd::Constant(n, 0.075);
  p.L_line = Eigen::VectorXd::Constant(n, 2.5e-6);
  return p;
}

// weights mild enough that every loop mode is well inside RK4 territory
ClosedLoopSystem mild_system() {
  ControllerGains g;
  g.weights.alpha = 1.0;
  g.weights.beta = 0.05;
  g.weights.gamma = 1.0;
  ConstraintSpec off;
  off.clamp_u_l = false;
  off.voltage_band = false;
  return ClosedLoopSystem(ring_topology(3), grid3(0.15), g, off);
}

ClosedLoopSystem stiff_system() {
  ControllerGains g;
  g.weights.alpha = 1e6;
  g.weights.beta = 1e-6;
  g.weights.gamma = 1.0;
  ConstraintSpec on;
  on.clamp_u_l = true;
  on.voltage_band = true;
  on.tau_eta = 1.0;
  return ClosedLoopSystem(ring_topology(3), grid3(0.15), g, on);
}

Eigen::VectorXd perturbed_start(const ClosedLoopSystem& sys) {
  Eigen::VectorXd x = sys.cold_start();
  const StateLayout& lay = sys.layout();
  for (int i = 0; i < lay.n; ++i) {
    x[lay.V(i)] += 0.3 * (i + 1) - 0.5;
    x[lay.I_s(i)] = 1.0 + 0.5 * i;
    x[lay.lambda_a(i)] = -0.2 * i;
    x[lay.lambda_b(i)] = -1.0 - 0.3 * i;
    x[lay.u_l(i)] = 0.85 - 0.05 * i;
  }
  for (int k = 0; k < lay.m; ++k) x[lay.I(k)] = 0.4 * k - 0.3;
  return x;
}

Eigen::VectorXd rk4_reference(const ClosedLoopSystem& sys, Eigen::VectorXd x,
                              double total, int steps) {
  const double h = total / steps;
  for (int s = 0; s < steps; ++s) {
    Eigen::VectorXd k1 = sys.rate(x);
    Eigen::VectorXd k2 = sys.rate(x + 0.5 * h * k1);
    Eigen::VectorXd k3 = sys.rate(x + 0.5 * h * k2);
    Eigen::VectorXd k4 = sys.rate(x + h * k3);
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return x;
}

}  // namespace

TEST_SUITE("closed_loop") {

TEST_CASE("layout and pack round trip") {
  ClosedLoopSystem banded = stiff_system();
  CHECK(banded.layout().size() == 10 * 3 + 3);
  ClosedLoopSystem plain = mild_system();
  CHECK(plain.layout().size() == 8 * 3 + 3);

  GridState gs = GridState::zero(3, 3);
  gs.I_s << 1, 2, 3;
  gs.I << -1, 0.5, 0.25;
  gs.V << 379, 380, 381;
  ControllerState cs = ControllerState::zero(3);
  cs.u_s_star << 380, 381, 382;
  cs.u_l_star << 0.5, 0.6, 0.7;
  cs.I_s_star << 1, 1, 1;
  cs.V_star << 380, 380, 380;
  cs.lambda_a << -1, -2, -3;
  cs.lambda_b << -4, -5, -6;
  cs.eta_min << 0.1, 0, 0;
  cs.eta_max << 0, 0.2, 0;

  Eigen::VectorXd x = banded.pack(gs, cs);
  GridState gs2;
  ControllerState cs2;
  banded.unpack(x, gs2, cs2);
  CHECK((gs2.V - gs.V).cwiseAbs().maxCoeff() == 0.0);
  CHECK((gs2.I - gs.I).cwiseAbs().maxCoeff() == 0.0);
  CHECK((cs2.u_l_star - cs.u_l_star).cwiseAbs().maxCoeff() == 0.0);
  CHECK((cs2.eta_max - cs.eta_max).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("cold start pins the load at full demand") {
  ClosedLoopSystem sys = stiff_system();
  Eigen::VectorXd x = sys.cold_start();
  const StateLayout& lay = sys.layout();
  for (int i = 0; i < 3; ++i) {
    CHECK(x[lay.V(i)] == doctest::Approx(380.0));
    CHECK(x[lay.u_l(i)] == 1.0);
    CHECK(x[lay.I_s(i)] == 0.0);
  }
  std::vector<char> sig = sys.signature(x);
  for (int i = 0; i < 3; ++i) CHECK(sig[i] == 2);  // demand is free, load stays up
}

TEST_CASE("rate matches the block modules row by row") {
  ClosedLoopSystem sys = mild_system();
  Eigen::VectorXd x = perturbed_start(sys);
  Eigen::VectorXd r = sys.rate(x);

  GridState gs;
  ControllerState cs;
  sys.unpack(x, gs, cs);
  GridInput input;
  ControllerPorts ports;
  interconnect(gs, cs, sys.params(), sys.constraints(), input, ports);
  GridState dp = grid_derivative(sys.topology(), sys.params(), gs, input);
  ControllerState dc = controller_derivative(
      sys.topology(), sys.params(), sys.gains(), sys.constraints(), cs, ports);

  const StateLayout& lay = sys.layout();
  auto close = [](double a, double b) {
    return std::abs(a - b) <= 1e-9 * (1.0 + std::max(std::abs(a), std::abs(b)));
  };
  for (int i = 0; i < 3; ++i) {
    CHECK(close(r[lay.I_s(i)], dp.I_s[i]));
    CHECK(close(r[lay.V(i)], dp.V[i]));
    CHECK(close(r[lay.u_s(i)], dc.u_s_star[i]));
    CHECK(close(r[lay.u_l(i)], dc.u_l_star[i]));
    CHECK(close(r[lay.I_s_star(i)], dc.I_s_star[i]));
    CHECK(close(r[lay.V_star(i)], dc.V_star[i]));
    CHECK(close(r[lay.lambda_a(i)], dc.lambda_a[i]));
    CHECK(close(r[lay.lambda_b(i)], dc.lambda_b[i]));
  }
  for (int k = 0; k < 3; ++k) CHECK(close(r[lay.I(k)], dp.I[k]));
}

TEST_CASE("one exact step tracks a fine RK4 reference") {
  ClosedLoopSystem sys = mild_system();
  Eigen::VectorXd x0 = perturbed_start(sys);
  const double dt = 1e-4;
  ClosedLoopSystem::StepResult res = sys.step(x0, dt);
  CHECK(!res.used_fallback);
  Eigen::VectorXd ref = rk4_reference(sys, x0, dt, 1000);
  double worst = 0.0;
  for (int i = 0; i < x0.size(); ++i)
    worst = std::max(worst, std::abs(res.x[i] - ref[i]) /
                                (1.0 + std::abs(ref[i])));
  CHECK(worst < 1e-9);
}

TEST_CASE("exact stepping is a semigroup") {
  ClosedLoopSystem sys = mild_system();
  Eigen::VectorXd x0 = perturbed_start(sys);
  const double dt = 0.02;
  Eigen::VectorXd whole = sys.step(x0, dt).x;
  Eigen::VectorXd half = sys.step(sys.step(x0, dt / 2).x, dt / 2).x;
  double worst = 0.0;
  for (int i = 0; i < x0.size(); ++i)
    worst = std::max(worst,
                     std::abs(whole[i] - half[i]) / (1.0 + std::abs(half[i])));
  CHECK(worst < 1e-10);
}

TEST_CASE("stepping is deterministic") {
  ClosedLoopSystem sys = stiff_system();
  Eigen::VectorXd x0 = sys.cold_start();
  Eigen::VectorXd a = sys.step(x0, 1e-4).x;
  Eigen::VectorXd b = sys.step(x0, 1e-4).x;
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("piece equilibrium at the converged active set is a fixed point") {
  // the equilibrium is only meaningful for the active set the flow settles
  // into, so integrate first and refine from the converged state
  ClosedLoopSystem sys = stiff_system();
  IntegrationSettings settings;
  SimTrace tr = integrate(sys, sys.cold_start(), settings);
  REQUIRE(tr.converged);

  Eigen::VectorXd x_eq = sys.piece_equilibrium(tr.final_state);
  CHECK(x_eq.allFinite());
  CHECK(sys.signature(x_eq) == sys.signature(tr.final_state));
  CHECK(sys.rate(x_eq).cwiseAbs().maxCoeff() < 1e-6);

  Eigen::VectorXd stepped = sys.step(x_eq, 1e3).x;
  double drift = 0.0;
  for (int i = 0; i < x_eq.size(); ++i)
    drift = std::max(drift, std::abs(stepped[i] - x_eq[i]) /
                                (1.0 + std::abs(x_eq[i])));
  CHECK(drift < 1e-6);
}

TEST_CASE("signature sees bound crossings, not just touches") {
  ClosedLoopSystem sys = stiff_system();
  const StateLayout& lay = sys.layout();
  Eigen::VectorXd x = perturbed_start(sys);

  x[lay.u_l(0)] = 0.4;  // strictly below the 0.5 floor
  x[lay.u_l(1)] = 1.2;  // strictly above the ceiling
  x[lay.u_l(2)] = 0.8;  // interior
  std::vector<char> sig = sys.signature(x);
  CHECK(sig[0] == 1);
  CHECK(sig[1] == 2);
  CHECK(sig[2] == 0);

  // eta flags follow the value/violation rule
  x[lay.eta_min(0)] = 0.3;
  x[lay.V_star(1)] = 379.0;  // below V_min: violation without multiplier
  sig = sys.signature(x);
  CHECK(sig[3 + 0] == 1);
  CHECK(sig[3 + 1] == 1);
  CHECK(sig[3 + 2] == 0);
}

TEST_CASE("snap pulls the state back into the admissible set") {
  ClosedLoopSystem sys = stiff_system();
  const StateLayout& lay = sys.layout();
  Eigen::VectorXd x = sys.cold_start();
  x[lay.u_l(0)] = 0.2;
  x[lay.u_l(1)] = 1.4;
  x[lay.eta_min(2)] = -0.5;
  sys.snap(x);
  CHECK(x[lay.u_l(0)] == doctest::Approx(0.5));
  CHECK(x[lay.u_l(1)] == doctest::Approx(1.0));
  CHECK(x[lay.eta_min(2)] == 0.0);
}

TEST_CASE("storage splits agree with hand formulas") {
  ClosedLoopSystem sys = stiff_system();
  Eigen::VectorXd x = perturbed_start(sys);
  Eigen::VectorXd r = sys.rate(x);
  const StateLayout& lay = sys.layout();
  const GridParams& p = sys.params();
  const ControllerGains& g = sys.gains();

  double plant = 0.0;
  for (int i = 0; i < 3; ++i) {
    plant += 0.5 * p.L_s[i] * r[lay.I_s(i)] * r[lay.I_s(i)];
    plant += 0.5 * p.C[i] * r[lay.V(i)] * r[lay.V(i)];
  }
  for (int k = 0; k < 3; ++k)
    plant += 0.5 * p.L_line[k] * r[lay.I(k)] * r[lay.I(k)];
  CHECK(sys.plant_storage(r) == doctest::Approx(plant).epsilon(1e-12));

  double ctrl = 0.0;
  for (int i = 0; i < 3; ++i) {
    ctrl += 0.5 * g.tau_s * r[lay.u_s(i)] * r[lay.u_s(i)];
    ctrl += 0.5 * g.tau_l * r[lay.u_l(i)] * r[lay.u_l(i)];
    ctrl += 0.5 * g.tau_I * r[lay.I_s_star(i)] * r[lay.I_s_star(i)];
    ctrl += 0.5 * g.tau_V * r[lay.V_star(i)] * r[lay.V_star(i)];
    ctrl += 0.5 * g.tau_a * r[lay.lambda_a(i)] * r[lay.lambda_a(i)];
    ctrl += 0.5 * g.tau_b * r[lay.lambda_b(i)] * r[lay.lambda_b(i)];
    ctrl += 0.5 * sys.constraints().tau_eta *
            (r[lay.eta_min(i)] * r[lay.eta_min(i)] +
             r[lay.eta_max(i)] * r[lay.eta_max(i)]);
  }
  CHECK(sys.ctrl_storage(r) == doctest::Approx(ctrl).epsilon(1e-12));
}

TEST_CASE("combined storage decays along the mild flow") {
  ClosedLoopSystem sys = mild_system();
  Eigen::VectorXd x = perturbed_start(sys);
  double prev = sys.plant_storage(sys.rate(x)) + sys.ctrl_storage(sys.rate(x));
  double dt = 1e-4;
  for (int s = 0; s < 300; ++s) {
    x = sys.step(x, dt).x;
    Eigen::VectorXd r = sys.rate(x);
    double cur = sys.plant_storage(r) + sys.ctrl_storage(r);
    CHECK(cur <= prev + 1e-9 * std::max(1.0, prev));
    prev = cur;
    dt = std::min(dt * 1.2, 0.05);
  }
}

}  // TEST_SUITE
