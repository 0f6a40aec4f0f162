#include <Eigen/Dense>
#include <vector>

#include "dcflex/network.hpp"
#include "dcflex/plant.hpp"
#include "doctest.h"

using namespace dcflex;

namespace {

GridParams small_grid(int n) {
  GridParams p;
  p.R_s = Eigen::VectorXd::Constant(n, 1.5e-3);
  p.L_s = Eigen::VectorXd::Constant(n, 2.4e-3);
  p.C = Eigen::VectorXd::Constant(n, 2e-3);
  p.I_l = Eigen::VectorXd::Constant(n, 10.0);
  p.V_d = Eigen::VectorXd::Constant(n, 380.0);
  p.V_min = Eigen::VectorXd::Constant(n, 379.3);
  p.V_max = Eigen::VectorXd::Constant(n, 380.7);
  p.u_l_min = Eigen::VectorXd::Constant(n, 0.5);
  p.pi_c = Eigen::VectorXd::Constant(n, 1.0 / n);
  p.pi_u = Eigen::VectorXd::Constant(n, 0.1);
  p.R_line = Eigen::VectorXd::Constant(n, 0.075);
  p.L_line = Eigen::VectorXd::Constant(n, 2.5e-6);
  p.I_l[0] = 8.0;
  p.R_s[1] = 1.1e-3;
  return p;
}

}  // namespace

TEST_SUITE("plant") {

TEST_CASE("steady state zeroes the derivative") {
  GridTopology topo = ring_topology(3);
  GridParams p = small_grid(3);
  GridInput u;
  u.u_s = Eigen::VectorXd::Constant(3, 380.02);
  u.u_s[1] = 379.99;
  u.u_l = Eigen::VectorXd::Constant(3, 0.8);
  GridState ss = steady_state(topo, p, u.u_s, u.u_l);
  GridState d = grid_derivative(topo, p, ss, u);
  CHECK(d.I_s.cwiseAbs().maxCoeff() < 1e-9);
  CHECK(d.I.cwiseAbs().maxCoeff() < 1e-9);
  CHECK(d.V.cwiseAbs().maxCoeff() < 1e-9);

  // node balance: generation plus line inflow covers the load
  Eigen::MatrixXd B = incidence_matrix(topo);
  Eigen::VectorXd balance =
      ss.I_s + B * ss.I - p.I_l.cwiseProduct(u.u_l);
  CHECK(balance.cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("load input is clamped") {
  GridTopology topo = ring_topology(3);
  GridParams p = small_grid(3);
  GridState x = GridState::zero(3, 3);
  x.V = Eigen::VectorXd::Constant(3, 380.0);
  GridInput a, b;
  a.u_s = b.u_s = Eigen::VectorXd::Constant(3, 380.0);
  a.u_l = Eigen::VectorXd::Constant(3, 1.7);
  b.u_l = Eigen::VectorXd::Constant(3, 1.0);
  GridState da = grid_derivative(topo, p, x, a);
  GridState db = grid_derivative(topo, p, x, b);
  CHECK((da.V - db.V).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("validate rejects broken parameter sets") {
  GridTopology topo = ring_topology(3);
  GridParams p = small_grid(3);
  CHECK_NOTHROW(p.validate(topo));

  GridParams bad = p;
  bad.R_s[0] = 0.0;
  CHECK_THROWS(bad.validate(topo));

  bad = p;
  bad.pi_c[0] = 0.5;  // sum drifts off 1
  CHECK_THROWS(bad.validate(topo));

  bad = p;
  bad.V_min[2] = 381.0;
  CHECK_THROWS(bad.validate(topo));

  bad = p;
  bad.R_line = Eigen::VectorXd::Constant(2, 0.075);
  CHECK_THROWS(bad.validate(topo));
}

TEST_CASE("storage value is the inductor and capacitor energy of the rates") {
  GridParams p = small_grid(3);
  GridState r = GridState::zero(3, 3);
  r.I_s << 1.0, -2.0, 0.5;
  r.I << 0.1, 0.2, -0.3;
  r.V << 4.0, -1.0, 2.0;
  double want = 0.5 * (p.L_s.array() * r.I_s.array().square()).sum() +
                0.5 * (p.L_line.array() * r.I.array().square()).sum() +
                0.5 * (p.C.array() * r.V.array().square()).sum();
  CHECK(storage_value(p, r) == doctest::Approx(want).epsilon(1e-14));
}

TEST_CASE("constant-input relaxation dissipates") {
  GridTopology topo = ring_topology(3);
  GridParams p = small_grid(3);
  GridInput u;
  u.u_s = Eigen::VectorXd::Constant(3, 380.0);
  u.u_l = Eigen::VectorXd::Constant(3, 0.9);

  GridState x = GridState::zero(3, 3);
  x.V = Eigen::VectorXd::Constant(3, 379.0);  // start off the equilibrium

  const double dt = 1e-5;
  std::vector<double> t;
  std::vector<GridState> rates;
  std::vector<GridInput> urates;
  GridInput du;
  du.u_s = Eigen::VectorXd::Zero(3);
  du.u_l = Eigen::VectorXd::Zero(3);
  auto push = [&](double tv, const GridState& st) {
    t.push_back(tv);
    rates.push_back(grid_derivative(topo, p, st, u));
    urates.push_back(du);
  };
  push(0.0, x);
  for (int k = 0; k < 400; ++k) {
    auto axpy = [&](const GridState& s, const GridState& d, double h) {
      GridState out = s;
      out.I_s += h * d.I_s;
      out.I += h * d.I;
      out.V += h * d.V;
      return out;
    };
    GridState k1 = grid_derivative(topo, p, x, u);
    GridState k2 = grid_derivative(topo, p, axpy(x, k1, dt / 2), u);
    GridState k3 = grid_derivative(topo, p, axpy(x, k2, dt / 2), u);
    GridState k4 = grid_derivative(topo, p, axpy(x, k3, dt), u);
    GridState step = k1;
    step.I_s = (k1.I_s + 2 * k2.I_s + 2 * k3.I_s + k4.I_s) / 6.0;
    step.I = (k1.I + 2 * k2.I + 2 * k3.I + k4.I) / 6.0;
    step.V = (k1.V + 2 * k2.V + 2 * k3.V + k4.V) / 6.0;
    x = axpy(x, step, dt);
    push(dt * (k + 1), x);
  }

  DissipationReport rep = dissipation_check(p, t, rates, urates);
  CHECK(rep.supply_integral == doctest::Approx(0.0));
  CHECK(rep.storage_delta < 0.0);
  CHECK(rep.margin >= -1e-12);
}

}  // TEST_SUITE
