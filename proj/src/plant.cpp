#include "dcflex/plant.hpp"

#include <stdexcept>
#include <string>

namespace dcflex {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace

GridParams GridParams::from(const std::vector<ProsumerParams>& nodes,
                            const std::vector<LineParams>& lines) {
  GridParams p;
  const int n = static_cast<int>(nodes.size());
  const int m = static_cast<int>(lines.size());
  p.R_s.resize(n); p.L_s.resize(n); p.C.resize(n); p.I_l.resize(n);
  p.V_d.resize(n); p.V_min.resize(n); p.V_max.resize(n); p.u_l_min.resize(n);
  p.pi_c.resize(n); p.pi_u.resize(n);
  for (int i = 0; i < n; ++i) {
    const auto& q = nodes[i];
    p.R_s[i] = q.R_s; p.L_s[i] = q.L_s; p.C[i] = q.C; p.I_l[i] = q.I_l;
    p.V_d[i] = q.V_d; p.V_min[i] = q.V_min; p.V_max[i] = q.V_max;
    p.u_l_min[i] = q.u_l_min; p.pi_c[i] = q.pi_c; p.pi_u[i] = q.pi_u;
  }
  p.R_line.resize(m); p.L_line.resize(m);
  for (int k = 0; k < m; ++k) {
    p.R_line[k] = lines[k].R;
    p.L_line[k] = lines[k].L;
  }
  return p;
}

void GridParams::validate(const GridTopology& topo) const {
  topo.validate();
  require(n() == topo.n_nodes, "params: prosumer count does not match topology");
  require(m() == topo.n_edges(), "params: line count does not match topology");
  auto all_sized = [&](const Eigen::VectorXd& v) { return v.size() == n(); };
  require(all_sized(L_s) && all_sized(C) && all_sized(I_l) && all_sized(V_d) &&
              all_sized(V_min) && all_sized(V_max) && all_sized(u_l_min) &&
              all_sized(pi_c) && all_sized(pi_u),
          "params: inconsistent per-node vector sizes");
  require(L_line.size() == m(), "params: inconsistent per-line vector sizes");
  for (int i = 0; i < n(); ++i) {
    const std::string at = " (node " + std::to_string(i) + ")";
    require(R_s[i] > 0.0, "params.R_s must be > 0" + at);
    require(L_s[i] > 0.0, "params.L_s must be > 0" + at);
    require(C[i] > 0.0, "params.C must be > 0" + at);
    require(I_l[i] >= 0.0, "params.I_l must be >= 0" + at);
    require(pi_c[i] > 0.0, "params.pi_c must be > 0" + at);
    require(pi_u[i] >= 0.0, "params.pi_u must be >= 0" + at);
    require(V_min[i] <= V_d[i] && V_d[i] <= V_max[i],
            "params: need V_min <= V_d <= V_max" + at);
    require(u_l_min[i] >= 0.0 && u_l_min[i] <= 1.0,
            "params.u_l_min must be within [0, 1]" + at);
  }
  for (int k = 0; k < m(); ++k) {
    const std::string at = " (line " + std::to_string(k) + ")";
    require(R_line[k] > 0.0, "params.R_line must be > 0" + at);
    require(L_line[k] > 0.0, "params.L_line must be > 0" + at);
  }
  require(std::abs(pi_c.sum() - 1.0) <= 1e-9, "params.pi_c must sum to 1");
}

GridState GridState::zero(int n, int m) {
  GridState x;
  x.I_s = Eigen::VectorXd::Zero(n);
  x.I = Eigen::VectorXd::Zero(m);
  x.V = Eigen::VectorXd::Zero(n);
  return x;
}

GridInput GridInput::clamped() const {
  GridInput u;
  u.u_s = u_s;
  u.u_l = u_l.cwiseMax(0.0).cwiseMin(1.0);
  return u;
}

GridState grid_derivative(const GridTopology& topo, const GridParams& p,
                          const GridState& x, const GridInput& u_raw) {
  const int n = p.n();
  const int m = p.m();
  if (x.I_s.size() != n || x.V.size() != n || x.I.size() != m)
    throw std::invalid_argument("grid_derivative: state size mismatch");
  if (u_raw.u_s.size() != n || u_raw.u_l.size() != n)
    throw std::invalid_argument("grid_derivative: input size mismatch");
  const GridInput u = u_raw.clamped();

  GridState d = GridState::zero(n, m);
  d.I_s = (-p.R_s.cwiseProduct(x.I_s) - x.V + u.u_s).cwiseQuotient(p.L_s);
  // line balance and node injections via the edge list, neighbor exchanges only
  Eigen::VectorXd bt_v(m), b_i = Eigen::VectorXd::Zero(n);
  for (int k = 0; k < m; ++k) {
    const auto [a, b] = topo.edges[k];
    bt_v[k] = x.V[a] - x.V[b];
    b_i[a] += x.I[k];
    b_i[b] -= x.I[k];
  }
  d.I = (-p.R_line.cwiseProduct(x.I) - bt_v).cwiseQuotient(p.L_line);
  d.V = (x.I_s + b_i - p.I_l.cwiseProduct(u.u_l)).cwiseQuotient(p.C);
  return d;
}

GridState steady_state(const GridTopology& topo, const GridParams& p,
                       const Eigen::VectorXd& u_s, const Eigen::VectorXd& u_l) {
  const int n = p.n();
  if (u_s.size() != n || u_l.size() != n)
    throw std::invalid_argument("steady_state: input size mismatch");
  const Eigen::MatrixXd L = weighted_laplacian(topo, p.R_line);
  const Eigen::VectorXd load = p.I_l.cwiseProduct(u_l);
  const Eigen::MatrixXd M =
      Eigen::MatrixXd::Identity(n, n) + p.R_s.asDiagonal() * L;
  GridState s = GridState::zero(n, p.m());
  s.V = M.partialPivLu().solve(u_s - p.R_s.cwiseProduct(load));
  s.I_s = L * s.V + load;
  for (int k = 0; k < p.m(); ++k) {
    const auto [a, b] = topo.edges[k];
    s.I[k] = -(s.V[a] - s.V[b]) / p.R_line[k];
  }
  return s;
}

double storage_value(const GridParams& p, const GridState& r) {
  double s = 0.0;
  s += 0.5 * r.I_s.cwiseProduct(r.I_s).dot(p.L_s);
  s += 0.5 * r.I.cwiseProduct(r.I).dot(p.L_line);
  s += 0.5 * r.V.cwiseProduct(r.V).dot(p.C);
  return s;
}

DissipationReport dissipation_check(const GridParams& p,
                                    const std::vector<double>& t,
                                    const std::vector<GridState>& plant_rates,
                                    const std::vector<GridInput>& input_rates,
                                    const double* supply_integral_exact) {
  if (t.size() < 2 || t.size() != plant_rates.size() ||
      t.size() != input_rates.size())
    throw std::invalid_argument("dissipation_check: need matched samples, >= 2");
  auto supply = [&](std::size_t k) {
    const auto& dx = plant_rates[k];
    const auto& du = input_rates[k];
    return du.u_s.dot(dx.I_s) - du.u_l.dot(p.I_l.cwiseProduct(dx.V));
  };
  DissipationReport rep;
  if (supply_integral_exact) {
    rep.supply_integral = *supply_integral_exact;
  } else {
    double acc = 0.0;
    for (std::size_t k = 0; k + 1 < t.size(); ++k)
      acc += 0.5 * (t[k + 1] - t[k]) * (supply(k) + supply(k + 1));
    rep.supply_integral = acc;
  }
  rep.storage_delta =
      storage_value(p, plant_rates.back()) - storage_value(p, plant_rates.front());
  rep.margin = rep.supply_integral - rep.storage_delta;
  return rep;
}

}  // namespace dcflex
