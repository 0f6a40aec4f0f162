#include "dcflex/controller.hpp"

#include <cmath>
#include <stdexcept>

namespace dcflex {

namespace {

using VectorXld = Eigen::Matrix<long double, Eigen::Dynamic, 1>;

VectorXld to_ld(const Eigen::VectorXd& v) { return v.cast<long double>(); }

Eigen::VectorXd to_d(const VectorXld& v) { return v.cast<double>(); }

// edge-loop Laplacian product in extended precision
VectorXld laplacian_apply_ld(const GridTopology& topo, const Eigen::VectorXd& r,
                             const VectorXld& x) {
  VectorXld y = VectorXld::Zero(x.size());
  for (std::size_t k = 0; k < topo.edges.size(); ++k) {
    const auto [a, b] = topo.edges[k];
    const long double w =
        (x[a] - x[b]) / static_cast<long double>(r[static_cast<Eigen::Index>(k)]);
    y[a] += w;
    y[b] -= w;
  }
  return y;
}

bool at_bound(double x, double bound) {
  return std::abs(x - bound) <= 1e-12 * std::max(1.0, std::abs(bound));
}

// Stationarity and feasibility rows of the saddle-point field, before the
// time constants. Evaluated in long double: the u_l and V rows cancel terms
// roughly alpha/pi_u large, which floors double arithmetic near 1e-6.
struct RawGradients {
  VectorXld us, ul, is, v;  // descent directions (stationarity rows)
  VectorXld a, b;           // ascent directions (constraint residuals)
  VectorXld eta_min_rate, eta_max_rate;  // projected band-violation rates
};

RawGradients raw_gradients(const GridTopology& topo, const GridParams& p,
                           const WelfareWeights& w,
                           const ConstraintSpec& constraints,
                           const ControllerState& cs,
                           const ControllerPorts* ports) {
  const Eigen::Index n = p.n();
  if (cs.n() != n)
    throw std::invalid_argument("controller: state/parameter size mismatch");
  RawGradients g;
  const VectorXld us = to_ld(cs.u_s_star), ul = to_ld(cs.u_l_star);
  const VectorXld is = to_ld(cs.I_s_star), vs = to_ld(cs.V_star);
  const VectorXld la = to_ld(cs.lambda_a), lb = to_ld(cs.lambda_b);

  g.us = static_cast<long double>(w.beta) * us + la;
  g.ul.resize(n);
  g.is.resize(n);
  g.v.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const long double Il = p.I_l[i];
    g.ul[i] = -static_cast<long double>(w.alpha) * Il * Il /
                  static_cast<long double>(p.pi_u[i]) * (1.0L - ul[i]) -
              Il * lb[i];
    g.is[i] = static_cast<long double>(w.alpha) /
                  static_cast<long double>(p.pi_c[i]) * is[i] -
              static_cast<long double>(p.R_s[i]) * la[i] + lb[i];
  }
  g.v = static_cast<long double>(w.gamma) * (vs - to_ld(p.V_d)) - la -
        laplacian_apply_ld(topo, p.R_line, lb);
  if (ports) {
    g.us -= to_ld(ports->nu_s);
    g.ul -= to_ld(ports->nu_l);
  }

  g.a = us - to_ld(p.R_s).cwiseProduct(is) - vs;
  g.b = -to_ld(p.I_l).cwiseProduct(ul) + is - laplacian_apply_ld(topo, p.R_line, vs);

  g.eta_min_rate = VectorXld::Zero(n);
  g.eta_max_rate = VectorXld::Zero(n);
  if (constraints.voltage_band) {
    for (Eigen::Index i = 0; i < n; ++i) {
      g.v[i] += static_cast<long double>(cs.eta_max[i]) -
                static_cast<long double>(cs.eta_min[i]);
      const long double lo_viol = static_cast<long double>(p.V_min[i]) - vs[i];
      const long double hi_viol = vs[i] - static_cast<long double>(p.V_max[i]);
      if (cs.eta_min[i] > 0.0 || lo_viol > 0.0L) g.eta_min_rate[i] = lo_viol;
      if (cs.eta_max[i] > 0.0 || hi_viol > 0.0L) g.eta_max_rate[i] = hi_viol;
    }
  }
  return g;
}

}  // namespace

ControllerState ControllerState::zero(int n) {
  ControllerState cs;
  cs.u_s_star = Eigen::VectorXd::Zero(n);
  cs.u_l_star = Eigen::VectorXd::Zero(n);
  cs.I_s_star = Eigen::VectorXd::Zero(n);
  cs.V_star = Eigen::VectorXd::Zero(n);
  cs.lambda_a = Eigen::VectorXd::Zero(n);
  cs.lambda_b = Eigen::VectorXd::Zero(n);
  cs.eta_min = Eigen::VectorXd::Zero(n);
  cs.eta_max = Eigen::VectorXd::Zero(n);
  return cs;
}

void ControllerGains::validate() const {
  const double taus[] = {tau_s, tau_l, tau_I, tau_V, tau_a, tau_b};
  const char* names[] = {"tau_s", "tau_l", "tau_I", "tau_V", "tau_a", "tau_b"};
  for (int i = 0; i < 6; ++i)
    if (!(taus[i] > 0.0))
      throw std::invalid_argument(std::string("controller gains: ") + names[i] +
                                  " must be > 0");
  if (!(weights.alpha > 0.0))
    throw std::invalid_argument("controller gains: alpha must be > 0");
  if (weights.beta < 0.0 || weights.gamma < 0.0)
    throw std::invalid_argument(
        "controller gains: beta and gamma must be >= 0");
}

ControllerPorts ControllerPorts::zero(int n) {
  return {Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)};
}

ControllerState controller_derivative(const GridTopology& topo,
                                      const GridParams& p,
                                      const ControllerGains& gains,
                                      const ConstraintSpec& constraints,
                                      const ControllerState& cs,
                                      const ControllerPorts& ports) {
  const RawGradients g =
      raw_gradients(topo, p, gains.weights, constraints, cs, &ports);
  ControllerState rate;
  rate.u_s_star = to_d(g.us) / -gains.tau_s;
  rate.u_l_star = to_d(g.ul) / -gains.tau_l;
  rate.I_s_star = to_d(g.is) / -gains.tau_I;
  rate.V_star = to_d(g.v) / -gains.tau_V;
  rate.lambda_a = to_d(g.a) / gains.tau_a;
  rate.lambda_b = to_d(g.b) / gains.tau_b;
  rate.eta_min = to_d(g.eta_min_rate) / constraints.tau_eta;
  rate.eta_max = to_d(g.eta_max_rate) / constraints.tau_eta;
  return rate;
}

void project_box_rates(const GridParams& p, const ConstraintSpec& constraints,
                       const ControllerState& cs, ControllerState& rate) {
  if (!constraints.clamp_u_l) return;
  for (Eigen::Index i = 0; i < cs.n(); ++i) {
    if (at_bound(cs.u_l_star[i], p.u_l_min[i]) && rate.u_l_star[i] < 0.0)
      rate.u_l_star[i] = 0.0;
    if (at_bound(cs.u_l_star[i], 1.0) && rate.u_l_star[i] > 0.0)
      rate.u_l_star[i] = 0.0;
  }
}

void snap_into_box(const GridParams& p, const ConstraintSpec& constraints,
                   ControllerState& cs) {
  if (constraints.clamp_u_l)
    for (Eigen::Index i = 0; i < cs.n(); ++i)
      cs.u_l_star[i] = std::clamp(cs.u_l_star[i], p.u_l_min[i], 1.0);
  if (constraints.voltage_band) {
    cs.eta_min = cs.eta_min.cwiseMax(0.0);
    cs.eta_max = cs.eta_max.cwiseMax(0.0);
  }
}

KktResidual kkt_residual(const GridTopology& topo, const GridParams& p,
                         const WelfareWeights& w,
                         const ConstraintSpec& constraints,
                         const ControllerState& cs,
                         const ControllerPorts* ports) {
  const RawGradients g = raw_gradients(topo, p, w, constraints, cs, ports);
  KktResidual r;
  const Eigen::Index n = cs.n();
  for (Eigen::Index i = 0; i < n; ++i) {
    r.u_s = std::max(r.u_s, static_cast<double>(std::abs(g.us[i])));
    // at an active u_l bound only the outward gradient component violates
    // optimality; the inward part is the bound multiplier
    long double gul = g.ul[i];
    if (constraints.clamp_u_l) {
      if (at_bound(cs.u_l_star[i], p.u_l_min[i]))
        gul = std::min(gul, 0.0L);
      else if (at_bound(cs.u_l_star[i], 1.0))
        gul = std::max(gul, 0.0L);
    }
    r.u_l = std::max(r.u_l, static_cast<double>(std::abs(gul)));
    r.I_s = std::max(r.I_s, static_cast<double>(std::abs(g.is[i])));
    r.V = std::max(r.V, static_cast<double>(std::abs(g.v[i])));
    r.balance_a = std::max(r.balance_a, static_cast<double>(std::abs(g.a[i])));
    r.balance_b = std::max(r.balance_b, static_cast<double>(std::abs(g.b[i])));
    r.eta = std::max({r.eta, static_cast<double>(std::abs(g.eta_min_rate[i])),
                      static_cast<double>(std::abs(g.eta_max_rate[i]))});
  }
  r.max_norm =
      std::max({r.u_s, r.u_l, r.I_s, r.V, r.balance_a, r.balance_b, r.eta});
  return r;
}

void interconnect(const GridState& gs, const ControllerState& cs,
                  const GridParams& p, const ConstraintSpec& constraints,
                  GridInput& input, ControllerPorts& ports) {
  input.u_s = cs.u_s_star;
  input.u_l = cs.u_l_star;
  if (constraints.clamp_u_l)
    for (Eigen::Index i = 0; i < cs.n(); ++i)
      input.u_l[i] = std::clamp(input.u_l[i], p.u_l_min[i], 1.0);
  ports.nu_s = -gs.I_s;
  ports.nu_l = p.I_l.cwiseProduct(gs.V);
}

double controller_storage(const ControllerGains& gains,
                          const ConstraintSpec& constraints,
                          const ControllerState& rate) {
  double s = gains.tau_s * rate.u_s_star.squaredNorm() +
             gains.tau_l * rate.u_l_star.squaredNorm() +
             gains.tau_I * rate.I_s_star.squaredNorm() +
             gains.tau_V * rate.V_star.squaredNorm() +
             gains.tau_a * rate.lambda_a.squaredNorm() +
             gains.tau_b * rate.lambda_b.squaredNorm();
  if (constraints.voltage_band)
    s += constraints.tau_eta *
         (rate.eta_min.squaredNorm() + rate.eta_max.squaredNorm());
  return 0.5 * s;
}

LossIdentityReport loss_penalty_identity(const GridTopology& topo,
                                         const GridParams& p,
                                         const GridState& gs,
                                         const GridInput& input) {
  LossIdentityReport rep;
  rep.lhs = gs.I_s.dot(input.u_s) - gs.V.dot(p.I_l.cwiseProduct(input.u_l));
  const Eigen::VectorXd Lv = laplacian_apply(topo, p.R_line, gs.V);
  rep.rhs = gs.I_s.dot(p.R_s.cwiseProduct(gs.I_s)) + gs.V.dot(Lv);
  rep.gap_rel = std::abs(rep.lhs - rep.rhs) / std::max(1.0, std::abs(rep.lhs));
  const GridState d = grid_derivative(topo, p, gs, input);
  rep.steady_residual = std::max({d.I_s.cwiseAbs().maxCoeff(),
                                  d.V.cwiseAbs().maxCoeff(),
                                  p.m() > 0 ? d.I.cwiseAbs().maxCoeff() : 0.0});
  return rep;
}

}  // namespace dcflex
