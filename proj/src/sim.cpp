#include "dcflex/sim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dcflex {

namespace {

std::vector<bool> adopter_mask(const ScenarioConfig& cfg) {
  std::vector<bool> mask(static_cast<std::size_t>(cfg.nodes), cfg.adopters.empty());
  for (int i : cfg.adopters) {
    if (i < 0 || i >= cfg.nodes)
      throw std::invalid_argument("adopters: node index " + std::to_string(i) +
                                  " out of range");
    mask[static_cast<std::size_t>(i)] = true;
  }
  return mask;
}

Eigen::VectorXd broadcast(const std::vector<double>& v, int n,
                          const char* name) {
  if (v.size() == 1) return Eigen::VectorXd::Constant(n, v[0]);
  if (static_cast<int>(v.size()) == n)
    return Eigen::Map<const Eigen::VectorXd>(v.data(), n);
  throw std::invalid_argument(std::string(name) + ": expected 1 or " +
                              std::to_string(n) + " values, got " +
                              std::to_string(v.size()));
}

// one draw per entry even when a literal overrides nothing is NOT done:
// literals genuinely skip draws, the stream order below is the contract
Eigen::VectorXd draw_or_literal(const std::optional<RangeSpec>& range,
                                const std::optional<std::vector<double>>& lit,
                                int count, Rng& rng, const char* name) {
  if (lit) return broadcast(*lit, count, name);
  if (!range)
    throw std::invalid_argument(std::string(name) +
                                ": neither a range nor literal values given");
  Eigen::VectorXd out(count);
  for (int i = 0; i < count; ++i) out[i] = rng.uniform(range->lo, range->hi);
  return out;
}

double supply_rate(const ClosedLoopSystem& sys, const Eigen::VectorXd& r) {
  const StateLayout& lay = sys.layout();
  const GridParams& p = sys.params();
  double s = 0.0;
  for (int i = 0; i < lay.n; ++i)
    s += r[lay.u_s(i)] * r[lay.I_s(i)] -
         r[lay.u_l(i)] * p.I_l[i] * r[lay.V(i)];
  return s;
}

void describe_signature_change(const StateLayout& lay,
                               const std::vector<char>& from,
                               const std::vector<char>& to, double t,
                               std::vector<SimEvent>& events) {
  const char* box[] = {"released", "pinned low", "pinned high"};
  for (int i = 0; i < lay.n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    if (from[ui] != to[ui])
      events.push_back({t, "u_l[" + std::to_string(i) + "] " + box[static_cast<int>(to[ui])]});
    if (lay.band) {
      const auto lo = static_cast<std::size_t>(lay.n + i);
      const auto hi = static_cast<std::size_t>(2 * lay.n + i);
      if (from[lo] != to[lo])
        events.push_back({t, std::string("eta_min[") + std::to_string(i) + "] " +
                                 (to[lo] ? "engaged" : "released")});
      if (from[hi] != to[hi])
        events.push_back({t, std::string("eta_max[") + std::to_string(i) + "] " +
                                 (to[hi] ? "engaged" : "released")});
    }
  }
}

}  // namespace

void IntegrationSettings::validate() const {
  if (method != "modal" && method != "rk4")
    throw std::invalid_argument("integration.method must be modal or rk4");
  if (!(dt > 0.0)) throw std::invalid_argument("integration.dt must be > 0");
  if (!(dt_max >= dt))
    throw std::invalid_argument("integration.dt_max must be >= dt");
  if (!(growth >= 1.0))
    throw std::invalid_argument("integration.growth must be >= 1");
  if (!(horizon > 0.0))
    throw std::invalid_argument("integration.horizon must be > 0");
  if (!(tolerance > 0.0))
    throw std::invalid_argument("integration.tolerance must be > 0");
  if (window < 1) throw std::invalid_argument("integration.window must be >= 1");
  if (!(divergence_norm > 0.0))
    throw std::invalid_argument("integration.divergence_norm must be > 0");
  if (stride < 1) throw std::invalid_argument("output.stride must be >= 1");
}

GridTopology build_topology(const ScenarioConfig& cfg) {
  if (cfg.topology == "ring") return ring_topology(cfg.nodes);
  GridTopology topo;
  topo.n_nodes = cfg.nodes;
  topo.edges = cfg.edges;
  topo.validate();
  if (!is_connected(topo))
    throw std::invalid_argument("grid: edge list does not connect all nodes");
  return topo;
}

double scenario_lambda(const ScenarioConfig& cfg) {
  if (cfg.flex_source == "ceiling") return cfg.psi;
  if (cfg.flex_source == "explicit") return cfg.lambda_explicit;
  const std::vector<ApplianceModel> models =
      cfg.appliance_table.empty() ? default_appliances()
                                  : load_appliance_table(cfg.appliance_table);
  return flexibility_level(models, {cfg.stv, cfg.sev}, cfg.psi).lambda;
}

GridParams draw_parameters(const ScenarioConfig& cfg, const GridTopology& topo,
                           Rng& rng) {
  const int n = topo.n_nodes, m = topo.n_edges();
  GridParams p;
  p.R_s = draw_or_literal(cfg.R_s, cfg.R_s_lit, n, rng, "R_s");
  p.L_s = draw_or_literal(cfg.L_s, cfg.L_s_lit, n, rng, "L_s");
  p.C = draw_or_literal(cfg.C, cfg.C_lit, n, rng, "C");
  p.I_l = draw_or_literal(cfg.I_l, cfg.I_l_lit, n, rng, "I_l");
  p.R_line = draw_or_literal(cfg.R_line, cfg.R_line_lit, m, rng, "R_line");
  p.L_line = draw_or_literal(cfg.L_line, cfg.L_line_lit, m, rng, "L_line");
  p.V_d = broadcast(cfg.V_d, n, "V_d");
  p.V_min = broadcast(cfg.V_min, n, "V_min");
  p.V_max = broadcast(cfg.V_max, n, "V_max");
  p.pi_c = broadcast(cfg.pi_c, n, "pi_c");

  const std::vector<bool> adopt = adopter_mask(cfg);
  p.u_l_min.resize(n);
  for (int i = 0; i < n; ++i) p.u_l_min[i] = adopt[static_cast<std::size_t>(i)] ? 1.0 - cfg.psi : 1.0;

  const double lambda = scenario_lambda(cfg);
  p.pi_u = tune_pi_u(lambda, n, adopt, {1.0, cfg.spread}, rng);
  return p;
}

SimTrace integrate(const ClosedLoopSystem& sys, const Eigen::VectorXd& x0,
                   const IntegrationSettings& settings) {
  settings.validate();
  const bool modal = settings.method == "modal";
  constexpr long kMaxSteps = 5'000'000;

  SimTrace trace;
  Eigen::VectorXd x = x0;
  sys.snap(x);
  double t = 0.0;
  double dt = settings.dt;
  std::vector<char> sig = sys.signature(x);

  double prev_scl = 0.0;
  int below = 0;
  double first_below = 0.0;

  auto record = [&](const Eigen::VectorXd& r) {
    GridState gs;
    ControllerState cs;
    sys.unpack(x, gs, cs);
    trace.t.push_back(t);
    trace.plant.push_back(std::move(gs));
    trace.ctrl.push_back(std::move(cs));
    trace.S.push_back(sys.plant_storage(r));
    trace.S_c.push_back(sys.ctrl_storage(r));
    trace.S_cl.push_back(trace.S.back() + trace.S_c.back());
    trace.kkt.push_back(sys.kkt(x).max_norm);
  };

  {
    const Eigen::VectorXd r0 = sys.rate(x);
    record(r0);
    prev_scl = trace.S_cl.back();
  }

  while (t < settings.horizon && trace.steps < kMaxSteps) {
    Eigen::VectorXd cand;
    double supply_try = 0.0;
    double* sp = settings.accumulate_supply ? &supply_try : nullptr;
    bool fallback = false;

    if (modal) {
      auto res = sys.step(x, dt, sp);
      cand = std::move(res.x);
      fallback = res.used_fallback;
      if (cand.allFinite()) {
        const std::vector<char> csig = sys.signature(cand);
        if (csig != sig && dt > settings.dt * (1.0 + 1e-9)) {
          dt = std::max(dt / 8.0, settings.dt);
          continue;  // constraint boundary inside the step: refine
        }
      }
    } else {
      const Eigen::VectorXd k1 = sys.rate(x);
      const Eigen::VectorXd k2 = sys.rate(x + 0.5 * dt * k1);
      const Eigen::VectorXd k3 = sys.rate(x + 0.5 * dt * k2);
      const Eigen::VectorXd k4 = sys.rate(x + dt * k3);
      cand = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      if (sp) {
        // trapezoid on the port power, same convention as the modal path
        Eigen::VectorXd snapped = cand;
        sys.snap(snapped);
        supply_try =
            0.5 * dt * (supply_rate(sys, k1) + supply_rate(sys, sys.rate(snapped)));
      }
    }

    ++trace.steps;
    if (fallback) ++trace.fallback_steps;
    t += dt;
    x = std::move(cand);
    if (x.allFinite()) sys.snap(x);

    if (!x.allFinite() || x.lpNorm<Eigen::Infinity>() > settings.divergence_norm) {
      trace.diverged = true;
      trace.events.push_back({t, "state diverged"});
      if (x.allFinite()) {
        record(sys.rate(x));
      } else {
        trace.t.push_back(t);
        GridState gs;
        ControllerState cs;
        Eigen::VectorXd safe = x;
        for (Eigen::Index j = 0; j < safe.size(); ++j)
          if (!std::isfinite(safe[j])) safe[j] = 0.0;
        sys.unpack(safe, gs, cs);
        trace.plant.push_back(std::move(gs));
        trace.ctrl.push_back(std::move(cs));
        trace.S.push_back(0.0);
        trace.S_c.push_back(0.0);
        trace.S_cl.push_back(0.0);
        trace.kkt.push_back(0.0);
      }
      break;
    }

    const std::vector<char> nsig = sys.signature(x);
    if (nsig != sig) {
      describe_signature_change(sys.layout(), sig, nsig, t, trace.events);
      sig = nsig;
      if (modal) dt = settings.dt;  // regrow from the base step after an event
    }

    trace.supply_integral += supply_try;

    const Eigen::VectorXd r = sys.rate(x);
    const double rate_norm = r.lpNorm<Eigen::Infinity>();
    const double scl = sys.plant_storage(r) + sys.ctrl_storage(r);
    if (scl > prev_scl + 1e-9 * std::max(1.0, prev_scl)) ++trace.lyapunov_violations;
    prev_scl = scl;

    const bool final_step = !(t < settings.horizon);
    if (trace.steps % settings.stride == 0 || final_step) record(r);

    if (rate_norm < settings.tolerance) {
      if (below == 0) first_below = t;
      if (++below >= settings.window) {
        trace.converged = true;
        trace.convergence_time = first_below;
        trace.events.push_back({t, "converged"});
        if (trace.steps % settings.stride != 0 && !final_step) record(r);
        break;
      }
    } else {
      below = 0;
    }

    if (modal) dt = std::min(dt * settings.growth, settings.dt_max);
  }

  if (trace.steps >= kMaxSteps)
    trace.events.push_back({t, "step limit reached"});
  trace.final_state = x;
  return trace;
}

RunCertificate make_certificate(const ClosedLoopSystem& sys,
                                const SimTrace& trace) {
  RunCertificate cert;
  cert.converged = trace.converged;
  cert.diverged = trace.diverged;
  cert.convergence_time = trace.convergence_time;
  cert.lyapunov_violations = trace.lyapunov_violations;

  const Eigen::VectorXd& x = trace.final_state;
  sys.unpack(x, cert.steady, cert.steady_ctrl);
  if (trace.diverged) return cert;

  const GridParams& p = sys.params();
  const StateLayout& lay = sys.layout();
  const Eigen::VectorXd r = sys.rate(x);
  cert.final_rate_norm = r.lpNorm<Eigen::Infinity>();
  double prn = 0.0;
  for (int i = 0; i < lay.n; ++i)
    prn = std::max({prn, std::abs(r[lay.I_s(i)]), std::abs(r[lay.V(i)])});
  for (int k = 0; k < lay.m; ++k) prn = std::max(prn, std::abs(r[lay.I(k)]));
  cert.plant_rate_norm = prn;
  cert.plant_eq_residual = sys.plant_residual(x);
  cert.kkt_residual = sys.kkt(x).max_norm;

  GridInput input;
  ControllerPorts ports;
  interconnect(cert.steady, cert.steady_ctrl, p, sys.constraints(), input, ports);
  cert.loss_identity_gap =
      loss_penalty_identity(sys.topology(), p, cert.steady, input).gap_rel;

  cert.band_compliant = true;
  for (int i = 0; i < lay.n; ++i)
    if (cert.steady.V[i] < p.V_min[i] - 1e-6 ||
        cert.steady.V[i] > p.V_max[i] + 1e-6)
      cert.band_compliant = false;

  const double total = p.I_l.sum();
  cert.reduction_amps = (p.I_l.array() * (1.0 - input.u_l.array())).sum();
  cert.reduction_pct = total > 0.0 ? 100.0 * cert.reduction_amps / total : 0.0;
  cert.average_voltage = p.pi_c.dot(cert.steady.V) / p.pi_c.sum();
  return cert;
}

ScenarioResult run_scenario(const ScenarioConfig& cfg) {
  cfg.validate();
  const GridTopology topo = build_topology(cfg);
  Rng rng(cfg.seed);

  ScenarioResult result;
  result.lambda_flex = scenario_lambda(cfg);
  result.params = draw_parameters(cfg, topo, rng);

  ClosedLoopSystem sys(topo, result.params, cfg.gains, cfg.constraints);
  result.trace = integrate(sys, sys.cold_start(), cfg.integration);
  result.certificate = make_certificate(sys, result.trace);
  return result;
}

Eigen::VectorXd random_init(const ClosedLoopSystem& sys, Rng& rng) {
  const StateLayout& lay = sys.layout();
  const GridParams& p = sys.params();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(lay.size());
  for (int i = 0; i < lay.n; ++i) {
    x[lay.V(i)] = rng.uniform(p.V_d[i] - 2.0, p.V_d[i] + 2.0);
    x[lay.V_star(i)] = rng.uniform(p.V_d[i] - 2.0, p.V_d[i] + 2.0);
    x[lay.u_s(i)] = rng.uniform(p.V_d[i] - 2.0, p.V_d[i] + 2.0);
    x[lay.u_l(i)] = rng.uniform(p.u_l_min[i], 1.0);
    x[lay.I_s(i)] = rng.uniform(0.0, 12.0);
    x[lay.I_s_star(i)] = rng.uniform(0.0, 12.0);
    x[lay.lambda_a(i)] = rng.uniform(-12.0, 0.0);
    x[lay.lambda_b(i)] = rng.uniform(-1e8, 0.0);
    if (lay.band) {
      x[lay.eta_min(i)] = rng.uniform(0.0, 10.0);
      x[lay.eta_max(i)] = rng.uniform(0.0, 10.0);
    }
  }
  for (int k = 0; k < lay.m; ++k) x[lay.I(k)] = rng.uniform(-3.0, 3.0);
  return x;
}

}  // namespace dcflex
