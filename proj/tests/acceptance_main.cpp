// Release gates: every quantitative claim the project makes, checked in one
// binary, one line per gate. Exit 0 means every gate came out as documented;
// two gates are expected red: gate 3 (the steady state prices delivered power
// into the voltage objective, so the average parks near the band floor, not at
// the 380.05/380.07 V references) and gate 7 (a rounding miss in the bundled
// survey means).
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <string>
#include <vector>

#include "dcflex/oracle_suite.hpp"
#include "dcflex/presets.hpp"
#include "dcflex/psychosocial.hpp"
#include "dcflex/sim.hpp"

using namespace dcflex;

namespace {

struct Gate {
  std::string name;
  bool pass = false;
  bool expect_pass = true;
  std::string detail;
};

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

ScenarioResult run_preset_seed(int which, std::uint64_t seed) {
  ScenarioConfig cfg = preset_scenario(which);
  cfg.seed = seed;
  return run_scenario(cfg);
}

}  // namespace

int main() {
  std::vector<Gate> gates(7);
  std::printf("release gates\n");

  // gates 1 and 4 ride on the oracle suite
  auto t0 = std::chrono::steady_clock::now();
  std::vector<OracleCheck> oracle = run_oracle_suite();
  double oracle_time = seconds_since(t0);
  {
    const OracleCheck& qp = oracle[0];
    bool in_time = oracle_time < 5.0;
    gates[0] = {"curtailment split vs enumerating QP", qp.pass && in_time, true,
                fmt("worst gap %.2e, suite %.2f s (budget 5 s)", qp.worst,
                    oracle_time)};
    const OracleCheck& flex = oracle[1];
    const OracleCheck& sum = oracle[2];
    gates[3] = {"flexibility arithmetic and weight-sum identity",
                flex.pass && sum.pass, true,
                fmt("level gap %.2e (tol 1e-5), sum gap %.2e (tol 1e-12)",
                    flex.worst, sum.worst)};
  }

  // the four bundled scenarios over five seeds
  const double target_pct[4] = {44.1, 30.3, 34.8, 30.6};
  const double target_avg[4] = {380.05, 380.07, 380.07, 380.07};
  const std::uint64_t seeds[5] = {1, 2, 3, 4, 5};
  double pct[5][4];
  bool all_converged = true;
  bool bands_ok = true;
  bool band_compliant = true;
  bool avg_ok = true;
  double worst_kkt = 0.0, worst_plant = 0.0, worst_loss = 0.0;

  std::vector<ScenarioResult> base_runs;
  for (int s = 0; s < 5; ++s) {
    for (int k = 0; k < 4; ++k) {
      ScenarioResult res = run_preset_seed(k + 1, seeds[s]);
      const RunCertificate& c = res.certificate;
      all_converged = all_converged && c.converged && !c.diverged;
      pct[s][k] = c.reduction_pct;
      worst_kkt = std::max(worst_kkt, c.kkt_residual);
      worst_plant = std::max(worst_plant, c.plant_eq_residual);
      worst_loss = std::max(worst_loss, c.loss_identity_gap);
      if (s == 0) {
        // reduction bands and voltage targets are judged at the shipped seed
        bool in_band = k == 0 ? (pct[s][k] >= 40.0 && pct[s][k] <= 50.0)
                              : std::abs(pct[s][k] - target_pct[k]) <= 2.5;
        if (!in_band) bands_ok = false;
        band_compliant = band_compliant && c.band_compliant;
        avg_ok = avg_ok && std::abs(c.average_voltage - target_avg[k]) <= 0.1;
        base_runs.push_back(std::move(res));
      }
    }
  }

  bool ordering_ok = true;
  for (int s = 0; s < 5; ++s)
    if (!(pct[s][2] > pct[s][3] && pct[s][3] >= pct[s][1])) ordering_ok = false;
  gates[1] = {"scenario consumption reductions",
              bands_ok && ordering_ok && all_converged && band_compliant, true,
              fmt("S1 %.1f%% S2 %.1f%% S3 %.1f%% S4 %.1f%% "
                  "(targets 44.1/30.3/34.8/30.6, S1 band [40,50], rest "
                  "+-2.5pp); S3>S4>=S2 %s over seeds 1..5; %s",
                  pct[0][0], pct[0][1], pct[0][2], pct[0][3],
                  ordering_ok ? "held" : "BROKEN",
                  all_converged && band_compliant
                      ? "all runs converged inside the band"
                      : "convergence or band compliance LOST")};

  // the closed loop prices delivered power into the voltage objective, so the
  // converged average rides the band floor; the 380.05/380.07 V references
  // would need that pricing term scaled away, hence the documented red
  gates[2] = {"voltage band and averages",
              all_converged && band_compliant && avg_ok, false,
              fmt("averages %.2f/%.2f/%.2f/%.2f V vs references "
                  "380.05/380.07/380.07/380.07 +-0.1 V%s",
                  base_runs[0].certificate.average_voltage,
                  base_runs[1].certificate.average_voltage,
                  base_runs[2].certificate.average_voltage,
                  base_runs[3].certificate.average_voltage,
                  all_converged && band_compliant
                      ? "; every node held inside [379.3, 380.7] V"
                      : "; convergence or band compliance LOST")};

  // stability certificates on every converged run, plus a plain
  // (unconstrained) run where the combined storage must be monotone
  {
    ScenarioConfig plain = preset_scenario(2);
    plain.constraints.clamp_u_l = false;
    plain.constraints.voltage_band = false;
    ScenarioResult res = run_scenario(plain);
    bool mono = res.certificate.converged &&
                res.certificate.lyapunov_violations == 0;
    bool certs = worst_kkt < 1e-6 && worst_plant < 1e-9 && worst_loss < 1e-8;
    gates[4] = {"stability certificates", mono && certs, true,
                fmt("kkt %.2e (tol 1e-6), circuit residual %.2e (tol 1e-9), "
                    "loss gap %.2e (tol 1e-8), %d storage violations plain "
                    "mode",
                    worst_kkt, worst_plant, worst_loss,
                    res.certificate.lyapunov_violations)};
  }

  // global convergence: twenty scattered starts, one optimum
  {
    ScenarioConfig cfg = preset_scenario(2);
    GridTopology topo = build_topology(cfg);
    Rng rng(cfg.seed);
    GridParams p = draw_parameters(cfg, topo, rng);
    ClosedLoopSystem sys(topo, p, cfg.gains, cfg.constraints);
    SimTrace base = integrate(sys, sys.cold_start(), cfg.integration);
    bool ok = base.converged;
    double worst = 0.0;
    Rng starts(20260818);
    for (int trial = 0; trial < 20 && ok; ++trial) {
      SimTrace tr = integrate(sys, random_init(sys, starts), cfg.integration);
      ok = ok && tr.converged;
      for (int i = 0; i < base.final_state.size() && ok; ++i) {
        double rel = std::abs(tr.final_state[i] - base.final_state[i]) /
                     (1.0 + std::abs(base.final_state[i]));
        worst = std::max(worst, rel);
      }
    }
    gates[5] = {"one optimum from twenty scattered starts", ok && worst < 1e-5,
                true, fmt("worst coordinate distance %.2e (tol 1e-5)", worst)};
  }

  // survey round trip: transformed raw means vs the calibrated baselines
  {
    const std::vector<ApplianceModel>& models = default_appliances();
    const std::vector<double>& raw = default_survey_means();
    double worst = 0.0;
    std::string miss;
    int within = 0;
    for (std::size_t j = 0; j < models.size(); ++j) {
      double gap = std::abs(survey_transform(raw[j]) - models[j].mu);
      worst = std::max(worst, gap);
      if (gap <= 0.001 + 1e-12)
        ++within;
      else
        miss += fmt(" %s %.4f;", models[j].name.c_str(), gap);
    }
    bool pass = within == static_cast<int>(models.size());
    gates[6] = {"survey round trip", pass, false,
                fmt("%d/%zu within 0.001;%s known rounding gap in the "
                    "published survey means",
                    within, models.size(), miss.c_str())};
  }

  int unexpected = 0;
  for (std::size_t g = 0; g < gates.size(); ++g) {
    bool as_documented = gates[g].pass == gates[g].expect_pass;
    if (!as_documented) ++unexpected;
    std::printf("[%zu] %-45s %s  %s%s\n", g + 1, gates[g].name.c_str(),
                gates[g].pass ? "pass" : "fail", gates[g].detail.c_str(),
                as_documented ? "" : "  ** UNEXPECTED **");
  }
  int passed = 0;
  for (const Gate& g : gates) passed += g.pass ? 1 : 0;
  std::printf("result: %d/7 pass, %d unexpected\n", passed, unexpected);
  return unexpected == 0 ? 0 : 1;
}
