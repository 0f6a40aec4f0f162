#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dcflex/export.hpp"
#include "dcflex/oracle_suite.hpp"
#include "dcflex/presets.hpp"
#include "dcflex/sim.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kBadConfig = 1;
constexpr int kDiverged = 2;
constexpr int kOracleFailed = 3;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

int run_and_export(const dcflex::ScenarioConfig& cfg, const std::string& out_dir,
                   bool plot) {
  dcflex::ScenarioResult result = dcflex::run_scenario(cfg);

  std::filesystem::create_directories(out_dir);
  dcflex::ClosedLoopSystem sys(dcflex::build_topology(cfg), result.params,
                               cfg.gains, cfg.constraints);
  const std::string trace_path = out_dir + "/trace.csv";
  const std::string cert_path = out_dir + "/certificate.txt";
  dcflex::write_trace_csv(trace_path, sys, result.trace);
  dcflex::write_certificate(cert_path, cfg.name, result);
  if (plot) dcflex::write_plots(out_dir, sys, result.trace);

  const dcflex::RunCertificate& c = result.certificate;
  if (c.diverged) {
    std::cout << cfg.name << ": diverged after " << result.trace.steps
              << " steps\n";
    std::cout << "wrote " << trace_path << ", " << cert_path << "\n";
    return kDiverged;
  }
  if (c.converged)
    std::cout << cfg.name << ": converged at t=" << fmt(c.convergence_time)
              << " s after " << result.trace.steps << " steps\n";
  else
    std::cout << cfg.name << ": hit the horizon after " << result.trace.steps
              << " steps without settling\n";
  std::cout << "reduction " << fmt(c.reduction_amps) << " A ("
            << fmt(c.reduction_pct) << " %), average voltage "
            << fmt(c.average_voltage) << " V, kkt residual "
            << fmt(c.kkt_residual) << "\n";
  std::cout << "wrote " << trace_path << ", " << cert_path;
  if (plot)
    std::cout << ", " << out_dir << "/voltage.svg, " << out_dir
              << "/current.svg, " << out_dir << "/ul.svg";
  std::cout << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"distributed welfare-optimal control of an islanded DC grid"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "integrate a scenario config file");
  std::string run_config;
  std::uint64_t run_seed = 0;
  std::string run_out = "out";
  bool run_plot = false;
  std::vector<std::string> run_sets;
  run->add_option("config", run_config, "config file")->required();
  auto* seed_opt =
      run->add_option("--seed", run_seed, "override the draw seed");
  run->add_option("--out", run_out, "output directory (default: out)");
  run->add_flag("--plot", run_plot, "also write voltage/current/ul SVGs");
  run->add_option("--set", run_sets,
                  "override a config entry, section.key=value (repeatable)");

  auto* preset = app.add_subcommand("preset", "run one of the bundled scenarios");
  int preset_which = 0;
  std::string preset_out;
  preset->add_option("which", preset_which, "scenario number, 1-4")
      ->required()
      ->check(CLI::Range(1, 4));
  preset->add_option("--out", preset_out,
                     "output directory (default: scenario<N>)");

  auto* validate = app.add_subcommand("validate", "check a config without running");
  std::string validate_config;
  validate->add_option("config", validate_config, "config file")->required();

  app.add_subcommand("oracle", "self-check the analytic results");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      dcflex::ScenarioConfig cfg;
      try {
        cfg = dcflex::load_config_file(run_config, run_sets);
        if (seed_opt->count()) cfg.seed = run_seed;
        cfg.validate();
      } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kBadConfig;
      }
      return run_and_export(cfg, run_out, run_plot);
    }

    if (preset->parsed()) {
      dcflex::ScenarioConfig cfg = dcflex::preset_scenario(preset_which);
      std::string out =
          preset_out.empty() ? "scenario" + std::to_string(preset_which)
                             : preset_out;
      return run_and_export(cfg, out, false);
    }

    if (validate->parsed()) {
      try {
        dcflex::ScenarioConfig cfg = dcflex::load_config_file(validate_config);
        dcflex::GridTopology topo = dcflex::build_topology(cfg);
        dcflex::Rng rng(cfg.seed);
        dcflex::GridParams p = dcflex::draw_parameters(cfg, topo, rng);
        dcflex::ClosedLoopSystem sys(topo, p, cfg.gains, cfg.constraints);
        std::cout << "ok: " << cfg.name << ", " << p.n() << " nodes, "
                  << p.m() << " lines, curtailment ceiling "
                  << fmt(dcflex::scenario_lambda(cfg)) << ", sum pi_u "
                  << fmt(p.pi_u.sum()) << ", state dimension "
                  << sys.layout().size() << "\n";
        return kOk;
      } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kBadConfig;
      }
    }

    // oracle
    std::vector<dcflex::OracleCheck> checks = dcflex::run_oracle_suite();
    for (const auto& c : checks)
      std::cout << (c.pass ? "pass" : "FAIL") << "  " << c.name << ": "
                << c.detail << "\n";
    return all_passed(checks) ? kOk : kOracleFailed;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kBadConfig;
  }
}
