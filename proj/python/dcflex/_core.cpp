#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <vector>

#include "dcflex/config.hpp"
#include "dcflex/oracle_suite.hpp"
#include "dcflex/presets.hpp"
#include "dcflex/psychosocial.hpp"
#include "dcflex/sim.hpp"
#include "dcflex/welfare.hpp"

namespace py = pybind11;
using namespace dcflex;

namespace {

std::vector<double> as_list(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

py::dict summarize(const ScenarioResult& res) {
  const RunCertificate& c = res.certificate;
  py::dict d;
  d["lambda"] = res.lambda_flex;
  d["converged"] = c.converged;
  d["diverged"] = c.diverged;
  d["convergence_time"] = c.convergence_time;
  d["kkt_residual"] = c.kkt_residual;
  d["plant_residual"] = c.plant_eq_residual;
  d["loss_identity_gap"] = c.loss_identity_gap;
  d["band_compliant"] = c.band_compliant;
  d["reduction_amps"] = c.reduction_amps;
  d["reduction_pct"] = c.reduction_pct;
  d["average_voltage"] = c.average_voltage;
  d["lyapunov_violations"] = c.lyapunov_violations;
  d["V"] = as_list(c.steady.V);
  d["I_s"] = as_list(c.steady.I_s);
  d["u_l"] = as_list(c.steady_ctrl.u_l_star);
  d["pi_u"] = as_list(res.params.pi_u);
  d["I_l"] = as_list(res.params.I_l);
  return d;
}

}  // namespace

PYBIND11_MODULE(_dcflex, m) {
  m.doc() = "distributed curtailment control for islanded DC grids";

  m.def(
      "flexibility_level",
      [](double stv, double sev, double psi, const std::string& table) {
        std::vector<ApplianceModel> models =
            table.empty() ? default_appliances() : load_appliance_table(table);
        FlexibilityEstimate est =
            flexibility_level(models, ValueProfile{stv, sev}, psi);
        py::dict d;
        d["lambda"] = est.lambda;
        d["psi"] = est.psi;
        d["rho"] = as_list(est.rho);
        std::vector<std::string> names;
        for (const ApplianceModel& a : models) names.push_back(a.name);
        d["appliances"] = names;
        return d;
      },
      py::arg("stv"), py::arg("sev"), py::arg("psi") = 0.5,
      py::arg("table") = std::string());

  m.def(
      "ideal_split",
      [](double alpha, const std::vector<double>& pi_c,
         const std::vector<double>& pi_u, const std::vector<double>& I_l) {
        auto wrap = [](const std::vector<double>& v) {
          return Eigen::Map<const Eigen::VectorXd>(v.data(),
                                                   static_cast<long>(v.size()));
        };
        IdealWelfareOptimum opt =
            ideal_welfare_optimum(alpha, wrap(pi_c), wrap(pi_u), wrap(I_l));
        py::dict d;
        d["price"] = opt.price;
        d["I_s"] = as_list(opt.I_s);
        d["u_l"] = as_list(opt.u_l);
        return d;
      },
      py::arg("alpha"), py::arg("pi_c"), py::arg("pi_u"), py::arg("I_l"));

  m.def(
      "run_preset",
      [](int which, py::object seed) {
        ScenarioConfig cfg = preset_scenario(which);
        if (!seed.is_none()) cfg.seed = seed.cast<std::uint64_t>();
        return summarize(run_scenario(cfg));
      },
      py::arg("which"), py::arg("seed") = py::none());

  m.def(
      "run_config",
      [](const std::string& text, const std::vector<std::string>& overrides) {
        return summarize(
            run_scenario(load_config_text(text, "<python>", overrides)));
      },
      py::arg("text"), py::arg("overrides") = std::vector<std::string>());

  m.def("preset_text", &preset_text, py::arg("which"));

  m.def("oracle_suite", []() {
    py::list out;
    for (const OracleCheck& c : run_oracle_suite()) {
      py::dict d;
      d["name"] = c.name;
      d["pass"] = c.pass;
      d["worst"] = c.worst;
      d["detail"] = c.detail;
      out.append(d);
    }
    return out;
  });
}
