#include "dcflex/psychosocial.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace dcflex {

const std::vector<ApplianceModel>& default_appliances() {
  static const std::vector<ApplianceModel> table = {
      {"refrigerator", 0.548, 0.066, 0.049, 0.05},
      {"freezer", 0.532, 0.070, 0.044, 0.05},
      {"dish washer", 0.614, 0.077, 0.028, 0.01},
      {"washing machine", 0.664, 0.074, 0.033, 0.02},
      {"tumble dryer", 0.607, 0.071, 0.026, 0.02},
      {"thermostat", 0.624, 0.071, 0.039, 0.85},
  };
  return table;
}

const std::vector<double>& default_survey_means() {
  static const std::vector<double> means = {3.19, 3.13, 3.45, 3.66, 3.43, 3.50};
  return means;
}

SurveyScaleStats stv_scale_stats() { return {4.80, 1.36}; }
SurveyScaleStats sev_scale_stats() { return {3.22, 1.23}; }

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

bool parse_number(const std::string& s, double& out) {
  try {
    std::size_t pos = 0;
    out = std::stod(s, &pos);
    return pos == s.size();
  } catch (const std::exception&) {
    return false;
  }
}

}  // namespace

std::vector<ApplianceModel> load_appliance_table(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("appliance table: cannot open " + path);
  std::vector<ApplianceModel> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ss(t);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(trim(field));
    if (fields.size() != 5)
      throw std::runtime_error("appliance table: " + path + ":" +
                               std::to_string(lineno) +
                               ": expected 5 comma-separated fields, got " +
                               std::to_string(fields.size()));
    double mu;
    if (!parse_number(fields[1], mu)) {
      if (out.empty()) continue;  // header line
      throw std::runtime_error("appliance table: " + path + ":" +
                               std::to_string(lineno) + ": bad mu value '" +
                               fields[1] + "'");
    }
    ApplianceModel m;
    m.name = fields[0];
    m.mu = mu;
    const char* what[] = {"theta", "epsilon", "omega"};
    double* dst[] = {&m.theta, &m.epsilon, &m.omega};
    for (int k = 0; k < 3; ++k)
      if (!parse_number(fields[2 + k], *dst[k]))
        throw std::runtime_error("appliance table: " + path + ":" +
                                 std::to_string(lineno) + ": bad " + what[k] +
                                 " value '" + fields[2 + k] + "'");
    if (m.mu < 0.0 || m.mu > 1.0 || m.omega < 0.0 || m.omega > 1.0)
      throw std::runtime_error("appliance table: " + path + ":" +
                               std::to_string(lineno) +
                               ": mu and omega must lie in [0,1]");
    out.push_back(std::move(m));
  }
  if (out.empty())
    throw std::runtime_error("appliance table: " + path + " has no data rows");
  return out;
}

double adoption_likelihood(const ApplianceModel& model,
                           const ValueProfile& profile) {
  const double raw =
      model.mu + model.theta * profile.stv + model.epsilon * profile.sev;
  return std::clamp(raw, 0.0, 1.0);
}

FlexibilityEstimate flexibility_level(const std::vector<ApplianceModel>& models,
                                      const ValueProfile& profile, double psi) {
  if (models.empty())
    throw std::invalid_argument("flexibility_level: no appliances");
  if (psi < 0.0 || psi > 1.0)
    throw std::invalid_argument("flexibility_level: psi must lie in [0,1]");
  double wsum = 0.0;
  for (const auto& m : models) wsum += m.omega;
  if (std::abs(wsum - 1.0) > 1e-9)
    throw std::invalid_argument(
        "flexibility_level: appliance weights must sum to 1, got " +
        std::to_string(wsum));
  FlexibilityEstimate est;
  est.psi = psi;
  est.rho.resize(static_cast<Eigen::Index>(models.size()));
  double acc = 0.0;
  for (std::size_t j = 0; j < models.size(); ++j) {
    est.rho[static_cast<Eigen::Index>(j)] = adoption_likelihood(models[j], profile);
    acc += models[j].omega * est.rho[static_cast<Eigen::Index>(j)];
  }
  est.lambda = psi * acc;
  return est;
}

Eigen::VectorXd tune_pi_u(double lambda, int n, const std::vector<bool>& adopters,
                          const SurveyScaleStats& spread, Rng& rng) {
  if (n <= 0) throw std::invalid_argument("tune_pi_u: n must be positive");
  if (adopters.size() != static_cast<std::size_t>(n))
    throw std::invalid_argument("tune_pi_u: adopter mask must have length n");
  if (lambda < 0.0 || lambda >= 1.0)
    throw std::invalid_argument(
        "tune_pi_u: flexibility level must lie in [0,1), got " +
        std::to_string(lambda));

  const double floor = 1e-6;
  Eigen::VectorXd pi_u = Eigen::VectorXd::Constant(n, floor);
  if (lambda == 0.0) return pi_u;  // nothing to distribute, keep the floor

  const double target = 1.0 / (1.0 - lambda) - 1.0;
  int n_adopt = 0;
  for (bool a : adopters) n_adopt += a ? 1 : 0;
  if (n_adopt == 0)
    throw std::invalid_argument(
        "tune_pi_u: positive flexibility level but no adopters");
  const double adopter_share = target - floor * (n - n_adopt);
  if (adopter_share <= 0.0)
    throw std::invalid_argument(
        "tune_pi_u: flexibility level too small to cover the non-adopter floor");

  // clamp keeps every weight within a factor ~1.5 of the mean; the stiffest
  // load row scales with 1/pi_u and an outlier draw would push its gradient
  // past what double-precision state resolution can express
  Eigen::VectorXd draws(n_adopt);
  for (int k = 0; k < n_adopt; ++k)
    draws[k] = std::clamp(rng.normal(spread.mean, spread.sd),
                          0.8 * spread.mean, 1.25 * spread.mean);
  draws *= adopter_share / draws.sum();
  for (int i = 0, k = 0; i < n; ++i)
    if (adopters[static_cast<std::size_t>(i)]) pi_u[i] = draws[k++];
  return pi_u;
}

double survey_transform(double raw_score) {
  if (!(raw_score >= 1.0 && raw_score <= 5.0))
    throw std::invalid_argument("survey_transform: score must lie in [1,5], got " +
                                std::to_string(raw_score));
  return (raw_score - 1.0) / 4.0;
}

Eigen::VectorXd standardize(const Eigen::VectorXd& scores, double mean,
                            double sd) {
  if (!(sd > 0.0))
    throw std::invalid_argument("standardize: sd must be positive");
  return (scores.array() - mean) / sd;
}

}  // namespace dcflex
