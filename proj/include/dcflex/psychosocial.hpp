#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "dcflex/rng.hpp"

namespace dcflex {

/// Per-appliance adoption model: mu is the population baseline likelihood
/// of automating this appliance, theta/epsilon are regression slopes on the
/// standardized self-transcendence (STV) and self-enhancement (SEV) value
/// scores, omega weights the appliance's share of household consumption.
struct ApplianceModel {
  std::string name;
  double mu = 0.0;
  double theta = 0.0;
  double epsilon = 0.0;
  double omega = 0.0;
};

/// Standardized community value scores.
struct ValueProfile {
  double stv = 0.0;
  double sev = 0.0;
};

struct SurveyScaleStats {
  double mean = 0.0;
  double sd = 1.0;
};

/// rho: per-appliance adoption likelihoods; psi: technical ceiling on the
/// curtailable share; lambda: acceptable flexibility level, psi-scaled
/// consumption-weighted mean of rho.
struct FlexibilityEstimate {
  Eigen::VectorXd rho;
  double psi = 0.0;
  double lambda = 0.0;
};

/// Bundled default dataset (Dutch household survey, 794 respondents).
const std::vector<ApplianceModel>& default_appliances();
/// Raw 5-point mean adoption scores, aligned with default_appliances().
const std::vector<double>& default_survey_means();
/// Value-scale statistics from the same survey.
SurveyScaleStats stv_scale_stats();  // mean 4.80, sd 1.36
SurveyScaleStats sev_scale_stats();  // mean 3.22, sd 1.23

/// Loads an appliance table from a CSV-style file with columns
/// name,mu,theta,epsilon,omega. Lines starting with '#' and an optional
/// header line are skipped. Throws std::runtime_error naming the line on
/// malformed input.
std::vector<ApplianceModel> load_appliance_table(const std::string& path);

/// mu + theta*STV + epsilon*SEV, clamped to [0,1] so it stays a proportion.
double adoption_likelihood(const ApplianceModel& model,
                           const ValueProfile& profile);

/// Lambda = psi * sum_j omega_j rho_j. Requires the omegas to sum to 1
/// within 1e-9 and psi in [0,1].
FlexibilityEstimate flexibility_level(const std::vector<ApplianceModel>& models,
                                      const ValueProfile& profile, double psi);

/// Picks the utility coefficients pi_u so they sum to 1/(1-lambda) - 1
/// exactly. Adopters receive normal draws clamped to [0.8, 1.25] times the
/// scale mean (one draw per adopter, in node order) renormalized onto the
/// target sum; non-adopters are pinned to the 1e-6 floor and their share is
/// taken out of the target before renormalizing. lambda = 0 returns the
/// all-floor vector without renormalization. Deterministic given the Rng
/// state.
Eigen::VectorXd tune_pi_u(double lambda, int n, const std::vector<bool>& adopters,
                          const SurveyScaleStats& spread, Rng& rng);

/// Maps a raw 5-point survey score onto [0,1]: (raw - 1) / 4.
double survey_transform(double raw_score);

/// (x - mean) / sd elementwise; sd must be positive.
Eigen::VectorXd standardize(const Eigen::VectorXd& scores, double mean,
                            double sd);

}  // namespace dcflex
