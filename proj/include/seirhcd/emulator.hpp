#pragma once

#include "seirhcd/sampling.hpp"

#include <Eigen/Dense>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace seirhcd {

struct LhcDesign {
  ParameterBounds bounds;
  Eigen::MatrixXd points;  // n x k, in the bounds box
  std::uint64_t seed = 0;
};

LhcDesign lhc_sample(const ParameterBounds& bounds, std::size_t n, std::uint64_t seed);

struct EmulatorFitOptions {
  int degree = 1;          // total degree of the monomial regression basis
  int restarts = 5;        // likelihood optimisations from different length scales
  double delta_min = 0.02; // correlation lengths, in unit-cube coordinates
  double delta_max = 5.0;
  double nugget = 1e-10;   // relative jitter at zero distance
  int max_iterations = 100;
  std::uint64_t seed = 0;
};

/// Regression on monomials plus a zero-mean Gaussian process on the residuals with
/// c(q, q') = sigma2 * exp(-sum_i (q_i - q'_i)^2 / delta_i^2), inputs scaled to [0,1].
struct EmulatorModel {
  ParameterBounds bounds;
  int degree = 1;
  std::vector<std::vector<int>> exponents;  // one exponent vector per basis function
  Eigen::VectorXd beta;
  double sigma2 = 0.0;
  Eigen::VectorXd delta;
  double nugget = 0.0;
  double log_likelihood = 0.0;

  Eigen::MatrixXd design;    // unit-cube inputs
  Eigen::VectorXd outputs;
  Eigen::VectorXd weights;   // R^{-1} residuals
  Eigen::MatrixXd chol_lower;
  std::vector<std::string> warnings;
};

/// Least-squares regression followed by marginal-likelihood estimation of (sigma2, delta).
/// sigma2 is profiled out; delta is fitted with a bounded quasi-Newton method from
/// `restarts` starting points. Throws NumericalError when every start fails.
EmulatorModel fit_emulator(const LhcDesign& design, const Eigen::VectorXd& y,
                           const EmulatorFitOptions& options = {});

struct Prediction {
  double mean = 0.0;
  double variance = 0.0;
};

Prediction predict(const EmulatorModel& model, const Eigen::VectorXd& q);
/// Predictions for many points (rows of q), evaluated in blocks.
std::vector<Prediction> predict_many(const EmulatorModel& model, const Eigen::MatrixXd& q);

/// Leave-one-out standardized errors (y_i - mean_{-i}) / sd_{-i} for the fitted
/// hyperparameters.
Eigen::VectorXd loo_standardized_errors(const EmulatorModel& model);

/// |z - mean| / sqrt(var_emulator + var_obs). Throws NumericalError("degenerate denominator")
/// when the total variance is 0.
double implausibility(const Prediction& pred, double z, double var_obs);
double implausibility(const EmulatorModel& model, const Eigen::VectorXd& q, double z,
                      double var_obs);

/// One observable: one emulator per matched day; its implausibility is the maximum over days.
struct HistoryTarget {
  std::string name;
  std::vector<EmulatorModel> models;
  std::vector<double> z;
  std::vector<double> var_obs;
};

struct QuantileSummary {
  double min = 0, q25 = 0, q50 = 0, q75 = 0, max = 0;
};

struct PlausibleSpace {
  ParameterBounds bounds;
  double threshold = 3.0;
  std::size_t n_candidates = 0;
  Eigen::MatrixXd accepted;                       // rows of accepted candidates
  std::vector<QuantileSummary> summary;           // per parameter, empty if nothing accepted
  std::vector<std::size_t> accepted_per_target;   // before intersection
  std::vector<double> min_implausibility;         // per target, over all candidates
  std::vector<double> max_implausibility;

  bool empty() const { return accepted.rows() == 0; }
  /// Per-parameter [min, max] of the accepted set, padded by 10*(max-min)/(accepted+1) per side and
  /// clipped to the input box; the input box when empty.
  ParameterBounds refined_bounds() const;
};

/// Uniform candidates in the box; a candidate is kept iff its implausibility is below
/// `threshold` for every target.
PlausibleSpace history_match(const std::vector<HistoryTarget>& targets,
                             const ParameterBounds& bounds, std::size_t n_candidates,
                             double threshold, std::uint64_t seed, unsigned workers = 1);

/// Per-candidate implausibility for one target (max over its days).
std::vector<double> target_implausibility(const HistoryTarget& target, const Eigen::MatrixXd& q);

QuantileSummary summarize(std::vector<double> values);

void write_accepted_csv(std::ostream& out, const PlausibleSpace& space);
/// {"threshold":..,"parameters":{name:{min,q25,q50,q75,max,lo,hi}}}
std::string quantiles_json(const PlausibleSpace& space);
/// Box-plot data normalised to the input box: name,lo,hi,min,q25,q50,q75,max.
void write_boxplot_csv(std::ostream& out, const PlausibleSpace& space);

}  // namespace seirhcd
