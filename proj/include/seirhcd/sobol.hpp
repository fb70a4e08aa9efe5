#pragma once

#include "seirhcd/analysis.hpp"
#include "seirhcd/sampling.hpp"

#include <Eigen/Dense>
#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace seirhcd {

/// Saltelli design with n*(k+2) rows in block order: A (rows 0..n-1), B (n..2n-1), then
/// AB_1..AB_k where AB_i is A with column i taken from B.
struct SaltelliDesign {
  Eigen::MatrixXd rows;  // parameter values in the bounds box
  std::size_t k = 0;
  std::size_t n = 0;

  std::size_t row_a(std::size_t j) const { return j; }
  std::size_t row_b(std::size_t j) const { return n + j; }
  std::size_t row_ab(std::size_t i, std::size_t j) const { return (2 + i) * n + j; }
};

SaltelliDesign saltelli_sample(const ParameterBounds& bounds, std::size_t n, std::uint64_t seed);

struct SensitivityResult {
  int day = 0;
  std::vector<std::string> names;
  std::vector<double> S;       // first-order indices, not clipped
  std::vector<double> ci_lo;   // percentile bootstrap interval
  std::vector<double> ci_hi;
  std::vector<double> ci;      // half-widths (ci_hi - ci_lo) / 2
  std::size_t n_samples = 0;   // base samples used by the estimator
};

struct BootstrapOptions {
  std::size_t resamples = 200;
  double level = 0.95;
  std::uint64_t seed = 0;
};

/// First-order indices S_i = V_i / V(Y) with V_i = mean_j f(B)_j (f(AB_i)_j - f(A)_j) and
/// V(Y) the variance over the A and B outputs. `use` selects the base samples j that enter
/// the estimate (all when empty). Throws NumericalError("constant output") when V(Y) = 0.
SensitivityResult first_order_indices(std::span<const double> y, std::size_t k, std::size_t n,
                                      const BootstrapOptions& bootstrap = {},
                                      const std::vector<std::size_t>& use = {});

struct TimesliceOptions {
  std::vector<int> days = {40, 80, 120, 160, 200};
  Compartment output = Compartment::I;
  std::size_t n = 512;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  BootstrapOptions bootstrap{};
  double max_failure_fraction = 0.01;
};

struct TimesliceReport {
  std::vector<SensitivityResult> results;
  std::size_t failed_rows = 0;     // rows that failed twice
  std::size_t retried_rows = 0;    // rows that needed the refined retry
  std::size_t dropped_samples = 0; // base samples removed from the estimator
};

/// Sobol indices of one observable at several days. Every design row is simulated once and
/// all days are read from that run. A failing row is retried once with a finer step; base
/// samples with a row that still fails are dropped, and the analysis aborts if more than
/// `max_failure_fraction` of the rows fail.
TimesliceReport analyze_timeslices(const ParameterBounds& bounds, const AnalysisScenario& scenario,
                                   const TimesliceOptions& options);

/// CSV with header day,parameter,S,ci_lo,ci_hi.
void write_indices_csv(std::ostream& out, const std::vector<SensitivityResult>& results);
/// Grouped bar chart (one panel per day) with confidence-interval whiskers.
void write_indices_svg(std::ostream& out, const std::vector<SensitivityResult>& results);

}  // namespace seirhcd
