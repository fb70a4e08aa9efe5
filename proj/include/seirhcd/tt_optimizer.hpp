#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <cstddef>
#include <functional>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace seirhcd {

struct TTConfig {
  std::vector<double> b_min, b_max;
  std::size_t n = 16;       // nodes per direction, endpoints included
  std::size_t r_max = 4;
  std::size_t sweeps = 4;   // N_TT; one sweep visits every core once
  double alpha0 = std::numeric_limits<double>::infinity();
  std::string mapping = "exp";  // "exp" or "arctan"
  std::uint64_t seed = 0;
  std::size_t max_evaluations = 0;   // 0: limited by sweeps only
  std::size_t stagnation_sweeps = 3; // stop after this many sweeps without improvement; 0 disables
  unsigned workers = 1;

  std::size_t d() const { return b_min.size(); }
  double node(std::size_t dim, std::size_t i) const;
  double cell(std::size_t dim) const;
  /// Throws ConfigError naming the offending field.
  void validate() const;
  /// Upper bound on objective calls: sweeps * d * n * r_max^2.
  std::size_t budget() const;
};

/// Strict JSON mirror of TTConfig; unknown keys are rejected.
TTConfig tt_config_from_json(const std::string& text, const std::string& origin = "tt config");
std::string tt_config_to_json(const TTConfig& cfg);

struct TTLogEntry {
  std::size_t iteration = 0;  // 1-based sweep number
  std::size_t dimension = 0;  // core visited
  std::size_t evaluations = 0;  // cumulative distinct objective calls
  double alpha = 0.0;
  double J_best = 0.0;
};

struct TTResult {
  std::vector<double> q_best;
  std::vector<std::size_t> index_best;  // node index per dimension
  double J_best = std::numeric_limits<double>::infinity();
  double alpha = std::numeric_limits<double>::infinity();
  std::size_t evaluations = 0;
  std::size_t sweeps_done = 0;
  std::string stop_reason;
  std::vector<double> cell;             // grid spacing per dimension
  std::vector<TTLogEntry> log;
  std::vector<std::string> failures;    // one line per discarded candidate
};

/// h(J - alpha). "exp": exp(-(J - alpha) / scale), in (0, 1], 0 on underflow.
/// "arctan": (pi/2 - atan((J - alpha) / scale)) / (pi/2).
double mapping_h(double J, double alpha, double scale = 1.0, const std::string& mapping = "exp");

/// min(alpha, min(batch)); non-finite batch values are ignored.
double update_shift(double alpha, std::span<const double> batch);

using Objective = std::function<double(std::span<const double>)>;

/// TT-cross search over the uniform node grid: alternating sweeps over the cores, each
/// evaluating the candidate set formed from the neighbouring index sets and selecting the next
/// index set with maxvol on the mapped values. The objective may be called concurrently from
/// `workers` threads. A throwing or non-finite candidate is discarded and logged; a core
/// whose candidates all fail aborts with NumericalError.
TTResult tt_optimize(const Objective& objective, const TTConfig& cfg);

/// Row indices of a locally maximal-volume r x r submatrix of the m x r matrix `a` (m >= r).
/// Works on an orthonormal basis of the column space, so rank-deficient input is accepted.
/// Row `pin` (if < m) is always part of the selection.
std::vector<std::size_t> maxvol(const Eigen::MatrixXd& a, std::size_t pin = SIZE_MAX,
                                double tol = 1.05, int max_iterations = 200);

/// CSV header iteration,dimension,evaluations,alpha,J_best.
void write_tt_log_csv(std::ostream& out, const TTResult& result);

}  // namespace seirhcd
