#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace seirhcd {

/// Named box of uncertain inputs.
struct ParameterBounds {
  std::vector<std::string> names;
  std::vector<double> lo, hi;

  std::size_t size() const { return names.size(); }
  double width(std::size_t i) const { return hi[i] - lo[i]; }
  double midpoint(std::size_t i) const { return 0.5 * (lo[i] + hi[i]); }
  std::size_t find(const std::string& name) const;  // size() when absent
  /// Throws ConfigError for empty, mismatched or degenerate (lo >= hi) bounds.
  void validate() const;
  /// Maps unit-cube coordinates to the box.
  Eigen::VectorXd from_unit(const Eigen::Ref<const Eigen::VectorXd>& u) const;
  Eigen::VectorXd to_unit(const Eigen::Ref<const Eigen::VectorXd>& q) const;

  /// The 14 epidemiological and diffusion parameters with their wide default ranges
  /// (alpha_i, alpha_e, t_inc, t_inf, beta, eps_hc, t_hosp, t_imm, mu, t_crit, v_s, v_e, v_i, v_r).
  static ParameterBounds defaults();
};

/// JSON object {"name": [lo, hi], ...}; key order is preserved.
ParameterBounds load_bounds_json(const std::string& path);
ParameterBounds bounds_from_json(const std::string& text, const std::string& origin = "bounds");
std::string bounds_to_json(const ParameterBounds& bounds);

/// First n points of a `dim`-dimensional Sobol sequence in [0,1)^dim, randomised by a
/// seeded digital shift. Rows are points.
Eigen::MatrixXd sobol_points(std::size_t n, std::size_t dim, std::uint64_t seed);

/// Latin hypercube in [0,1)^dim: in every column each of the n strata [m/n, (m+1)/n) holds
/// exactly one point.
Eigen::MatrixXd latin_hypercube(std::size_t n, std::size_t dim, std::uint64_t seed);

}  // namespace seirhcd
