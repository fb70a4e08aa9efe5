#pragma once

#include "seirhcd/fdm.hpp"
#include "seirhcd/model.hpp"
#include "seirhcd/trajectory.hpp"

#include <array>
#include <cstdint>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

namespace seirhcd {

/// Quartic "Gaussian cap" a * exp(-(x - b)^4 / c).
struct Cap {
  double a = 0.0;  // amplitude (density)
  double b = 0.5;  // center on [0, 1]
  double c = 1e-5; // width, > 0

  double operator()(double x) const;
};

/// Unknown initial sources: three caps for s, three for e, uniform i0.
struct SourceConfig {
  std::array<Cap, 3> s_caps{};
  std::array<Cap, 3> e_caps{};
  double i0 = 0.0;

  static constexpr std::size_t kDimension = 19;

  /// Flat vector order: s caps (a,b,c) x3, e caps (a,b,c) x3, i0.
  std::array<double, kDimension> to_vector() const;
  static SourceConfig from_vector(const std::array<double, kDimension>& q);
  static const std::array<std::string, kDimension>& coordinate_names();
  /// Index of a coordinate name such as "e1.b" or "i0"; throws ConfigError.
  static std::size_t coordinate_index(const std::string& name);

  /// Empty when amplitudes >= 0, centers in [0,1], widths > 0 and i0 >= 0.
  std::vector<std::string> violations() const;
};

void to_json(nlohmann::json& j, const SourceConfig& src);
void from_json(const nlohmann::json& j, SourceConfig& src);
SourceConfig load_source(const std::string& path);

/// Constant background densities used for r, h, c, d (and i when no source gives it).
struct Background {
  double r = 0.0, h = 0.0, c = 0.0, d = 0.0;
};

/// s and e from the cap sums, i = i0, r/h/c/d from the background.
StateField eval_initial_field(const SourceConfig& src, int nx, const Background& fixed);

/// The reference initial condition: a quadratic-exponent bump plus five quartic caps for s,
/// one cap for e; i0 and the background are taken from the caller.
StateField reference_initial_field(int nx, double i0, const Background& fixed);

/// Daily counts. D is cumulative; I, C, H, R are prevalences.
struct ObservationSeries {
  std::vector<int> days;
  std::vector<double> I, C, D;
  std::vector<double> H, R;  // empty when not observed

  std::size_t size() const { return days.size(); }
  bool has_hr() const { return !H.empty(); }
  /// Throws ConfigError if lengths differ, values are negative or days not increasing.
  void validate() const;
  double sum_of_squares() const;  // sum over I, C, D of the squared values
};

ObservationSeries read_observations_csv(const std::string& path);
void write_observations_csv(std::ostream& out, const ObservationSeries& series,
                            bool include_hr = true);

/// I_k = N * trapezoid(i(., t_k)), likewise for C, D, H, R.
/// Throws NumericalError naming the first missing day.
ObservationSeries extract_observables(const Trajectory& traj, const ModelParams& p,
                                      const std::vector<int>& days);

/// Forward problem used by the misfit functional and synthetic data.
struct ForwardScenario {
  ModelParams params;
  GridSpec grid;
  Background background;
};

/// Runs solve_fdm from eval_initial_field(q) and extracts observables at `days`.
ObservationSeries forward_observables(const SourceConfig& q, const ForwardScenario& scenario,
                                      const std::vector<int>& days);

/// Quadratic misfit over I, C, D. Empty data gives 0 without running the solver.
double misfit(const ObservationSeries& model, const ObservationSeries& data);
double misfit(const SourceConfig& q, const ObservationSeries& data, const ForwardScenario& scenario);

/// Forward run plus multiplicative noise (1 + noise_rel * xi), xi ~ N(0,1), clipped at 0.
ObservationSeries synthesize_data(const SourceConfig& q_true, const ForwardScenario& scenario,
                                  const std::vector<int>& days, double noise_rel,
                                  std::uint64_t seed);
/// Applies the same noise model to an existing series.
ObservationSeries add_noise(const ObservationSeries& clean, double noise_rel, std::uint64_t seed);

}  // namespace seirhcd
