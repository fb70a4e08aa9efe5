#pragma once

#include "seirhcd/fdm.hpp"
#include "seirhcd/model.hpp"
#include "seirhcd/observations.hpp"
#include "seirhcd/sampling.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace seirhcd {

/// Forward model behind the sensitivity and emulator pipelines. A parameter row assigns values
/// to named inputs: any ModelParams field (alpha_i, ..., v_r) or a source coordinate
/// (s1.a, ..., e3.c, i0). Unnamed inputs keep the base values.
struct AnalysisScenario {
  ModelParams params;
  Background background;
  double i0 = 0.0;
  std::optional<SourceConfig> source;  // reference initial field when absent
  int nx = 32;
  double T = 200.0;
  double safety = 0.8;
  long max_steps = 4'000'000;
};

/// Intersects a sampling box with the model domain: fractions (beta, eps_hc, mu) to [0, 1], other
/// model parameters to [0, inf). Returns one note per changed parameter; throws ConfigError
/// when nothing of a range remains.
std::vector<std::string> clip_to_model_domain(ParameterBounds& bounds);

/// True for the 14 model-parameter names.
bool is_model_parameter(const std::string& name);

/// Applies a named row to copies of the base parameters / source. Throws ConfigError for an
/// unknown name.
ModelParams apply_row(const AnalysisScenario& scenario, const std::vector<std::string>& names,
                      std::span<const double> row, std::optional<SourceConfig>* source_out);

/// Adaptive forward run of one row. `refine` divides the step (used for retries).
Trajectory simulate_row(const AnalysisScenario& scenario, const std::vector<std::string>& names,
                        std::span<const double> row, double refine = 1.0);

/// Observables for one row at the given days.
ObservationSeries observe_row(const AnalysisScenario& scenario,
                              const std::vector<std::string>& names, std::span<const double> row,
                              const std::vector<int>& days, double refine = 1.0);

/// Picks one observable series (I, C, D, H or R).
const std::vector<double>& select_observable(const ObservationSeries& obs, Compartment c);

}  // namespace seirhcd
