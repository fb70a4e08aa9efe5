#include "seirhcd/analysis.hpp"

#include "seirhcd/error.hpp"

#include <algorithm>
#include <array>
#include <fmt/format.h>

namespace seirhcd {

namespace {

constexpr std::array<const char*, 14> kModelNames = {
    "alpha_i", "alpha_e", "t_inc", "t_inf", "beta", "eps_hc", "t_hosp",
    "t_imm",   "mu",      "t_crit", "v_s",  "v_e",  "v_i",    "v_r"};

void set_model_parameter(ModelParams& p, const std::string& name, double value)
{
  if (name == "alpha_i") p.alpha_i = value;
  else if (name == "alpha_e") p.alpha_e = value;
  else if (name == "t_inc") p.t_inc = value;
  else if (name == "t_inf") p.t_inf = value;
  else if (name == "beta") p.beta = BetaSeries(value);
  else if (name == "eps_hc") p.eps_hc = value;
  else if (name == "t_hosp") p.t_hosp = value;
  else if (name == "t_imm") p.t_imm = value;
  else if (name == "mu") p.mu = value;
  else if (name == "t_crit") p.t_crit = value;
  else if (name == "v_s") p.v_s = value;
  else if (name == "v_e") p.v_e = value;
  else if (name == "v_i") p.v_i = value;
  else if (name == "v_r") p.v_r = value;
  else throw ConfigError("unknown model parameter '" + name + "'");
}

}  // namespace

std::vector<std::string> clip_to_model_domain(ParameterBounds& bounds)
{
  std::vector<std::string> notes;
  for (std::size_t k = 0; k < bounds.size(); ++k) {
    const auto& n = bounds.names[k];
    double lo = bounds.lo[k], hi = bounds.hi[k];
    if (n == "beta" || n == "eps_hc" || n == "mu") {
      lo = std::max(lo, 0.0);
      hi = std::min(hi, 1.0);
    }
    else if (is_model_parameter(n)) {
      lo = std::max(lo, 0.0);
    }
    if (lo == bounds.lo[k] && hi == bounds.hi[k]) continue;
    if (!(lo < hi))
      throw ConfigError(fmt::format("bounds of '{}' [{}, {}] lie outside the model domain", n,
                                    bounds.lo[k], bounds.hi[k]));
    notes.push_back(fmt::format("{}: [{}, {}] clipped to [{}, {}]", n, bounds.lo[k], bounds.hi[k], lo, hi));
    bounds.lo[k] = lo;
    bounds.hi[k] = hi;
  }
  return notes;
}

bool is_model_parameter(const std::string& name)
{
  return std::find(kModelNames.begin(), kModelNames.end(), name) != kModelNames.end();
}

ModelParams apply_row(const AnalysisScenario& scenario, const std::vector<std::string>& names,
                      std::span<const double> row, std::optional<SourceConfig>* source_out)
{
  if (names.size() != row.size()) throw ConfigError("parameter row length does not match names");
  ModelParams p = scenario.params;
  std::optional<SourceConfig> source = scenario.source;
  for (std::size_t n = 0; n < names.size(); ++n) {
    if (is_model_parameter(names[n])) {
      set_model_parameter(p, names[n], row[n]);
      continue;
    }
    const std::size_t idx = SourceConfig::coordinate_index(names[n]);
    if (!source) {
      throw ConfigError("source coordinate '" + names[n] +
                        "' needs a source configuration in the scenario");
    }
    auto q = source->to_vector();
    q[idx] = row[n];
    *source = SourceConfig::from_vector(q);
  }
  if (source_out) *source_out = source;
  return p;
}

Trajectory simulate_row(const AnalysisScenario& scenario, const std::vector<std::string>& names,
                        std::span<const double> row, double refine)
{
  std::optional<SourceConfig> source;
  const ModelParams p = apply_row(scenario, names, row, &source);
  if (auto v = validate_params(p); !v.empty())
    throw NumericalError("invalid parameter row: " + v.front().message);
  const StateField init = source ? eval_initial_field(*source, scenario.nx, scenario.background)
                                 : reference_initial_field(scenario.nx, scenario.i0,
                                                           scenario.background);
  AdaptiveFdmOptions opt;
  opt.nx = scenario.nx;
  opt.T = scenario.T;
  opt.safety = scenario.safety / refine;
  opt.max_steps = static_cast<long>(scenario.max_steps * refine);
  return solve_fdm_adaptive(p, init, opt);
}

ObservationSeries observe_row(const AnalysisScenario& scenario,
                              const std::vector<std::string>& names, std::span<const double> row,
                              const std::vector<int>& days, double refine)
{
  std::optional<SourceConfig> source;
  const ModelParams p = apply_row(scenario, names, row, &source);
  return extract_observables(simulate_row(scenario, names, row, refine), p, days);
}

const std::vector<double>& select_observable(const ObservationSeries& obs, Compartment c)
{
  switch (c) {
  case Compartment::I: return obs.I;
  case Compartment::C: return obs.C;
  case Compartment::D: return obs.D;
  case Compartment::H: return obs.H;
  case Compartment::R: return obs.R;
  default:
    throw ConfigError(fmt::format("compartment {} is not an observable (use I, C, D, H or R)",
                                  name(c)));
  }
}

}  // namespace seirhcd
