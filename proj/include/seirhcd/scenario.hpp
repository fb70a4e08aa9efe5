#pragma once

#include "seirhcd/model.hpp"
#include "seirhcd/observations.hpp"
#include "seirhcd/sampling.hpp"
#include "seirhcd/tt_optimizer.hpp"

#include <optional>
#include <string>
#include <vector>

namespace seirhcd {

struct SensitivitySection {
  std::optional<std::string> bounds;  // bounds file; the built-in wide box when absent
  std::size_t n = 512;
  std::vector<int> days = {40, 80, 120, 160, 200};
  Compartment output = Compartment::I;
  int nx = 32;
  std::size_t bootstrap = 200;
  double level = 0.95;
};

struct EmulatorSection {
  std::optional<std::string> bounds;
  std::size_t design_points = 250;
  std::size_t candidates = 50000;
  double threshold = 3.0;
  std::vector<Compartment> observables = {Compartment::H, Compartment::R, Compartment::D};
  std::vector<int> days;              // default: the final day
  double obs_rel_sd = 0.1;            // var_obs = (obs_rel_sd * z)^2
  int degree = 1;
  int restarts = 5;
  std::optional<std::string> data;    // observation CSV; synthetic at the scenario parameters when absent
  int nx = 32;
};

struct SynthSection {
  std::optional<std::string> source;  // reference initial field when absent
  std::vector<int> days;              // default 1..T
  double noise = 0.0;
};

struct InversionSection {
  std::optional<std::string> data;
  std::optional<std::string> source;  // values of the frozen coordinates
  std::optional<std::string> refined_bounds;
  ParameterBounds bounds;             // search box of the free coordinates, in listed order
  TTConfig tt;                        // b_min/b_max filled from `bounds`
};

/// One configuration file (TOML or JSON) describing the forward model and every pipeline.
/// Relative file paths inside it are resolved against the file's directory.
struct Scenario {
  std::string path;
  ModelParams params;
  GridSpec grid;
  Background background;
  double i0 = 0.0;
  std::optional<SourceConfig> source;  // initial field from caps; reference profile when absent
  std::string solver = "fdm";
  bool clamp = true;

  SensitivitySection sensitivity;
  EmulatorSection emulator;
  SynthSection synth;
  std::optional<InversionSection> inversion;

  std::vector<std::string> inputs;  // every file read, for the manifest

  StateField initial_field() const;
  ForwardScenario forward() const;
};

/// Parses by extension (.toml or .json). Unknown keys, missing required fields and invalid
/// values raise ConfigError as "path:line: section.key: message".
Scenario load_scenario(const std::string& path);
Scenario parse_scenario(const std::string& text, const std::string& origin, bool json);

}  // namespace seirhcd
