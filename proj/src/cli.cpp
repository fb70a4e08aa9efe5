#include "seirhcd/cli.hpp"

#include "seirhcd/analysis.hpp"
#include "seirhcd/emulator.hpp"
#include "seirhcd/error.hpp"
#include "seirhcd/fem.hpp"
#include "seirhcd/parallel.hpp"
#include "seirhcd/scenario.hpp"
#include "seirhcd/sobol.hpp"
#include "seirhcd/tt_optimizer.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <filesystem>
#include <fmt/format.h>
#include <fstream>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>
#include <random>
#include <sstream>

namespace seirhcd {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

std::string sha256_file(const std::string& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read '" + path + "' for hashing");
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 14];
  while (in.read(buf, sizeof buf) || in.gcount() > 0)
    EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", md[i]);
  return hex;
}

namespace {

struct Common {
  std::string config;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  std::string output_dir;
};

/// Records inputs, outputs and warnings of one run and writes manifest.json last.
class Run {
public:
  Run(std::string subcommand, const Common& common, const std::vector<std::string>& args)
      : subcommand_(std::move(subcommand)), common_(common), args_(args),
        start_(std::chrono::steady_clock::now()), seeds_(common.seed)
  {
    fs::create_directories(common_.output_dir);
  }

  /// Sub-seeds drawn in a fixed order from the single run generator.
  std::uint64_t next_seed() { return seeds_(); }

  void input(const std::string& path) { inputs_.push_back(path); }
  void warn(const std::string& msg, std::ostream& err)
  {
    warnings_.push_back(msg);
    err << "warning: " << msg << "\n";
  }
  void note(const std::string& key, ojson value) { notes_[key] = std::move(value); }

  std::ofstream open(const std::string& name)
  {
    const fs::path p = fs::path(common_.output_dir) / name;
    std::ofstream f(p);
    if (!f) throw ConfigError("cannot write '" + p.string() + "'");
    outputs_.push_back(name);
    return f;
  }
  void write(const std::string& name, const std::string& text) { open(name) << text; }

  void finish(int status)
  {
    ojson m;
    m["subcommand"] = subcommand_;
    m["config"] = common_.config;
    m["seed"] = common_.seed;
    m["workers"] = common_.workers;
    m["output_dir"] = common_.output_dir;
    m["tool_version"] = kToolVersion;
    m["arguments"] = args_;
    m["exit_code"] = status;
    m["wall_clock_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    ojson digests = ojson::object();
    for (const auto& p : inputs_)
      if (!digests.contains(p)) digests[p] = sha256_file(p);
    m["input_digests"] = digests;
    m["outputs"] = outputs_;
    m["warnings"] = warnings_;
    m["notes"] = notes_;
    std::ofstream f(fs::path(common_.output_dir) / "manifest.json");
    f << m.dump(2) << "\n";
  }

private:
  std::string subcommand_;
  Common common_;
  std::vector<std::string> args_;
  std::chrono::steady_clock::time_point start_;
  std::mt19937_64 seeds_;
  std::vector<std::string> inputs_, outputs_, warnings_;
  ojson notes_ = ojson::object();
};

/// "K" means days 1..K; otherwise a comma-separated list.
std::vector<int> parse_days(const std::string& text)
{
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  try {
    while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
  }
  catch (const std::exception&) {
    throw ConfigError("--days: expected K or a comma-separated list of days, got '" + text + "'");
  }
  if (out.size() == 1 && text.find(',') == std::string::npos) {
    const int k = out.front();
    if (k < 1) throw ConfigError("--days: K must be >= 1");
    out.clear();
    for (int d = 1; d <= k; ++d) out.push_back(d);
  }
  for (std::size_t i = 0; i < out.size(); ++i)
    if (out[i] < 0 || (i > 0 && out[i] <= out[i - 1]))
      throw ConfigError("--days: days must be >= 0 and increasing");
  return out;
}

Compartment parse_observable(const std::string& s)
{
  if (s != "I" && s != "C" && s != "D" && s != "H" && s != "R")
    throw ConfigError("--output: '" + s + "' is not an observable (use I, C, D, H or R)");
  return parse_compartment(s);
}

std::vector<double> model_values(const ModelParams& p, const std::vector<std::string>& names,
                                 const std::optional<SourceConfig>& src)
{
  std::vector<double> out;
  for (const auto& n : names) {
    if (n == "alpha_i") out.push_back(p.alpha_i);
    else if (n == "alpha_e") out.push_back(p.alpha_e);
    else if (n == "t_inc") out.push_back(p.t_inc);
    else if (n == "t_inf") out.push_back(p.t_inf);
    else if (n == "beta") out.push_back(p.beta(0.0));
    else if (n == "eps_hc") out.push_back(p.eps_hc);
    else if (n == "t_hosp") out.push_back(p.t_hosp);
    else if (n == "t_imm") out.push_back(p.t_imm);
    else if (n == "mu") out.push_back(p.mu);
    else if (n == "t_crit") out.push_back(p.t_crit);
    else if (n == "v_s") out.push_back(p.v_s);
    else if (n == "v_e") out.push_back(p.v_e);
    else if (n == "v_i") out.push_back(p.v_i);
    else if (n == "v_r") out.push_back(p.v_r);
    else {
      if (!src) throw ConfigError("source coordinate '" + n + "' needs a source in [initial]");
      out.push_back(src->to_vector()[SourceConfig::coordinate_index(n)]);
    }
  }
  return out;
}

AnalysisScenario analysis_scenario(const Scenario& s, int nx)
{
  AnalysisScenario a;
  a.params = s.params;
  a.background = s.background;
  a.i0 = s.i0;
  a.source = s.source;
  a.nx = nx;
  a.T = s.grid.T;
  return a;
}

ParameterBounds pipeline_bounds(const std::optional<std::string>& path, Run& run, std::ostream& err)
{
  ParameterBounds b = ParameterBounds::defaults();
  if (path) {
    b = load_bounds_json(*path);
    run.input(*path);
  }
  const auto notes = clip_to_model_domain(b);
  for (const auto& n : notes) run.warn("bounds outside the model domain: " + n, err);
  run.note("bounds", nlohmann::ordered_json::parse(bounds_to_json(b)));
  return b;
}

// ---------------------------------------------------------------------------------------------

int cmd_simulate(const Scenario& sc, Run& run, const std::optional<std::vector<int>>& days_opt,
                 std::ostream& out)
{
  Trajectory traj;
  if (sc.solver == "fem") {
    traj = solve_fem(sc.params, sc.initial_field(), sc.grid);
  }
  else {
    FdmOptions opt;
    opt.clamp = sc.clamp;
    traj = solve_fdm(sc.params, sc.initial_field(), sc.grid, opt).trajectory;
  }
  {
    auto f = run.open("trajectory.csv");
    write_trajectory_csv(f, traj, sc.solver);
  }
  std::vector<int> days;
  if (days_opt) days = *days_opt;
  else
    for (int d = 0; d <= static_cast<int>(sc.grid.T); ++d) days.push_back(d);
  const ObservationSeries obs = extract_observables(traj, sc.params, days);
  {
    auto f = run.open("observables.csv");
    write_observations_csv(f, obs);
  }

  std::size_t peak = 0;
  for (std::size_t k = 1; k < obs.size(); ++k)
    if (obs.I[k] > obs.I[peak]) peak = k;
  ojson summary;
  summary["solver"] = sc.solver;
  summary["grid"] = {{"nx", sc.grid.nx}, {"nt", sc.grid.nt}, {"T", sc.grid.T}};
  summary["clamp_count"] = traj.clamp_count;
  summary["peak_day"] = obs.days[peak];
  summary["peak_I"] = obs.I[peak];
  summary["final_day"] = obs.days.back();
  summary["final"] = {{"I", obs.I.back()}, {"C", obs.C.back()}, {"D", obs.D.back()},
                      {"H", obs.H.back()}, {"R", obs.R.back()}};
  summary["decay_from_peak"] = obs.I[peak] > 0 ? 1.0 - obs.I.back() / obs.I[peak] : 0.0;
  run.write("summary.json", summary.dump(2) + "\n");
  out << fmt::format("{}: peak I = {:.6g} on day {}; I(day {}) = {:.6g}\n", sc.solver, obs.I[peak],
                     obs.days[peak], obs.days.back(), obs.I.back());
  return kExitOk;
}

int cmd_sensitivity(const Scenario& sc, Run& run, const Common& common,
                    const std::optional<std::string>& bounds_path, std::optional<std::size_t> n,
                    const std::optional<std::string>& output,
                    const std::optional<std::vector<int>>& days, std::ostream& out, std::ostream& err)
{
  const auto& cfg = sc.sensitivity;
  const ParameterBounds bounds = pipeline_bounds(bounds_path ? bounds_path : cfg.bounds, run, err);
  TimesliceOptions opt;
  opt.n = n.value_or(cfg.n);
  if (opt.n < 2) throw ConfigError("--n must be >= 2");
  if ((opt.n & (opt.n - 1)) != 0)
    run.warn(fmt::format("N = {} is not a power of two; Sobol balance properties are lost", opt.n), err);
  opt.days = days.value_or(cfg.days);
  opt.output = output ? parse_observable(*output) : cfg.output;
  opt.seed = run.next_seed();
  opt.workers = common.workers;
  opt.bootstrap.resamples = cfg.bootstrap;
  opt.bootstrap.level = cfg.level;
  opt.bootstrap.seed = run.next_seed();

  const TimesliceReport rep = analyze_timeslices(bounds, analysis_scenario(sc, cfg.nx), opt);
  {
    auto f = run.open("indices.csv");
    write_indices_csv(f, rep.results);
  }
  {
    auto f = run.open("indices.svg");
    write_indices_svg(f, rep.results);
  }
  run.note("output", name(opt.output));
  run.note("n", opt.n);
  run.note("model_runs", opt.n * (bounds.size() + 2));
  run.note("failed_rows", rep.failed_rows);
  run.note("retried_rows", rep.retried_rows);
  run.note("dropped_samples", rep.dropped_samples);
  for (const auto& r : rep.results) {
    std::size_t top = 0;
    for (std::size_t i = 1; i < r.S.size(); ++i)
      if (r.S[i] > r.S[top]) top = i;
    out << fmt::format("day {:>4}: largest S = {} ({:.3f})\n", r.day, r.names[top], r.S[top]);
  }
  return kExitOk;
}

struct EmulateOverrides {
  std::optional<std::string> bounds, data;
  std::optional<double> threshold;
  std::optional<std::size_t> candidates, design_points;
  std::optional<std::vector<int>> days;
};

int cmd_emulate(const Scenario& sc, Run& run, const Common& common, const EmulateOverrides& ov,
                std::ostream& out, std::ostream& err)
{
  const auto& cfg = sc.emulator;
  const ParameterBounds bounds = pipeline_bounds(ov.bounds ? ov.bounds : cfg.bounds, run, err);
  const std::vector<int> days = ov.days.value_or(cfg.days);
  const double threshold = ov.threshold.value_or(cfg.threshold);
  if (!(threshold > 0.0)) throw ConfigError("--threshold must be > 0");
  const std::size_t n_design = ov.design_points.value_or(cfg.design_points);
  const std::size_t n_cand = ov.candidates.value_or(cfg.candidates);
  const AnalysisScenario analysis = analysis_scenario(sc, cfg.nx);

  // Observations: a file, or a synthetic run at the scenario's own parameter values.
  ObservationSeries z;
  std::optional<std::vector<double>> truth;
  if (auto data = ov.data ? ov.data : cfg.data) {
    run.input(*data);
    const ObservationSeries all = read_observations_csv(*data);
    for (int d : days) {
      auto it = std::find(all.days.begin(), all.days.end(), d);
      if (it == all.days.end()) throw ConfigError(fmt::format("{}: no row for day {}", *data, d));
      const auto k = static_cast<std::size_t>(it - all.days.begin());
      z.days.push_back(d);
      z.I.push_back(all.I[k]);
      z.C.push_back(all.C[k]);
      z.D.push_back(all.D[k]);
      if (all.has_hr()) {
        z.H.push_back(all.H[k]);
        z.R.push_back(all.R[k]);
      }
    }
    for (Compartment c : cfg.observables)
      if ((c == Compartment::H || c == Compartment::R) && !z.has_hr())
        throw ConfigError(fmt::format("{}: observable {} needs H and R columns", *data, name(c)));
  }
  else {
    truth = model_values(sc.params, bounds.names, sc.source);
    z = observe_row(analysis, bounds.names, *truth, days);
    run.note("synthetic_truth", *truth);
  }

  const LhcDesign design = lhc_sample(bounds, n_design, run.next_seed());
  std::vector<std::optional<ObservationSeries>> runs(n_design);
  parallel_for(n_design, common.workers, [&](std::size_t i) {
    const Eigen::VectorXd q = design.points.row(static_cast<Eigen::Index>(i)).transpose();
    const std::span<const double> row(q.data(), static_cast<std::size_t>(q.size()));
    try {
      runs[i] = observe_row(analysis, bounds.names, row, days);
    }
    catch (const NumericalError&) {
      try {
        runs[i] = observe_row(analysis, bounds.names, row, days, 2.0);
      }
      catch (const NumericalError&) {
      }
    }
  });
  LhcDesign used{bounds, {}, design.seed};
  std::vector<std::size_t> ok;
  for (std::size_t i = 0; i < n_design; ++i)
    if (runs[i]) ok.push_back(i);
  if (ok.size() < n_design)
    run.warn(fmt::format("{} of {} design runs failed and were left out", n_design - ok.size(), n_design), err);
  if (ok.size() < 2) throw NumericalError("emulate: fewer than two design runs succeeded");
  used.points.resize(static_cast<Eigen::Index>(ok.size()), static_cast<Eigen::Index>(bounds.size()));
  for (std::size_t r = 0; r < ok.size(); ++r)
    used.points.row(static_cast<Eigen::Index>(r)) = design.points.row(static_cast<Eigen::Index>(ok[r]));

  {
    auto f = run.open("design.csv");
    f << fmt::format("{}", fmt::join(bounds.names, ","));
    for (Compartment c : cfg.observables)
      for (int d : days) f << fmt::format(",{}_{}", name(c), d);
    f << "\n";
    for (std::size_t r = 0; r < ok.size(); ++r) {
      for (std::size_t k = 0; k < bounds.size(); ++k)
        f << (k ? "," : "") << fmt::format("{:.17g}", used.points(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)));
      for (Compartment c : cfg.observables)
        for (double v : select_observable(*runs[ok[r]], c)) f << fmt::format(",{:.17g}", v);
      f << "\n";
    }
  }

  EmulatorFitOptions fit;
  fit.degree = cfg.degree;
  fit.restarts = cfg.restarts;
  std::vector<HistoryTarget> targets;
  ojson emulators = ojson::array();
  for (Compartment c : cfg.observables) {
    HistoryTarget t;
    t.name = name(c);
    for (std::size_t d = 0; d < days.size(); ++d) {
      Eigen::VectorXd y(static_cast<Eigen::Index>(ok.size()));
      for (std::size_t r = 0; r < ok.size(); ++r) y[static_cast<Eigen::Index>(r)] = select_observable(*runs[ok[r]], c)[d];
      fit.seed = run.next_seed();
      EmulatorModel m = fit_emulator(used, y, fit);
      for (const auto& w : m.warnings) run.warn(fmt::format("{} day {}: {}", t.name, days[d], w), err);
      const Eigen::VectorXd loo = loo_standardized_errors(m);
      const auto within = (loo.array().abs() <= 3.0).count();
      const double zv = select_observable(z, c)[d];
      ojson e;
      e["observable"] = t.name;
      e["day"] = days[d];
      e["z"] = zv;
      e["degree"] = m.degree;
      e["beta"] = std::vector<double>(m.beta.data(), m.beta.data() + m.beta.size());
      e["sigma2"] = m.sigma2;
      e["delta"] = std::vector<double>(m.delta.data(), m.delta.data() + m.delta.size());
      e["log_likelihood"] = m.log_likelihood;
      e["loo_within_3"] = static_cast<double>(within) / static_cast<double>(loo.size());
      if (truth) {
        const Prediction p = predict(m, Eigen::Map<const Eigen::VectorXd>(truth->data(), static_cast<Eigen::Index>(truth->size())));
        e["truth_prediction"] = {{"mean", p.mean}, {"variance", p.variance}};
        e["truth_implausibility"] = implausibility(p, zv, std::pow(cfg.obs_rel_sd * zv, 2));
      }
      emulators.push_back(e);
      t.models.push_back(std::move(m));
      t.z.push_back(zv);
      t.var_obs.push_back(std::pow(cfg.obs_rel_sd * zv, 2));
    }
    targets.push_back(std::move(t));
  }
  run.write("emulators.json", emulators.dump(2) + "\n");

  const PlausibleSpace space = history_match(targets, bounds, n_cand, threshold, run.next_seed(), common.workers);
  ojson diag;
  diag["threshold"] = threshold;
  diag["candidates"] = n_cand;
  diag["accepted"] = space.accepted.rows();
  for (std::size_t t = 0; t < targets.size(); ++t) {
    diag["targets"][targets[t].name] = {{"accepted", space.accepted_per_target[t]},
                                        {"min_implausibility", space.min_implausibility[t]},
                                        {"max_implausibility", space.max_implausibility[t]}};
  }
  run.write("diagnostics.json", diag.dump(2) + "\n");
  {
    auto f = run.open("accepted.csv");
    write_accepted_csv(f, space);
  }
  if (space.empty()) {
    err << fmt::format("empty plausible space: none of {} candidates has I < {} for every observable\n",
                       n_cand, threshold);
    for (std::size_t t = 0; t < targets.size(); ++t)
      err << fmt::format("  {}: min I = {:.4g}, max I = {:.4g}, accepted alone = {}\n", targets[t].name,
                         space.min_implausibility[t], space.max_implausibility[t],
                         space.accepted_per_target[t]);
    return kExitEmptySpace;
  }
  run.write("quantiles.json", quantiles_json(space) + "\n");
  {
    auto f = run.open("boxplot.csv");
    write_boxplot_csv(f, space);
  }
  run.write("refined_bounds.json", bounds_to_json(space.refined_bounds()) + "\n");
  out << fmt::format("accepted {} of {} candidates (threshold {})\n", space.accepted.rows(), n_cand,
                     threshold);
  return kExitOk;
}

int cmd_synth(const Scenario& sc, Run& run, const std::optional<std::string>& source_path,
              const std::optional<std::vector<int>>& days_opt, std::optional<double> noise_opt,
              std::ostream& out)
{
  const auto& cfg = sc.synth;
  std::optional<SourceConfig> src = sc.source;
  if (auto p = source_path ? source_path : cfg.source) {
    src = load_source(*p);
    run.input(*p);
  }
  const std::vector<int> days = days_opt.value_or(cfg.days);
  const double noise = noise_opt.value_or(cfg.noise);
  if (noise < 0.0) throw ConfigError("--noise must be >= 0");
  const std::uint64_t seed = run.next_seed();

  ObservationSeries obs;
  if (src) {
    obs = synthesize_data(*src, sc.forward(), days, noise, seed);
  }
  else {
    const StateField init = reference_initial_field(sc.grid.nx, sc.i0, sc.background);
    FdmOptions opt;
    opt.clamp = sc.clamp;
    obs = add_noise(extract_observables(solve_fdm(sc.params, init, sc.grid, opt).trajectory, sc.params, days),
                    noise, seed);
  }
  {
    auto f = run.open("observations.csv");
    write_observations_csv(f, obs);
  }
  run.note("noise", noise);
  run.note("days", days.size());
  run.note("sum_of_squares", obs.sum_of_squares());
  out << fmt::format("wrote {} days (noise {})\n", obs.size(), noise);
  return kExitOk;
}

int cmd_invert(const Scenario& sc, Run& run, const Common& common,
               const std::optional<std::string>& data_opt, const std::optional<std::string>& refined_opt,
               const std::optional<std::string>& tt_path, std::ostream& out, std::ostream& err)
{
  if (!sc.inversion) throw ConfigError(sc.path + ": missing required section [inversion]");
  const InversionSection& inv = *sc.inversion;
  const auto data_path = data_opt ? data_opt : inv.data;
  if (!data_path) throw ConfigError("invert: no observations (set inversion.data or --data)");
  run.input(*data_path);
  const ObservationSeries data = read_observations_csv(*data_path);

  SourceConfig base;
  if (inv.source) {
    base = load_source(*inv.source);
    run.input(*inv.source);
  }
  else if (sc.source) {
    base = *sc.source;
  }
  else {
    throw ConfigError("invert: frozen coordinates need a source (inversion.source or initial.source)");
  }

  TTConfig tt = inv.tt;
  if (tt_path) {
    std::ifstream f(*tt_path);
    if (!f) throw ConfigError("cannot open TT config '" + *tt_path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    TTConfig from = tt_config_from_json(ss.str(), *tt_path);
    run.input(*tt_path);
    if (from.b_min.empty()) {
      from.b_min = tt.b_min;
      from.b_max = tt.b_max;
    }
    tt = from;
  }
  if (tt.b_min.size() != inv.bounds.size())
    throw ConfigError(fmt::format("invert: TT bounds have {} dimensions, inversion.bounds names {}",
                                  tt.b_min.size(), inv.bounds.size()));

  if (auto refined = refined_opt ? refined_opt : inv.refined_bounds) {
    const ParameterBounds rb = load_bounds_json(*refined);
    run.input(*refined);
    for (std::size_t k = 0; k < inv.bounds.size(); ++k) {
      const std::size_t j = rb.find(inv.bounds.names[k]);
      if (j == rb.size()) continue;
      const double lo = std::max(tt.b_min[k], rb.lo[j]), hi = std::min(tt.b_max[k], rb.hi[j]);
      if (!(lo < hi))
        throw ConfigError(fmt::format("refined bounds of '{}' do not overlap the search box", inv.bounds.names[k]));
      tt.b_min[k] = lo;
      tt.b_max[k] = hi;
    }
  }
  tt.seed = run.next_seed();
  tt.workers = common.workers;
  run.write("tt_config.json", tt_config_to_json(tt) + "\n");

  std::vector<std::size_t> index;
  for (const auto& n : inv.bounds.names) index.push_back(SourceConfig::coordinate_index(n));
  const ForwardScenario fwd = sc.forward();
  auto assemble = [&](std::span<const double> q) {
    auto v = base.to_vector();
    for (std::size_t k = 0; k < index.size(); ++k) v[index[k]] = q[k];
    return SourceConfig::from_vector(v);
  };
  const TTResult res = tt_optimize([&](std::span<const double> q) { return misfit(assemble(q), data, fwd); }, tt);
  for (const auto& f : res.failures) run.warn("discarded candidate " + f, err);

  {
    auto f = run.open("tt_log.csv");
    write_tt_log_csv(f, res);
  }
  const SourceConfig best = assemble(res.q_best);
  run.write("source_best.json", nlohmann::json(best).dump(2) + "\n");

  const ObservationSeries model = forward_observables(best, fwd, data.days);
  {
    auto f = run.open("fit.csv");
    f << "day,I_obs,I_model,C_obs,C_model,D_obs,D_model\n";
    for (std::size_t k = 0; k < data.size(); ++k)
      f << fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n", data.days[k], data.I[k],
                       model.I[k], data.C[k], model.C[k], data.D[k], model.D[k]);
  }
  ojson result;
  ojson free = ojson::object(), cell = ojson::object();
  for (std::size_t k = 0; k < index.size(); ++k) {
    free[inv.bounds.names[k]] = res.q_best[k];
    cell[inv.bounds.names[k]] = res.cell[k];
  }
  result["free"] = free;
  result["grid_cell"] = cell;
  result["J_best"] = res.J_best;
  result["data_sum_of_squares"] = data.sum_of_squares();
  result["evaluations"] = res.evaluations;
  result["budget"] = tt.budget();
  result["sweeps_done"] = res.sweeps_done;
  result["stop_reason"] = res.stop_reason;
  result["discarded_candidates"] = res.failures.size();
  run.write("result.json", result.dump(2) + "\n");
  out << fmt::format("J_best = {:.6g} after {} evaluations ({} sweeps, stopped by {})\n", res.J_best,
                     res.evaluations, res.sweeps_done, res.stop_reason);
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
  CLI::App app{"Spatial SEIR-HCD epidemic model: simulation, identifiability and source recovery"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  Common common;
  std::optional<std::string> solver, bounds, output, data, source, refined, tt_config, days_text;
  std::optional<std::size_t> n, candidates, design_points;
  std::optional<double> threshold, noise;

  auto add_common = [&](CLI::App* sub, const std::string& default_dir) {
    sub->add_option("--config", common.config, "scenario file (.toml or .json)")->required();
    sub->add_option("--seed", common.seed, "seed of the run's random generator");
    sub->add_option("--workers", common.workers, "worker threads")->check(CLI::PositiveNumber);
    common.output_dir = default_dir;
    sub->add_option("--output-dir", common.output_dir, "directory for the outputs and manifest.json");
    sub->add_option("--days", days_text, "K (days 1..K) or a comma-separated list");
  };

  CLI::App* sim = app.add_subcommand("simulate", "forward run: trajectory, observables, summary");
  add_common(sim, "results/simulate");
  sim->add_option("--solver", solver, "fdm or fem")->check(CLI::IsMember({"fdm", "fem"}));

  CLI::App* sens = app.add_subcommand("sensitivity", "first-order Sobol indices per day");
  add_common(sens, "results/sensitivity");
  sens->add_option("--bounds", bounds, "bounds JSON {name: [lo, hi]}");
  sens->add_option("--n", n, "base sample count N (N*(k+2) model runs)");
  sens->add_option("--output", output, "observable: I, C, D, H or R");

  CLI::App* emu = app.add_subcommand("emulate", "GP emulators and history matching");
  add_common(emu, "results/emulate");
  emu->add_option("--bounds", bounds, "bounds JSON {name: [lo, hi]}");
  emu->add_option("--data", data, "observation CSV (synthetic at the scenario values when absent)");
  emu->add_option("--threshold", threshold, "implausibility cut");
  emu->add_option("--candidates", candidates, "uniform candidates to test");
  emu->add_option("--design-points", design_points, "Latin hypercube size");

  CLI::App* syn = app.add_subcommand("synth", "synthetic observation series");
  add_common(syn, "results/synth");
  syn->add_option("--source", source, "source JSON");
  syn->add_option("--noise", noise, "relative noise level");

  CLI::App* inv = app.add_subcommand("invert", "source recovery with the TT optimizer");
  add_common(inv, "results/invert");
  inv->add_option("--data", data, "observation CSV");
  inv->add_option("--refined-bounds", refined, "bounds JSON from emulate, intersected with the search box");
  inv->add_option("--tt-config", tt_config, "TT optimizer settings (JSON)");

  std::vector<char*> argv;
  std::vector<std::string> copy = args;
  if (copy.empty()) copy.push_back("seirhcd");
  for (auto& a : copy) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  }
  catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  }
  catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitConfig;
  }

  CLI::App* chosen = app.get_subcommands().front();
  const std::string sub = chosen->get_name();
  std::optional<Run> run;
  try {
    std::optional<std::vector<int>> days;
    if (days_text) days = parse_days(*days_text);
    const Scenario sc = [&] {
      Scenario s = load_scenario(common.config);
      if (solver) s.solver = *solver;
      return s;
    }();
    run.emplace(sub, common, std::vector<std::string>(copy.begin() + 1, copy.end()));
    for (const auto& p : sc.inputs) run->input(p);

    int status = kExitOk;
    if (sub == "simulate") status = cmd_simulate(sc, *run, days, out);
    else if (sub == "sensitivity") status = cmd_sensitivity(sc, *run, common, bounds, n, output, days, out, err);
    else if (sub == "emulate")
      status = cmd_emulate(sc, *run, common, {bounds, data, threshold, candidates, design_points, days}, out, err);
    else if (sub == "synth") status = cmd_synth(sc, *run, source, days, noise, out);
    else status = cmd_invert(sc, *run, common, data, refined, tt_config, out, err);
    run->finish(status);
    return status;
  }
  catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    if (run) run->finish(kExitConfig);
    return kExitConfig;
  }
  catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    if (run) run->finish(kExitNumerical);
    return kExitNumerical;
  }
  catch (const std::filesystem::filesystem_error& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
}

}  // namespace seirhcd
