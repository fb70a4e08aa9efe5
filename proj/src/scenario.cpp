#include "seirhcd/scenario.hpp"

#include "seirhcd/error.hpp"

#include <algorithm>
#include <filesystem>
#include <fmt/format.h>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <toml.hpp>

namespace seirhcd {

namespace {

namespace fs = std::filesystem;

toml::array to_toml_array(const nlohmann::json& j);

toml::table to_toml_table(const nlohmann::json& j)
{
  toml::table t;
  for (const auto& [key, v] : j.items()) {
    if (v.is_object()) t.insert(key, to_toml_table(v));
    else if (v.is_array()) t.insert(key, to_toml_array(v));
    else if (v.is_boolean()) t.insert(key, v.get<bool>());
    else if (v.is_number_integer()) t.insert(key, v.get<std::int64_t>());
    else if (v.is_number()) t.insert(key, v.get<double>());
    else if (v.is_string()) t.insert(key, v.get<std::string>());
    // null: treated as absent
  }
  return t;
}

toml::array to_toml_array(const nlohmann::json& j)
{
  toml::array a;
  for (const auto& v : j) {
    if (v.is_object()) a.push_back(to_toml_table(v));
    else if (v.is_array()) a.push_back(to_toml_array(v));
    else if (v.is_boolean()) a.push_back(v.get<bool>());
    else if (v.is_number_integer()) a.push_back(v.get<std::int64_t>());
    else if (v.is_number()) a.push_back(v.get<double>());
    else if (v.is_string()) a.push_back(v.get<std::string>());
  }
  return a;
}

/// Schema-checking view over the parsed document.
class Reader {
public:
  Reader(std::string origin, std::string text, bool json, toml::table root)
      : origin_(std::move(origin)), text_(std::move(text)), json_(json), root_(std::move(root))
  {
  }

  const toml::table& root() const { return root_; }

  [[noreturn]] void fail(const std::string& path, const toml::node* node, const std::string& msg) const
  {
    const int line = line_of(path, node);
    if (line > 0) throw ConfigError(fmt::format("{}:{}: {}: {}", origin_, line, path, msg));
    throw ConfigError(fmt::format("{}: {}: {}", origin_, path, msg));
  }

  const toml::table* section(const std::string& name, bool required) const
  {
    const toml::node* n = root_.get(name);
    if (!n) {
      if (required) throw ConfigError(fmt::format("{}: missing required section [{}]", origin_, name));
      return nullptr;
    }
    if (!n->is_table()) fail(name, n, "must be a table");
    return n->as_table();
  }

  void allow(const toml::table& t, const std::string& path, std::initializer_list<std::string_view> keys) const
  {
    for (const auto& [k, v] : t) {
      if (std::find(keys.begin(), keys.end(), k.str()) == keys.end())
        fail(join(path, std::string(k.str())), &v, "unknown key");
    }
  }

  bool has(const toml::table& t, const char* key) const { return t.get(key) != nullptr; }

  double number(const toml::table& t, const std::string& path, const char* key,
                std::optional<double> fallback = std::nullopt) const
  {
    const toml::node* n = t.get(key);
    const std::string p = join(path, key);
    if (!n) {
      if (fallback) return *fallback;
      fail_missing(t, path, p);
    }
    if (auto v = n->value<double>()) return *v;
    fail(p, n, "must be a number");
  }

  long integer(const toml::table& t, const std::string& path, const char* key,
               std::optional<long> fallback = std::nullopt) const
  {
    const toml::node* n = t.get(key);
    const std::string p = join(path, key);
    if (!n) {
      if (fallback) return *fallback;
      fail_missing(t, path, p);
    }
    if (!n->is_integer()) fail(p, n, "must be an integer");
    return static_cast<long>(n->as_integer()->get());
  }

  bool boolean(const toml::table& t, const std::string& path, const char* key, bool fallback) const
  {
    const toml::node* n = t.get(key);
    if (!n) return fallback;
    if (!n->is_boolean()) fail(join(path, key), n, "must be true or false");
    return n->as_boolean()->get();
  }

  std::optional<std::string> string(const toml::table& t, const std::string& path, const char* key) const
  {
    const toml::node* n = t.get(key);
    if (!n) return std::nullopt;
    if (!n->is_string()) fail(join(path, key), n, "must be a string");
    return n->as_string()->get();
  }

  /// A file path relative to the document.
  std::optional<std::string> file(const toml::table& t, const std::string& path, const char* key) const
  {
    auto s = string(t, path, key);
    if (!s) return s;
    fs::path p(*s);
    if (p.is_relative()) p = fs::path(origin_).parent_path() / p;
    return p.lexically_normal().string();
  }

  /// An integer list, or a single integer K meaning days 1..K.
  std::vector<int> days(const toml::table& t, const std::string& path, const char* key,
                        std::vector<int> fallback) const
  {
    const toml::node* n = t.get(key);
    const std::string p = join(path, key);
    if (!n) return fallback;
    std::vector<int> out;
    if (n->is_integer()) {
      const auto k = n->as_integer()->get();
      if (k < 1) fail(p, n, "must be >= 1");
      for (int d = 1; d <= k; ++d) out.push_back(d);
      return out;
    }
    if (!n->is_array()) fail(p, n, "must be an integer or a list of integers");
    for (const auto& e : *n->as_array()) {
      if (!e.is_integer()) fail(p, &e, "must list integers");
      out.push_back(static_cast<int>(e.as_integer()->get()));
    }
    if (out.empty()) fail(p, n, "must not be empty");
    for (std::size_t i = 0; i < out.size(); ++i)
      if (out[i] < 0 || (i > 0 && out[i] <= out[i - 1])) fail(p, n, "days must be >= 0 and increasing");
    return out;
  }

  std::vector<std::string> strings(const toml::table& t, const std::string& path, const char* key) const
  {
    const toml::node* n = t.get(key);
    const std::string p = join(path, key);
    std::vector<std::string> out;
    if (!n) return out;
    if (!n->is_array()) fail(p, n, "must be a list of strings");
    for (const auto& e : *n->as_array()) {
      if (!e.is_string()) fail(p, &e, "must list strings");
      out.push_back(e.as_string()->get());
    }
    return out;
  }

  Compartment observable(const toml::node* n, const std::string& path) const
  {
    if (!n->is_string()) fail(path, n, "must be one of \"I\", \"C\", \"D\", \"H\", \"R\"");
    const std::string s = n->as_string()->get();
    if (s != "I" && s != "C" && s != "D" && s != "H" && s != "R")
      fail(path, n, fmt::format("'{}' is not an observable (use I, C, D, H or R)", s));
    return parse_compartment(s);
  }

  static std::string join(const std::string& path, const std::string& key)
  {
    return path.empty() ? key : path + "." + key;
  }

private:
  [[noreturn]] void fail_missing(const toml::table& t, const std::string& section,
                                 const std::string& field) const
  {
    const int line = section.empty() ? 0 : line_of(section, &t);
    if (line > 0)
      throw ConfigError(fmt::format("{}:{}: missing required field '{}'", origin_, line, field));
    throw ConfigError(fmt::format("{}: missing required field '{}'", origin_, field));
  }

  int line_of(const std::string& path, const toml::node* node) const
  {
    if (!json_) return node ? static_cast<int>(node->source().begin.line) : 0;
    // JSON: follow the key path through the raw text.
    std::size_t pos = 0;
    std::stringstream ss(path);
    std::string seg;
    while (std::getline(ss, seg, '.')) {
      const auto at = text_.find("\"" + seg + "\"", pos);
      if (at == std::string::npos) return 0;
      pos = at;
    }
    return 1 + static_cast<int>(std::count(text_.begin(), text_.begin() + static_cast<long>(pos), '\n'));
  }

  std::string origin_;
  std::string text_;
  bool json_;
  toml::table root_;
};

void read_model(const Reader& r, Scenario& s)
{
  const toml::table& m = *r.section("model", true);
  r.allow(m, "model", {"alpha_i", "alpha_e", "t_inc", "t_inf", "beta", "beta_file", "eps_hc",
                       "t_hosp", "t_imm", "mu", "t_crit", "v_s", "v_e", "v_i", "v_r", "population"});
  ModelParams& p = s.params;
  p.alpha_i = r.number(m, "model", "alpha_i");
  p.alpha_e = r.number(m, "model", "alpha_e");
  p.t_inc = r.number(m, "model", "t_inc");
  p.t_inf = r.number(m, "model", "t_inf");
  p.eps_hc = r.number(m, "model", "eps_hc");
  p.t_hosp = r.number(m, "model", "t_hosp");
  p.t_imm = r.number(m, "model", "t_imm");
  p.mu = r.number(m, "model", "mu");
  p.t_crit = r.number(m, "model", "t_crit");
  p.v_s = r.number(m, "model", "v_s");
  p.v_e = r.number(m, "model", "v_e");
  p.v_i = r.number(m, "model", "v_i");
  p.v_r = r.number(m, "model", "v_r");
  p.population = r.integer(m, "model", "population");
  const bool has_beta = r.has(m, "beta"), has_file = r.has(m, "beta_file");
  if (has_beta && has_file) r.fail("model.beta_file", m.get("beta_file"), "give either beta or beta_file");
  if (has_file) {
    const std::string path = *r.file(m, "model", "beta_file");
    p.beta = BetaSeries::load_csv(path);
    s.inputs.push_back(path);
  }
  else {
    p.beta = BetaSeries(r.number(m, "model", "beta"));
  }
  for (const auto& v : validate_params(p))
    r.fail("model." + v.field, m.get(v.field), v.message);
}

void read_grid(const Reader& r, Scenario& s)
{
  const toml::table& g = *r.section("grid", true);
  r.allow(g, "grid", {"nx", "nt", "T"});
  s.grid.nx = static_cast<int>(r.integer(g, "grid", "nx"));
  s.grid.nt = r.integer(g, "grid", "nt");
  s.grid.T = r.number(g, "grid", "T");
  try {
    s.grid.validate();
  }
  catch (const ConfigError& e) {
    r.fail("grid", &g, e.what());
  }
}

void read_initial(const Reader& r, Scenario& s)
{
  const toml::table& t = *r.section("initial", true);
  r.allow(t, "initial", {"I", "R", "H", "C", "D", "source"});
  const double N = static_cast<double>(s.params.population);
  auto count = [&](const char* key) {
    const double v = r.number(t, "initial", key);
    if (v < 0.0) r.fail(std::string("initial.") + key, t.get(key), "must be >= 0");
    return v / N;
  };
  s.background = {count("R"), count("H"), count("C"), count("D")};
  if (auto src = r.file(t, "initial", "source")) {
    if (r.has(t, "I")) r.fail("initial.I", t.get("I"), "give either I or source (the source carries i0)");
    s.source = load_source(*src);
    s.inputs.push_back(*src);
    s.i0 = s.source->i0;
  }
  else {
    s.i0 = count("I");
  }
}

void read_solver(const Reader& r, Scenario& s)
{
  const toml::table* t = r.section("solver", false);
  if (!t) return;
  r.allow(*t, "solver", {"method", "clamp"});
  if (auto m = r.string(*t, "solver", "method")) {
    if (*m != "fdm" && *m != "fem") r.fail("solver.method", t->get("method"), "must be \"fdm\" or \"fem\"");
    s.solver = *m;
  }
  s.clamp = r.boolean(*t, "solver", "clamp", true);
}

void read_sensitivity(const Reader& r, Scenario& s)
{
  const toml::table* t = r.section("sensitivity", false);
  auto& o = s.sensitivity;
  o.days.erase(std::remove_if(o.days.begin(), o.days.end(), [&](int d) { return d > s.grid.T; }),
               o.days.end());
  if (o.days.empty()) o.days = {static_cast<int>(s.grid.T)};
  if (!t) return;
  r.allow(*t, "sensitivity", {"bounds", "n", "days", "output", "nx", "bootstrap", "level"});
  o.bounds = r.file(*t, "sensitivity", "bounds");
  const long n = r.integer(*t, "sensitivity", "n", static_cast<long>(o.n));
  if (n < 2) r.fail("sensitivity.n", t->get("n"), "must be >= 2");
  o.n = static_cast<std::size_t>(n);
  o.days = r.days(*t, "sensitivity", "days", o.days);
  if (const toml::node* out = t->get("output")) o.output = r.observable(out, "sensitivity.output");
  o.nx = static_cast<int>(r.integer(*t, "sensitivity", "nx", o.nx));
  if (o.nx < 2) r.fail("sensitivity.nx", t->get("nx"), "must be >= 2");
  o.bootstrap = static_cast<std::size_t>(r.integer(*t, "sensitivity", "bootstrap", static_cast<long>(o.bootstrap)));
  o.level = r.number(*t, "sensitivity", "level", o.level);
  if (!(o.level > 0.0 && o.level < 1.0)) r.fail("sensitivity.level", t->get("level"), "must lie in (0, 1)");
}

void read_emulator(const Reader& r, Scenario& s)
{
  auto& o = s.emulator;
  o.days = {static_cast<int>(s.grid.T)};
  const toml::table* t = r.section("emulator", false);
  if (!t) return;
  r.allow(*t, "emulator", {"bounds", "design_points", "candidates", "threshold", "observables",
                           "days", "obs_rel_sd", "degree", "restarts", "data", "nx"});
  o.bounds = r.file(*t, "emulator", "bounds");
  o.design_points = static_cast<std::size_t>(r.integer(*t, "emulator", "design_points", static_cast<long>(o.design_points)));
  if (o.design_points < 2) r.fail("emulator.design_points", t->get("design_points"), "must be >= 2");
  o.candidates = static_cast<std::size_t>(r.integer(*t, "emulator", "candidates", static_cast<long>(o.candidates)));
  o.threshold = r.number(*t, "emulator", "threshold", o.threshold);
  if (!(o.threshold > 0.0)) r.fail("emulator.threshold", t->get("threshold"), "must be > 0");
  if (const toml::node* obs = t->get("observables")) {
    if (!obs->is_array() || obs->as_array()->empty())
      r.fail("emulator.observables", obs, "must be a non-empty list");
    o.observables.clear();
    for (const auto& e : *obs->as_array()) o.observables.push_back(r.observable(&e, "emulator.observables"));
  }
  o.days = r.days(*t, "emulator", "days", o.days);
  o.obs_rel_sd = r.number(*t, "emulator", "obs_rel_sd", o.obs_rel_sd);
  if (o.obs_rel_sd < 0.0) r.fail("emulator.obs_rel_sd", t->get("obs_rel_sd"), "must be >= 0");
  o.degree = static_cast<int>(r.integer(*t, "emulator", "degree", o.degree));
  if (o.degree < 0) r.fail("emulator.degree", t->get("degree"), "must be >= 0");
  o.restarts = static_cast<int>(r.integer(*t, "emulator", "restarts", o.restarts));
  if (o.restarts < 1) r.fail("emulator.restarts", t->get("restarts"), "must be >= 1");
  o.data = r.file(*t, "emulator", "data");
  o.nx = static_cast<int>(r.integer(*t, "emulator", "nx", o.nx));
  if (o.nx < 2) r.fail("emulator.nx", t->get("nx"), "must be >= 2");
}

void read_synth(const Reader& r, Scenario& s)
{
  auto& o = s.synth;
  for (int d = 1; d <= static_cast<int>(s.grid.T); ++d) o.days.push_back(d);
  const toml::table* t = r.section("synth", false);
  if (!t) return;
  r.allow(*t, "synth", {"source", "days", "noise"});
  o.source = r.file(*t, "synth", "source");
  o.days = r.days(*t, "synth", "days", o.days);
  o.noise = r.number(*t, "synth", "noise", o.noise);
  if (o.noise < 0.0) r.fail("synth.noise", t->get("noise"), "must be >= 0");
}

void read_inversion(const Reader& r, Scenario& s)
{
  const toml::table* t = r.section("inversion", false);
  if (!t) return;
  r.allow(*t, "inversion", {"data", "source", "refined_bounds", "bounds", "tt"});
  InversionSection inv;
  inv.data = r.file(*t, "inversion", "data");
  inv.source = r.file(*t, "inversion", "source");
  inv.refined_bounds = r.file(*t, "inversion", "refined_bounds");

  const toml::node* b = t->get("bounds");
  if (!b) throw ConfigError(fmt::format("{}: missing required field 'inversion.bounds'", s.path));
  if (!b->is_table()) r.fail("inversion.bounds", b, "must be a table of coordinate = [lo, hi]");
  for (const auto& [k, v] : *b->as_table()) {
    const std::string name(k.str());
    const std::string p = "inversion.bounds." + name;
    try {
      SourceConfig::coordinate_index(name);
    }
    catch (const ConfigError& e) {
      r.fail(p, &v, e.what());
    }
    const toml::array* a = v.as_array();
    if (!a || a->size() != 2 || !a->get(0)->value<double>() || !a->get(1)->value<double>())
      r.fail(p, &v, "must be [lo, hi]");
    const double lo = *a->get(0)->value<double>(), hi = *a->get(1)->value<double>();
    if (!(lo < hi)) r.fail(p, &v, "needs lo < hi");
    inv.bounds.names.push_back(name);
    inv.bounds.lo.push_back(lo);
    inv.bounds.hi.push_back(hi);
  }
  if (inv.bounds.size() == 0) r.fail("inversion.bounds", b, "must name at least one coordinate");

  if (const toml::node* tt = t->get("tt")) {
    if (!tt->is_table()) r.fail("inversion.tt", tt, "must be a table");
    const toml::table& c = *tt->as_table();
    r.allow(c, "inversion.tt", {"n", "r_max", "sweeps", "alpha0", "mapping", "max_evaluations",
                                "stagnation_sweeps"});
    auto positive = [&](const char* key, std::size_t fallback, long min) {
      const long v = r.integer(c, "inversion.tt", key, static_cast<long>(fallback));
      if (v < min) r.fail(std::string("inversion.tt.") + key, c.get(key), fmt::format("must be >= {}", min));
      return static_cast<std::size_t>(v);
    };
    inv.tt.n = positive("n", inv.tt.n, 2);
    inv.tt.r_max = positive("r_max", inv.tt.r_max, 1);
    inv.tt.sweeps = positive("sweeps", inv.tt.sweeps, 1);
    inv.tt.max_evaluations = positive("max_evaluations", inv.tt.max_evaluations, 0);
    inv.tt.stagnation_sweeps = positive("stagnation_sweeps", inv.tt.stagnation_sweeps, 0);
    inv.tt.alpha0 = r.number(c, "inversion.tt", "alpha0", inv.tt.alpha0);
    if (auto m = r.string(c, "inversion.tt", "mapping")) {
      if (*m != "exp" && *m != "arctan") r.fail("inversion.tt.mapping", c.get("mapping"), "must be \"exp\" or \"arctan\"");
      inv.tt.mapping = *m;
    }
  }
  inv.tt.b_min = inv.bounds.lo;
  inv.tt.b_max = inv.bounds.hi;
  s.inversion = std::move(inv);
}

}  // namespace

StateField Scenario::initial_field() const
{
  return source ? eval_initial_field(*source, grid.nx, background)
                : reference_initial_field(grid.nx, i0, background);
}

ForwardScenario Scenario::forward() const
{
  return {params, grid, background};
}

Scenario parse_scenario(const std::string& text, const std::string& origin, bool json)
{
  toml::table root;
  if (json) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    }
    catch (const nlohmann::json::parse_error& e) {
      const auto upto = text.substr(0, std::min(e.byte, text.size()));
      const auto line = 1 + std::count(upto.begin(), upto.end(), '\n');
      throw ConfigError(fmt::format("{}:{}: {}", origin, line, e.what()));
    }
    if (!j.is_object()) throw ConfigError(origin + ": expected a JSON object");
    root = to_toml_table(j);
  }
  else {
    try {
      root = toml::parse(text, std::string_view(origin));
    }
    catch (const toml::parse_error& e) {
      throw ConfigError(fmt::format("{}:{}: {}", origin, e.source().begin.line, e.description()));
    }
  }

  const Reader r(origin, text, json, std::move(root));
  r.allow(r.root(), "", {"model", "grid", "initial", "solver", "sensitivity", "emulator", "synth",
                         "inversion"});
  Scenario s;
  s.path = origin;
  read_model(r, s);
  read_grid(r, s);
  read_initial(r, s);
  read_solver(r, s);
  read_sensitivity(r, s);
  read_emulator(r, s);
  read_synth(r, s);
  read_inversion(r, s);
  return s;
}

Scenario load_scenario(const std::string& path)
{
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string ext = fs::path(path).extension().string();
  if (ext != ".toml" && ext != ".json")
    throw ConfigError("config '" + path + "' must end in .toml or .json");
  Scenario s = parse_scenario(ss.str(), path, ext == ".json");
  s.inputs.insert(s.inputs.begin(), path);
  return s;
}

}  // namespace seirhcd
