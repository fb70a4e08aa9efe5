#include "seirhcd/observations.hpp"

#include "seirhcd/error.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <fstream>
#include <random>
#include <sstream>

namespace seirhcd {

double Cap::operator()(double x) const
{
  const double y = x - b;
  const double y2 = y * y;
  return a * std::exp(-(y2 * y2) / c);
}

std::array<double, SourceConfig::kDimension> SourceConfig::to_vector() const
{
  std::array<double, kDimension> q{};
  std::size_t n = 0;
  for (const auto* caps : {&s_caps, &e_caps})
    for (const Cap& cap : *caps) {
      q[n++] = cap.a;
      q[n++] = cap.b;
      q[n++] = cap.c;
    }
  q[n] = i0;
  return q;
}

SourceConfig SourceConfig::from_vector(const std::array<double, kDimension>& q)
{
  SourceConfig src;
  std::size_t n = 0;
  for (auto* caps : {&src.s_caps, &src.e_caps})
    for (Cap& cap : *caps) {
      cap.a = q[n++];
      cap.b = q[n++];
      cap.c = q[n++];
    }
  src.i0 = q[n];
  return src;
}

const std::array<std::string, SourceConfig::kDimension>& SourceConfig::coordinate_names()
{
  static const std::array<std::string, kDimension> names = [] {
    std::array<std::string, kDimension> out;
    std::size_t n = 0;
    for (const char* p : {"s", "e"})
      for (int cap = 1; cap <= 3; ++cap)
        for (const char* f : {"a", "b", "c"}) out[n++] = fmt::format("{}{}.{}", p, cap, f);
    out[n] = "i0";
    return out;
  }();
  return names;
}

std::size_t SourceConfig::coordinate_index(const std::string& name)
{
  const auto& names = coordinate_names();
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end())
    throw ConfigError("unknown source coordinate '" + name + "' (expected e.g. s1.a, e2.b, i0)");
  return static_cast<std::size_t>(it - names.begin());
}

std::vector<std::string> SourceConfig::violations() const
{
  std::vector<std::string> out;
  const auto& names = coordinate_names();
  const auto q = to_vector();
  for (std::size_t n = 0; n + 1 < kDimension; ++n) {
    const char field = names[n].back();
    if (!std::isfinite(q[n])) out.push_back(names[n] + " must be finite");
    else if (field == 'a' && q[n] < 0.0) out.push_back(names[n] + " must be >= 0");
    else if (field == 'b' && (q[n] < 0.0 || q[n] > 1.0)) out.push_back(names[n] + " must lie in [0, 1]");
    else if (field == 'c' && !(q[n] > 0.0)) out.push_back(names[n] + " must be > 0");
  }
  if (!(i0 >= 0.0) || !std::isfinite(i0)) out.push_back("i0 must be >= 0");
  return out;
}

void to_json(nlohmann::json& j, const SourceConfig& src)
{
  auto caps = [](const std::array<Cap, 3>& cs) {
    nlohmann::json arr = nlohmann::json::array();
    for (const Cap& c : cs) arr.push_back({{"a", c.a}, {"b", c.b}, {"c", c.c}});
    return arr;
  };
  j = {{"s_caps", caps(src.s_caps)}, {"e_caps", caps(src.e_caps)}, {"i0", src.i0}};
}

void from_json(const nlohmann::json& j, SourceConfig& src)
{
  if (!j.is_object()) throw ConfigError("source config must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (key != "s_caps" && key != "e_caps" && key != "i0")
      throw ConfigError("source config: unknown key '" + key + "'");
  auto caps = [&](const char* key, std::array<Cap, 3>& out) {
    if (!j.contains(key)) throw ConfigError(std::string("source config: missing '") + key + "'");
    const auto& arr = j.at(key);
    if (!arr.is_array() || arr.size() != 3)
      throw ConfigError(std::string("source config: '") + key + "' must list exactly 3 caps");
    for (std::size_t n = 0; n < 3; ++n) {
      const auto& cap = arr[n];
      for (const auto& [k, _] : cap.items())
        if (k != "a" && k != "b" && k != "c")
          throw ConfigError(fmt::format("source config: {}[{}]: unknown key '{}'", key, n, k));
      for (const char* k : {"a", "b", "c"})
        if (!cap.contains(k) || !cap.at(k).is_number())
          throw ConfigError(fmt::format("source config: {}[{}].{} must be a number", key, n, k));
      out[n] = {cap.at("a").get<double>(), cap.at("b").get<double>(), cap.at("c").get<double>()};
    }
  };
  caps("s_caps", src.s_caps);
  caps("e_caps", src.e_caps);
  if (!j.contains("i0") || !j.at("i0").is_number())
    throw ConfigError("source config: 'i0' must be a number");
  src.i0 = j.at("i0").get<double>();
}

SourceConfig load_source(const std::string& path)
{
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open source config '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  }
  catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  SourceConfig src = j.get<SourceConfig>();
  if (auto v = src.violations(); !v.empty()) throw ConfigError(path + ": " + v.front());
  return src;
}

StateField eval_initial_field(const SourceConfig& src, int nx, const Background& fixed)
{
  StateField f(nx);
  const double h = 1.0 / nx;
  for (std::size_t k = 0; k < f.size(); ++k) {
    const double x = k * h;
    double s = 0.0, e = 0.0;
    for (const Cap& c : src.s_caps) s += c(x);
    for (const Cap& c : src.e_caps) e += c(x);
    f[Compartment::S][k] = s;
    f[Compartment::E][k] = e;
    f[Compartment::I][k] = src.i0;
    f[Compartment::R][k] = fixed.r;
    f[Compartment::H][k] = fixed.h;
    f[Compartment::C][k] = fixed.c;
    f[Compartment::D][k] = fixed.d;
  }
  return f;
}

StateField reference_initial_field(int nx, double i0, const Background& fixed)
{
  SourceConfig none;
  none.i0 = i0;
  for (auto* caps : {&none.s_caps, &none.e_caps})
    for (Cap& c : *caps) c.a = 0.0;
  StateField f = eval_initial_field(none, nx, fixed);
  const Cap far{1.0, -1.0, 1.0};
  const std::array<Cap, 4> small = {Cap{0.125, 0.62, 1e-5}, Cap{0.125, 0.52, 1e-5},
                                    Cap{0.125, 0.42, 1e-5}, Cap{0.25, 0.735, 1e-5}};
  const Cap e_cap{0.05, 0.75, 1e-5};
  const double h = 1.0 / nx;
  for (std::size_t k = 0; k < f.size(); ++k) {
    const double x = k * h;
    double s = far(x) + std::exp(-(x - 0.35) * (x - 0.35) / 1e-2);
    for (const Cap& c : small) s += c(x);
    f[Compartment::S][k] = s;
    f[Compartment::E][k] = e_cap(x);
  }
  return f;
}

void ObservationSeries::validate() const
{
  const std::size_t n = days.size();
  if (I.size() != n || C.size() != n || D.size() != n)
    throw ConfigError("observation series: I, C, D must have one value per day");
  if (!H.empty() && (H.size() != n || R.size() != n))
    throw ConfigError("observation series: H and R must have one value per day");
  for (std::size_t k = 1; k < n; ++k)
    if (days[k] <= days[k - 1]) throw ConfigError("observation series: days must be strictly increasing");
  auto check = [](const std::vector<double>& v, const char* what) {
    for (double x : v)
      if (!(x >= 0.0) || !std::isfinite(x))
        throw ConfigError(std::string("observation series: ") + what + " must be finite and >= 0");
  };
  check(I, "I");
  check(C, "C");
  check(D, "D");
  check(H, "H");
  check(R, "R");
}

double ObservationSeries::sum_of_squares() const
{
  double acc = 0.0;
  for (const auto* v : {&I, &C, &D})
    for (double x : *v) acc += x * x;
  return acc;
}

ObservationSeries read_observations_csv(const std::string& path)
{
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open observations '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(path + ": empty file");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) header.push_back(cell);
  }
  auto col = [&](const std::string& name) -> int {
    auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : static_cast<int>(it - header.begin());
  };
  const int cday = col("day"), cI = col("I"), cC = col("C"), cD = col("D");
  const int cH = col("H"), cR = col("R");
  if (cday < 0 || cI < 0 || cC < 0 || cD < 0)
    throw ConfigError(path + ":1: header must contain day,I,C,D");
  if ((cH < 0) != (cR < 0)) throw ConfigError(path + ":1: H and R must be given together");
  for (const auto& h : header)
    if (col(h) >= 0 && h != "day" && h != "I" && h != "C" && h != "D" && h != "H" && h != "R")
      throw ConfigError(path + ":1: unknown column '" + h + "'");

  ObservationSeries out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    if (cells.size() != header.size())
      throw ConfigError(fmt::format("{}:{}: expected {} fields, got {}", path, lineno,
                                    header.size(), cells.size()));
    try {
      out.days.push_back(std::stoi(cells[cday]));
      out.I.push_back(std::stod(cells[cI]));
      out.C.push_back(std::stod(cells[cC]));
      out.D.push_back(std::stod(cells[cD]));
      if (cH >= 0) {
        out.H.push_back(std::stod(cells[cH]));
        out.R.push_back(std::stod(cells[cR]));
      }
    }
    catch (const std::exception&) {
      throw ConfigError(fmt::format("{}:{}: malformed number", path, lineno));
    }
  }
  try {
    out.validate();
  }
  catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return out;
}

void write_observations_csv(std::ostream& out, const ObservationSeries& series, bool include_hr)
{
  const bool hr = include_hr && series.has_hr();
  out << (hr ? "day,I,C,D,H,R\n" : "day,I,C,D\n");
  for (std::size_t k = 0; k < series.size(); ++k) {
    out << fmt::format("{},{:.17g},{:.17g},{:.17g}", series.days[k], series.I[k], series.C[k],
                       series.D[k]);
    if (hr) out << fmt::format(",{:.17g},{:.17g}", series.H[k], series.R[k]);
    out << '\n';
  }
}

ObservationSeries extract_observables(const Trajectory& traj, const ModelParams& p,
                                      const std::vector<int>& days)
{
  ObservationSeries out;
  const double n = static_cast<double>(p.population);
  for (int day : days) {
    const StateField* f = traj.find(static_cast<double>(day));
    if (f == nullptr) throw NumericalError(fmt::format("no snapshot for day {}", day));
    const double h = f->h();
    out.days.push_back(day);
    out.I.push_back(n * trapezoid((*f)[Compartment::I], h));
    out.C.push_back(n * trapezoid((*f)[Compartment::C], h));
    out.D.push_back(n * trapezoid((*f)[Compartment::D], h));
    out.H.push_back(n * trapezoid((*f)[Compartment::H], h));
    out.R.push_back(n * trapezoid((*f)[Compartment::R], h));
  }
  return out;
}

ObservationSeries forward_observables(const SourceConfig& q, const ForwardScenario& scenario,
                                      const std::vector<int>& days)
{
  const StateField init = eval_initial_field(q, scenario.grid.nx, scenario.background);
  const FdmRun run = solve_fdm(scenario.params, init, scenario.grid);
  return extract_observables(run.trajectory, scenario.params, days);
}

double misfit(const ObservationSeries& model, const ObservationSeries& data)
{
  if (model.size() != data.size()) throw ConfigError("misfit: model and data lengths differ");
  double j = 0.0;
  for (std::size_t k = 0; k < data.size(); ++k) {
    if (model.days[k] != data.days[k]) throw ConfigError("misfit: model and data days differ");
    const double dI = model.I[k] - data.I[k];
    const double dC = model.C[k] - data.C[k];
    const double dD = model.D[k] - data.D[k];
    j += dI * dI + dC * dC + dD * dD;
  }
  return j;
}

double misfit(const SourceConfig& q, const ObservationSeries& data, const ForwardScenario& scenario)
{
  if (data.size() == 0) return 0.0;
  try {
    return misfit(forward_observables(q, scenario, data.days), data);
  }
  catch (const NumericalError& e) {
    const auto v = q.to_vector();
    throw NumericalError(fmt::format("{} (source q = [{:.6g}])", e.what(), fmt::join(v, ", ")));
  }
}

ObservationSeries add_noise(const ObservationSeries& clean, double noise_rel, std::uint64_t seed)
{
  if (noise_rel < 0.0) throw ConfigError("noise level must be >= 0");
  ObservationSeries out = clean;
  if (noise_rel == 0.0) return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> xi(0.0, 1.0);
  for (std::size_t k = 0; k < out.size(); ++k) {
    for (auto* v : {&out.I, &out.C, &out.D, &out.H, &out.R}) {
      if (v->empty()) continue;
      (*v)[k] = std::max(0.0, (*v)[k] * (1.0 + noise_rel * xi(rng)));
    }
  }
  return out;
}

ObservationSeries synthesize_data(const SourceConfig& q_true, const ForwardScenario& scenario,
                                  const std::vector<int>& days, double noise_rel,
                                  std::uint64_t seed)
{
  if (noise_rel < 0.0) throw ConfigError("noise level must be >= 0");
  return add_noise(forward_observables(q_true, scenario, days), noise_rel, seed);
}

}  // namespace seirhcd
