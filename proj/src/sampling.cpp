#include "seirhcd/sampling.hpp"

#include "seirhcd/error.hpp"

#include <algorithm>
#include <boost/random/sobol.hpp>
#include <cmath>
#include <fmt/format.h>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numeric>
#include <random>
#include <sstream>

namespace seirhcd {

std::size_t ParameterBounds::find(const std::string& name) const
{
  auto it = std::find(names.begin(), names.end(), name);
  return static_cast<std::size_t>(it - names.begin());
}

void ParameterBounds::validate() const
{
  if (names.empty()) throw ConfigError("bounds: no parameters");
  if (lo.size() != names.size() || hi.size() != names.size())
    throw ConfigError("bounds: names, lo and hi must have equal length");
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (!std::isfinite(lo[i]) || !std::isfinite(hi[i]) || !(lo[i] < hi[i]))
      throw ConfigError(fmt::format("bounds: degenerate interval for '{}' [{}, {}]", names[i],
                                    lo[i], hi[i]));
    if (std::count(names.begin(), names.end(), names[i]) > 1)
      throw ConfigError(fmt::format("bounds: duplicate parameter '{}'", names[i]));
  }
}

Eigen::VectorXd ParameterBounds::from_unit(const Eigen::Ref<const Eigen::VectorXd>& u) const
{
  Eigen::VectorXd q(size());
  for (std::size_t i = 0; i < size(); ++i) q[i] = lo[i] + u[i] * width(i);
  return q;
}

Eigen::VectorXd ParameterBounds::to_unit(const Eigen::Ref<const Eigen::VectorXd>& q) const
{
  Eigen::VectorXd u(size());
  for (std::size_t i = 0; i < size(); ++i) u[i] = (q[i] - lo[i]) / width(i);
  return u;
}

ParameterBounds ParameterBounds::defaults()
{
  ParameterBounds b;
  const std::vector<std::pair<const char*, double>> upper = {
      {"alpha_i", 38.9}, {"alpha_e", 9.3},  {"t_inc", 505.0},   {"t_inf", 808.0},
      {"beta", 40.4},    {"eps_hc", 3.8},   {"t_hosp", 707.0},  {"t_imm", 17675.0},
      {"mu", 48.0},      {"t_crit", 909.0}, {"v_s", 0.005},     {"v_e", 0.101},
      {"v_i", 0.001},    {"v_r", 0.005}};
  for (const auto& [name, hi] : upper) {
    b.names.emplace_back(name);
    b.lo.push_back(0.0);
    b.hi.push_back(hi);
  }
  return b;
}

ParameterBounds bounds_from_json(const std::string& text, const std::string& origin)
{
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(text);
  }
  catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  if (j.is_object() && j.contains("bounds")) j = j.at("bounds");
  if (!j.is_object()) throw ConfigError(origin + ": expected an object of name: [lo, hi]");
  ParameterBounds b;
  for (const auto& [name, range] : j.items()) {
    if (!range.is_array() || range.size() != 2 || !range[0].is_number() || !range[1].is_number())
      throw ConfigError(fmt::format("{}: '{}' must be [lo, hi]", origin, name));
    b.names.push_back(name);
    b.lo.push_back(range[0].get<double>());
    b.hi.push_back(range[1].get<double>());
  }
  try {
    b.validate();
  }
  catch (const ConfigError& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  return b;
}

ParameterBounds load_bounds_json(const std::string& path)
{
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open bounds file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return bounds_from_json(ss.str(), path);
}

std::string bounds_to_json(const ParameterBounds& bounds)
{
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < bounds.size(); ++i) j[bounds.names[i]] = {bounds.lo[i], bounds.hi[i]};
  return j.dump(2);
}

Eigen::MatrixXd sobol_points(std::size_t n, std::size_t dim, std::uint64_t seed)
{
  if (dim == 0) throw ConfigError("sobol_points: dimension must be positive");
  boost::random::sobol_engine<std::uint32_t, 32, boost::random::default_sobol_table> engine(dim);
  std::mt19937_64 rng(seed);
  std::vector<std::uint32_t> shift(dim);
  for (auto& s : shift) s = static_cast<std::uint32_t>(rng() >> 32);

  constexpr double scale = 1.0 / 4294967296.0;
  Eigen::MatrixXd pts(n, dim);
  // The engine starts at the second point; the sequence proper begins at the origin.
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t d = 0; d < dim; ++d) pts(i, d) = ((i == 0 ? 0u : engine()) ^ shift[d]) * scale;
  return pts;
}

Eigen::MatrixXd latin_hypercube(std::size_t n, std::size_t dim, std::uint64_t seed)
{
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Eigen::MatrixXd pts(n, dim);
  std::vector<std::size_t> perm(n);
  for (std::size_t d = 0; d < dim; ++d) {
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    for (std::size_t i = 0; i < n; ++i) {
      double x = (static_cast<double>(perm[i]) + unif(rng)) / static_cast<double>(n);
      // Keep the point inside its stratum despite rounding at the upper edge.
      x = std::min(x, std::nextafter((perm[i] + 1.0) / static_cast<double>(n), 0.0));
      pts(i, d) = x;
    }
  }
  return pts;
}

}  // namespace seirhcd
