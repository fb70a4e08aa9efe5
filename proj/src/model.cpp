#include "seirhcd/model.hpp"

#include "seirhcd/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

namespace seirhcd {

const char* name(Compartment c)
{
  static constexpr std::array<const char*, kNumCompartments> names = {"s", "e", "i", "r",
                                                                      "h", "c", "d"};
  return names[index(c)];
}

Compartment parse_compartment(const std::string& text)
{
  if (text.size() == 1) {
    switch (std::tolower(static_cast<unsigned char>(text[0]))) {
    case 's': return Compartment::S;
    case 'e': return Compartment::E;
    case 'i': return Compartment::I;
    case 'r': return Compartment::R;
    case 'h': return Compartment::H;
    case 'c': return Compartment::C;
    case 'd': return Compartment::D;
    default: break;
    }
  }
  throw ConfigError("unknown compartment '" + text + "' (expected one of S,E,I,R,H,C,D)");
}

double BetaSeries::operator()(double t) const
{
  if (daily_.empty()) return constant_;
  if (t <= 0.0) return daily_.front();
  auto day = static_cast<std::size_t>(std::floor(t));
  return daily_[std::min(day, daily_.size() - 1)];
}

double BetaSeries::max() const
{
  return daily_.empty() ? constant_ : *std::max_element(daily_.begin(), daily_.end());
}

double BetaSeries::min() const
{
  return daily_.empty() ? constant_ : *std::min_element(daily_.begin(), daily_.end());
}

BetaSeries BetaSeries::load_csv(const std::string& path)
{
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open beta series '" + path + "'");
  std::string line;
  std::vector<double> values;
  int column = -1;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    if (column < 0) {
      auto it = std::find(cells.begin(), cells.end(), "beta");
      if (it == cells.end())
        throw ConfigError(path + ":1: beta series header must contain a 'beta' column");
      column = static_cast<int>(it - cells.begin());
      continue;
    }
    if (static_cast<int>(cells.size()) <= column)
      throw ConfigError(path + ":" + std::to_string(lineno) + ": missing beta value");
    try {
      values.push_back(std::stod(cells[column]));
    }
    catch (const std::exception&) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": invalid beta value '" +
                        cells[column] + "'");
    }
  }
  if (values.empty()) throw ConfigError(path + ": beta series is empty");
  return BetaSeries(std::move(values));
}

double ModelParams::velocity(Compartment c) const
{
  switch (c) {
  case Compartment::S: return v_s;
  case Compartment::E: return v_e;
  case Compartment::I: return v_i;
  case Compartment::R: return v_r;
  default: return 0.0;
  }
}

double ModelParams::max_velocity() const { return std::max({v_s, v_e, v_i, v_r}); }

double ModelParams::min_duration() const { return std::min({t_inc, t_inf, t_hosp, t_crit, t_imm}); }

std::vector<ParamViolation> validate_params(const ModelParams& p)
{
  std::vector<ParamViolation> out;
  auto fail = [&](const char* field, const std::string& msg) {
    out.push_back({field, std::string(field) + " must be " + msg});
  };
  auto finite = [&](const char* field, double v) {
    if (!std::isfinite(v)) {
      fail(field, "finite");
      return false;
    }
    return true;
  };
  auto duration = [&](const char* field, double v) {
    if (finite(field, v) && !(v > 0.0)) fail(field, "> 0");
  };
  auto nonneg = [&](const char* field, double v) {
    if (finite(field, v) && v < 0.0) fail(field, ">= 0");
  };
  auto fraction = [&](const char* field, double v) {
    if (!finite(field, v)) return;
    if (v < 0.0) fail(field, ">= 0");
    else if (v > 1.0) fail(field, "<= 1");
  };

  nonneg("alpha_i", p.alpha_i);
  nonneg("alpha_e", p.alpha_e);
  fraction("beta", p.beta.min());
  if (p.beta.max() != p.beta.min()) fraction("beta", p.beta.max());
  fraction("eps_hc", p.eps_hc);
  fraction("mu", p.mu);
  duration("t_inc", p.t_inc);
  duration("t_inf", p.t_inf);
  duration("t_hosp", p.t_hosp);
  duration("t_crit", p.t_crit);
  duration("t_imm", p.t_imm);
  nonneg("v_s", p.v_s);
  nonneg("v_e", p.v_e);
  nonneg("v_i", p.v_i);
  nonneg("v_r", p.v_r);
  if (p.population <= 0) fail("population", "> 0");
  return out;
}

double StatePoint::sum() const
{
  double total = 0.0;
  for (double x : v) total += x;
  return total;
}

bool StatePoint::finite() const
{
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

StatePoint operator+(const StatePoint& a, const StatePoint& b)
{
  StatePoint out;
  for (std::size_t n = 0; n < kNumCompartments; ++n) out.v[n] = a.v[n] + b.v[n];
  return out;
}

StatePoint operator*(double k, const StatePoint& a)
{
  StatePoint out;
  for (std::size_t n = 0; n < kNumCompartments; ++n) out.v[n] = k * a.v[n];
  return out;
}

void GridSpec::validate() const
{
  if (nx < 2) throw ConfigError("grid.nx must be >= 2");
  if (nt < 1) throw ConfigError("grid.nt must be >= 1");
  if (!(T > 0.0) || !std::isfinite(T)) throw ConfigError("grid.T must be > 0");
}

StateField::StateField(int nx_) : nx(nx_)
{
  for (auto& arr : u) arr.assign(size(), 0.0);
}

StatePoint StateField::at(std::size_t k) const
{
  StatePoint p;
  for (std::size_t n = 0; n < kNumCompartments; ++n) p.v[n] = u[n][k];
  return p;
}

void StateField::set(std::size_t k, const StatePoint& p)
{
  for (std::size_t n = 0; n < kNumCompartments; ++n) u[n][k] = p.v[n];
}

StatePoint reaction_rhs(const StatePoint& u, const ModelParams& p, double t)
{
  if (!u.finite()) throw NumericalError("non-finite state");
  const double s = u[Compartment::S], e = u[Compartment::E], i = u[Compartment::I];
  const double r = u[Compartment::R], h = u[Compartment::H], c = u[Compartment::C];
  const double beta = p.beta(t);

  // Each flux leaves one compartment and enters another, so the sum cancels.
  const double infection = p.alpha_i * s * i + p.alpha_e * s * e;
  const double waning = r / p.t_imm;
  const double onset = e / p.t_inc;
  const double resolved = i / p.t_inf;
  const double to_recovered = beta * resolved;
  const double to_hospital = resolved - to_recovered;
  const double discharged = h / p.t_hosp;
  const double to_critical = p.eps_hc * discharged;
  const double hosp_to_recovered = discharged - to_critical;
  const double critical_out = c / p.t_crit;
  const double died = p.mu * critical_out;
  const double crit_to_hosp = critical_out - died;

  StatePoint du;
  du[Compartment::S] = -infection + waning;
  du[Compartment::E] = infection - onset;
  du[Compartment::I] = onset - resolved;
  du[Compartment::R] = to_recovered + hosp_to_recovered - waning;
  du[Compartment::H] = to_hospital + crit_to_hosp - discharged;
  du[Compartment::C] = to_critical - critical_out;
  du[Compartment::D] = died;
  return du;
}

StatePoint reaction_rhs_counts(const StatePoint& U, const ModelParams& p, double t)
{
  const double n = static_cast<double>(p.population);
  return n * reaction_rhs((1.0 / n) * U, p, t);
}

std::vector<StatePoint> solve_ode(const ModelParams& p, const StatePoint& u0, const GridSpec& grid)
{
  grid.validate();
  const double tau = grid.tau();
  std::vector<StatePoint> traj;
  traj.reserve(static_cast<std::size_t>(grid.nt) + 1);
  traj.push_back(u0);
  StatePoint u = u0;
  for (long j = 0; j < grid.nt; ++j) {
    const double t = j * tau;
    try {
      const StatePoint k1 = reaction_rhs_counts(u, p, t);
      const StatePoint k2 = reaction_rhs_counts(u + (0.5 * tau) * k1, p, t + 0.5 * tau);
      const StatePoint k3 = reaction_rhs_counts(u + (0.5 * tau) * k2, p, t + 0.5 * tau);
      const StatePoint k4 = reaction_rhs_counts(u + tau * k3, p, t + tau);
      u = u + (tau / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    catch (const NumericalError&) {
      u.v.fill(std::nan(""));
    }
    if (!u.finite())
      throw NumericalError("ODE solution became non-finite at t=" + std::to_string(t + tau));
    traj.push_back(u);
  }
  return traj;
}

std::vector<double> total_density(const StateField& field)
{
  std::vector<double> n(field.size(), 0.0);
  for (const auto& arr : field.u)
    for (std::size_t k = 0; k < n.size(); ++k) n[k] += arr[k];
  return n;
}

double trapezoid(std::span<const double> values, double h)
{
  if (values.size() < 2) return 0.0;
  double acc = 0.5 * (values.front() + values.back());
  for (std::size_t k = 1; k + 1 < values.size(); ++k) acc += values[k];
  return acc * h;
}

}  // namespace seirhcd
