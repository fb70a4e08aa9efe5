#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace seirhcd {

/// Compartments of the SEIR-HCD model, in storage order.
enum class Compartment : std::size_t { S = 0, E, I, R, H, C, D };

inline constexpr std::size_t kNumCompartments = 7;
inline constexpr std::array<Compartment, 4> kDiffusing = {Compartment::S, Compartment::E,
                                                         Compartment::I, Compartment::R};
inline constexpr std::array<Compartment, 3> kStationary = {Compartment::H, Compartment::C,
                                                          Compartment::D};

constexpr std::size_t index(Compartment c) { return static_cast<std::size_t>(c); }
const char* name(Compartment c);
/// Parses "s", "I", "d", ... (case-insensitive); throws ConfigError.
Compartment parse_compartment(const std::string& text);

/// Recovery share beta(t): a piecewise-constant daily series, or a constant when the
/// series is empty. Day d covers [d, d+1); times beyond the series reuse its last value.
class BetaSeries {
public:
  BetaSeries() = default;
  explicit BetaSeries(double constant) : constant_(constant) {}
  explicit BetaSeries(std::vector<double> daily) : daily_(std::move(daily)) {}

  double operator()(double t) const;
  double max() const;
  double min() const;
  bool is_constant() const { return daily_.empty(); }
  const std::vector<double>& daily() const { return daily_; }

  /// Reads a CSV with header `day,beta` (or a single `beta` column).
  static BetaSeries load_csv(const std::string& path);

private:
  double constant_ = 0.4;
  std::vector<double> daily_;
};

struct ModelParams {
  double alpha_i = 0.3856;  // 1/day
  double alpha_e = 0.0922;  // 1/day
  BetaSeries beta{0.4};
  double eps_hc = 0.0376;
  double mu = 0.4754;
  double t_inc = 5.0;  // days
  double t_inf = 8.0;
  double t_hosp = 7.0;
  double t_crit = 9.0;
  double t_imm = 175.0;
  double v_s = 5e-5;  // 1/(person*day)
  double v_e = 1e-3;
  double v_i = 1e-10;
  double v_r = 5e-5;
  long population = 2798170;

  double velocity(Compartment c) const;
  double max_velocity() const;
  double min_duration() const;
};

struct ParamViolation {
  std::string field;
  std::string message;
};

std::vector<ParamViolation> validate_params(const ModelParams& p);

/// State of all seven compartments at one location (densities) or in aggregate (counts).
struct StatePoint {
  std::array<double, kNumCompartments> v{};

  double& operator[](Compartment c) { return v[index(c)]; }
  double operator[](Compartment c) const { return v[index(c)]; }
  double sum() const;
  bool finite() const;
};

StatePoint operator+(const StatePoint& a, const StatePoint& b);
StatePoint operator*(double k, const StatePoint& a);

struct GridSpec {
  int nx = 200;       // spatial intervals on [0, 1]
  long nt = 40000;    // time steps
  double T = 200.0;   // horizon, days

  double h() const { return 1.0 / nx; }
  double tau() const { return T / static_cast<double>(nt); }
  double x(int k) const { return k * h(); }
  /// Throws ConfigError unless nx >= 2, nt >= 1 and T > 0.
  void validate() const;
};

/// Seven density arrays on the uniform grid x_k = k*h, k = 0..nx.
struct StateField {
  int nx = 0;
  std::array<std::vector<double>, kNumCompartments> u;

  StateField() = default;
  explicit StateField(int nx_);

  std::size_t size() const { return static_cast<std::size_t>(nx) + 1; }
  double h() const { return 1.0 / nx; }
  std::vector<double>& operator[](Compartment c) { return u[index(c)]; }
  const std::vector<double>& operator[](Compartment c) const { return u[index(c)]; }
  StatePoint at(std::size_t k) const;
  void set(std::size_t k, const StatePoint& p);
};

/// Reaction part of the density equations (no diffusion); beta is evaluated at t.
/// Throws NumericalError("non-finite state") for non-finite input.
StatePoint reaction_rhs(const StatePoint& u, const ModelParams& p, double t);

/// Same as reaction_rhs but for aggregate counts: infection terms are divided by N.
StatePoint reaction_rhs_counts(const StatePoint& U, const ModelParams& p, double t);

/// Classical RK4 on the aggregate-count ODE system, sampled at t_j = j*tau, j = 0..nt.
std::vector<StatePoint> solve_ode(const ModelParams& p, const StatePoint& u0, const GridSpec& grid);

/// Pointwise sum of the seven compartments.
std::vector<double> total_density(const StateField& field);

/// Composite trapezoid rule on a uniform grid with spacing h.
double trapezoid(std::span<const double> values, double h);

}  // namespace seirhcd
