#include "seirhcd/fdm.hpp"

#include "seirhcd/error.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <limits>

namespace seirhcd {

namespace {

struct ReactionCoefficients {
  double alpha_i, alpha_e, beta, eps_hc, mu;
  double inv_inc, inv_inf, inv_hosp, inv_crit, inv_imm;

  ReactionCoefficients(const ModelParams& p, double t)
      : alpha_i(p.alpha_i), alpha_e(p.alpha_e), beta(p.beta(t)), eps_hc(p.eps_hc), mu(p.mu),
        inv_inc(1.0 / p.t_inc), inv_inf(1.0 / p.t_inf), inv_hosp(1.0 / p.t_hosp),
        inv_crit(1.0 / p.t_crit), inv_imm(1.0 / p.t_imm)
  {
  }
};

double max_of(const std::vector<double>& v)
{
  return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end());
}

long suggested_steps(double T, double tau_max)
{
  return static_cast<long>(std::ceil(T / tau_max));
}

}  // namespace

StateField fdm_step(const StateField& u, const ModelParams& p, const GridSpec& grid, double t)
{
  const int nx = u.nx;
  const double tau = grid.tau();
  const double h = 1.0 / nx;
  const double inv_2h = 1.0 / (2.0 * h);
  const double inv_h2 = 1.0 / (h * h);
  const ReactionCoefficients rc(p, t);
  const std::vector<double> n = total_density(u);

  const auto& s = u[Compartment::S];
  const auto& e = u[Compartment::E];
  const auto& i = u[Compartment::I];
  const auto& r = u[Compartment::R];
  const auto& hh = u[Compartment::H];
  const auto& c = u[Compartment::C];
  const auto& d = u[Compartment::D];

  StateField next(nx);
  const std::array<double, 4> v = {p.v_s, p.v_e, p.v_i, p.v_r};

  for (int k = 0; k < nx; ++k) {
    const double infection = rc.alpha_i * s[k] * i[k] + rc.alpha_e * s[k] * e[k];
    const double waning = rc.inv_imm * r[k];
    const double onset = rc.inv_inc * e[k];
    const double resolved = rc.inv_inf * i[k];
    const double to_recovered = rc.beta * resolved;
    const double discharged = rc.inv_hosp * hh[k];
    const double to_critical = rc.eps_hc * discharged;
    const double critical_out = rc.inv_crit * c[k];
    const double died = rc.mu * critical_out;

    const std::array<double, 4> reaction = {
        -infection + waning,
        infection - onset,
        onset - resolved,
        to_recovered + (discharged - to_critical) - waning,
    };

    if (k > 0) {
      const double dn = (n[k + 1] - n[k - 1]) * inv_2h;
      for (std::size_t m = 0; m < 4; ++m) {
        const auto& w = u.u[m];
        const double diffusion = v[m] * dn * (w[k + 1] - w[k - 1]) * inv_2h +
                                 v[m] * n[k] * (w[k + 1] - 2.0 * w[k] + w[k - 1]) * inv_h2;
        next.u[m][k] = w[k] + tau * (diffusion + reaction[m]);
      }
    }
    next[Compartment::H][k] =
        hh[k] + tau * ((resolved - to_recovered) + (critical_out - died) - discharged);
    next[Compartment::C][k] = c[k] + tau * (to_critical - critical_out);
    next[Compartment::D][k] = d[k] + tau * died;
  }

  apply_boundary(next);

  for (std::size_t m = 0; m < kNumCompartments; ++m) {
    for (int k = 0; k <= nx; ++k) {
      if (!std::isfinite(next.u[m][k])) {
        const long j = std::lround(t / tau);
        throw NumericalError(fmt::format("non-finite {} at k={}, j={} (t={:.6g})",
                                         name(static_cast<Compartment>(m)), k, j + 1, t + tau));
      }
    }
  }
  return next;
}

void apply_boundary(StateField& u)
{
  const int nx = u.nx;
  for (Compartment c : kDiffusing) {
    auto& w = u[c];
    w[0] = (4.0 * w[1] - w[2]) / 3.0;
  }
  for (auto& w : u.u) w[nx] = 0.0;
}

StateField apply_boundary(StateField&& u)
{
  apply_boundary(u);
  return std::move(u);
}

double max_stable_timestep(const ModelParams& p, const GridSpec& grid, double n_max)
{
  const double vmax = p.max_velocity();
  if (vmax <= 0.0 || n_max <= 0.0) return std::numeric_limits<double>::infinity();
  const double h = grid.h();
  return h * h / (2.0 * n_max * vmax);
}

std::size_t clamp_negative(StateField& u)
{
  std::size_t count = 0;
  for (auto& w : u.u)
    for (double& x : w)
      if (x < 0.0) {
        x = 0.0;
        ++count;
      }
  return count;
}

FdmRun solve_fdm(const ModelParams& p, const StateField& init, const GridSpec& grid,
                 const FdmOptions& options)
{
  grid.validate();
  if (init.nx != grid.nx)
    throw ConfigError(fmt::format("initial field has nx={} but grid has nx={}", init.nx, grid.nx));

  const double tau = grid.tau();
  const double tau_diff = max_stable_timestep(p, grid, max_of(total_density(init)));
  if (tau > tau_diff)
    throw StabilityError(fmt::format("time step {:.4g} exceeds the diffusion bound {:.4g}; "
                                     "use nt >= {}",
                                     tau, tau_diff, suggested_steps(grid.T, tau_diff)),
                         suggested_steps(grid.T, tau_diff));
  const double tau_react = p.min_duration();
  if (tau > tau_react)
    throw StabilityError(fmt::format("time step {:.4g} exceeds the shortest duration {:.4g}; "
                                     "use nt >= {}",
                                     tau, tau_react, suggested_steps(grid.T, tau_react)),
                         suggested_steps(grid.T, tau_react));

  FdmRun run{p, grid, init, {}};
  Trajectory& traj = run.trajectory;
  StateField u = init;
  traj.times.push_back(0.0);
  traj.snapshots.push_back(u);

  long next_day = 1;
  for (long j = 0; j < grid.nt; ++j) {
    u = fdm_step(u, p, grid, j * tau);
    if (options.clamp) {
      const std::size_t clamped = clamp_negative(u);
      if (clamped > 0) {
        traj.clamp_count += clamped;
        apply_boundary(u);
        traj.clamp_count += clamp_negative(u);
      }
    }
    const double t = (j + 1) * tau;
    if (options.full_resolution) {
      traj.times.push_back(t);
      traj.snapshots.push_back(u);
    }
    else if (next_day <= grid.T && t >= next_day - 0.5 * tau) {
      traj.times.push_back(static_cast<double>(next_day));
      traj.snapshots.push_back(u);
      ++next_day;
    }
  }
  return run;
}

Trajectory solve_fdm_adaptive(const ModelParams& p, const StateField& init,
                              const AdaptiveFdmOptions& options)
{
  if (init.nx != options.nx)
    throw ConfigError(
        fmt::format("initial field has nx={} but options have nx={}", init.nx, options.nx));
  const long days = std::lround(std::ceil(options.T));
  const double rate_floor = 1.0 / p.min_duration();

  Trajectory traj;
  StateField u = init;
  traj.times.push_back(0.0);
  traj.snapshots.push_back(u);
  long total_steps = 0;

  for (long day = 0; day < days; ++day) {
    const double n_max = max_of(total_density(u));
    const double lambda = (p.alpha_i + p.alpha_e) * n_max + rate_floor;
    GridSpec one_day{options.nx, 1, 1.0};
    double tau = std::min(max_stable_timestep(p, one_day, n_max), 1.0 / lambda);
    tau *= options.safety;
    const long steps = std::max(1L, static_cast<long>(std::ceil(1.0 / tau)));
    total_steps += steps;
    if (total_steps > options.max_steps)
      throw NumericalError(fmt::format("step budget of {} exceeded on day {}", options.max_steps, day));
    one_day.nt = steps;
    const double dt = one_day.tau();
    for (long j = 0; j < steps; ++j) {
      u = fdm_step(u, p, one_day, day + j * dt);
      const std::size_t clamped = clamp_negative(u);
      if (clamped > 0) {
        traj.clamp_count += clamped;
        apply_boundary(u);
        traj.clamp_count += clamp_negative(u);
      }
    }
    traj.times.push_back(static_cast<double>(day + 1));
    traj.snapshots.push_back(u);
  }
  return traj;
}

}  // namespace seirhcd
