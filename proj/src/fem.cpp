#include "seirhcd/fem.hpp"

#include "seirhcd/error.hpp"
#include "seirhcd/fdm.hpp"

#include <cmath>
#include <fmt/format.h>

namespace seirhcd {

TridiagonalSystem assemble_stiffness(const std::vector<double>& n, double v, double h)
{
  const std::size_t nodes = n.size();
  TridiagonalSystem sys(nodes);
  const auto K = ElementMatrices::stiffness(h);
  for (std::size_t el = 0; el + 1 < nodes; ++el) {
    const double coef = v * 0.5 * (n[el] + n[el + 1]);
    sys.diag[el] += coef * K[0][0];
    sys.super[el] += coef * K[0][1];
    sys.sub[el + 1] += coef * K[1][0];
    sys.diag[el + 1] += coef * K[1][1];
  }
  return sys;
}

TridiagonalSystem assemble_mass(std::size_t nodes, double h)
{
  TridiagonalSystem sys(nodes);
  const auto M = ElementMatrices::mass(h);
  for (std::size_t el = 0; el + 1 < nodes; ++el) {
    sys.diag[el] += M[0][0];
    sys.super[el] += M[0][1];
    sys.sub[el + 1] += M[1][0];
    sys.diag[el + 1] += M[1][1];
  }
  return sys;
}

namespace {

/// Linear loss coefficient and source of one diffusing compartment, frozen at u.
void reaction_split(const StateField& u, const ModelParams& p, double t, Compartment c,
                    std::vector<double>& loss, std::vector<double>& source)
{
  const auto& s = u[Compartment::S];
  const auto& e = u[Compartment::E];
  const auto& i = u[Compartment::I];
  const auto& r = u[Compartment::R];
  const auto& h = u[Compartment::H];
  const double beta = p.beta(t);
  loss.resize(u.size());
  source.resize(u.size());
  for (std::size_t k = 0; k < u.size(); ++k) {
    switch (c) {
    case Compartment::S:
      loss[k] = p.alpha_i * i[k] + p.alpha_e * e[k];
      source[k] = r[k] / p.t_imm;
      break;
    case Compartment::E:
      loss[k] = 1.0 / p.t_inc - p.alpha_e * s[k];
      source[k] = p.alpha_i * s[k] * i[k];
      break;
    case Compartment::I:
      loss[k] = 1.0 / p.t_inf;
      source[k] = e[k] / p.t_inc;
      break;
    case Compartment::R:
      loss[k] = 1.0 / p.t_imm;
      source[k] = beta * i[k] / p.t_inf + (1.0 - p.eps_hc) * h[k] / p.t_hosp;
      break;
    default:
      throw ConfigError(fmt::format("compartment {} does not diffuse", name(c)));
    }
  }
}

}  // namespace

TridiagonalSystem assemble_step(const StateField& u_prev, const ModelParams& p,
                                const GridSpec& grid, double t, Compartment compartment)
{
  const std::size_t nodes = u_prev.size();
  const double h = 1.0 / u_prev.nx;
  const double inv_tau = 1.0 / grid.tau();

  std::vector<double> loss, source;
  reaction_split(u_prev, p, t, compartment, loss, source);

  TridiagonalSystem sys =
      assemble_stiffness(total_density(u_prev), p.velocity(compartment), h);
  const TridiagonalSystem M = assemble_mass(nodes, h);
  const auto& w = u_prev[compartment];

  for (std::size_t k = 0; k < nodes; ++k) {
    sys.diag[k] += M.diag[k] * (inv_tau + loss[k]);
    double rhs = M.diag[k] * (w[k] * inv_tau + source[k]);
    if (k > 0) {
      sys.sub[k] += M.sub[k] * (inv_tau + loss[k - 1]);
      rhs += M.sub[k] * (w[k - 1] * inv_tau + source[k - 1]);
    }
    if (k + 1 < nodes) {
      sys.super[k] += M.super[k] * (inv_tau + loss[k + 1]);
      rhs += M.super[k] * (w[k + 1] * inv_tau + source[k + 1]);
    }
    sys.rhs[k] = rhs;
  }

  // Dirichlet row at x = 1.
  const std::size_t last = nodes - 1;
  sys.sub[last] = 0.0;
  sys.diag[last] = 1.0;
  sys.rhs[last] = 0.0;

  for (std::size_t k = 0; k < nodes; ++k)
    if (sys.diag[k] == 0.0 || !std::isfinite(sys.diag[k]))
      throw NumericalError(fmt::format("degenerate assembly at row {}", k));
  return sys;
}

std::vector<double> tridiagonal_solve(const TridiagonalSystem& sys)
{
  const std::size_t n = sys.size();
  std::vector<double> c(n, 0.0), d(n, 0.0), x(n, 0.0);
  if (n == 0) return x;
  double pivot = sys.diag[0];
  if (pivot == 0.0) throw NumericalError("zero pivot in tridiagonal solve at row 0");
  c[0] = n > 1 ? sys.super[0] / pivot : 0.0;
  d[0] = sys.rhs[0] / pivot;
  for (std::size_t k = 1; k < n; ++k) {
    pivot = sys.diag[k] - sys.sub[k] * c[k - 1];
    if (pivot == 0.0 || !std::isfinite(pivot))
      throw NumericalError(fmt::format("zero pivot in tridiagonal solve at row {}", k));
    c[k] = k + 1 < n ? sys.super[k] / pivot : 0.0;
    d[k] = (sys.rhs[k] - sys.sub[k] * d[k - 1]) / pivot;
  }
  x[n - 1] = d[n - 1];
  for (std::size_t k = n - 1; k-- > 0;) x[k] = d[k] - c[k] * x[k + 1];
  return x;
}

Trajectory solve_fem(const ModelParams& p, const StateField& init, const GridSpec& grid)
{
  grid.validate();
  if (init.nx != grid.nx)
    throw ConfigError(fmt::format("initial field has nx={} but grid has nx={}", init.nx, grid.nx));

  const double tau = grid.tau();
  Trajectory traj;
  StateField u = init;
  traj.times.push_back(0.0);
  traj.snapshots.push_back(u);

  long next_day = 1;
  for (long j = 0; j < grid.nt; ++j) {
    const double t = j * tau;
    StateField next(u.nx);

    // h, c, d do not move: explicit reaction update.
    const double beta = p.beta(t);
    for (std::size_t k = 0; k < u.size(); ++k) {
      const double resolved = u[Compartment::I][k] / p.t_inf;
      const double discharged = u[Compartment::H][k] / p.t_hosp;
      const double critical_out = u[Compartment::C][k] / p.t_crit;
      next[Compartment::H][k] = u[Compartment::H][k] +
          tau * ((1.0 - beta) * resolved + (1.0 - p.mu) * critical_out - discharged);
      next[Compartment::C][k] = u[Compartment::C][k] + tau * (p.eps_hc * discharged - critical_out);
      next[Compartment::D][k] = u[Compartment::D][k] + tau * p.mu * critical_out;
    }
    for (Compartment c : kStationary) next[c].back() = 0.0;

    for (Compartment c : kDiffusing) next[c] = tridiagonal_solve(assemble_step(u, p, grid, t, c));

    for (std::size_t m = 0; m < kNumCompartments; ++m)
      for (std::size_t k = 0; k < u.size(); ++k)
        if (!std::isfinite(next.u[m][k]))
          throw NumericalError(fmt::format("non-finite {} at k={}, j={} (t={:.6g})",
                                           name(static_cast<Compartment>(m)), k, j + 1, t + tau));
    traj.clamp_count += clamp_negative(next);
    u = std::move(next);

    const double t_next = (j + 1) * tau;
    if (next_day <= grid.T && t_next >= next_day - 0.5 * tau) {
      traj.times.push_back(static_cast<double>(next_day));
      traj.snapshots.push_back(u);
      ++next_day;
    }
  }
  return traj;
}

}  // namespace seirhcd
