#pragma once

#include "seirhcd/model.hpp"
#include "seirhcd/trajectory.hpp"

namespace seirhcd {

struct FdmOptions {
  bool full_resolution = false;  // store every time step instead of daily slices
  bool clamp = true;             // reset negative densities to 0 after each step
};

struct FdmRun {
  ModelParams params;
  GridSpec grid;
  StateField init;
  Trajectory trajectory;
};

/// One explicit step of the finite-difference scheme from time t_j.
///
/// Interior nodes k = 1..nx-1 of s, e, i, r get the product-rule diffusion term
///   v * (n_{k+1} - n_{k-1})/(2h) * (u_{k+1} - u_{k-1})/(2h) + v * n_k * (u_{k+1} - 2u_k + u_{k-1})/h^2
/// with n = total density of the incoming state, plus the reaction terms. h, c, d follow the
/// reaction terms alone at k = 0..nx-1. apply_boundary() is applied before returning.
/// Throws NumericalError naming (k, j) of the first non-finite value.
StateField fdm_step(const StateField& u, const ModelParams& p, const GridSpec& grid, double t);

/// Zero-slope one-sided stencil at x = 0 for s, e, i, r: u_0 = (4u_1 - u_2)/3.
/// Dirichlet u = 0 at x = 1 for all seven compartments.
void apply_boundary(StateField& u);
StateField apply_boundary(StateField&& u);

/// Diffusion CFL bound tau_max = h^2 / (2 * n_max * max(v)); +infinity when all v are 0.
double max_stable_timestep(const ModelParams& p, const GridSpec& grid, double n_max);

/// Resets negative densities to 0 and returns how many were reset.
std::size_t clamp_negative(StateField& u);

/// Explicit run to grid.T with daily snapshots (including t = 0).
/// Throws StabilityError with a suggested nt when tau exceeds the diffusion bound or the
/// shortest duration.
FdmRun solve_fdm(const ModelParams& p, const StateField& init, const GridSpec& grid,
                 const FdmOptions& options = {});

/// Settings for runs whose parameters come from wide sampling boxes.
struct AdaptiveFdmOptions {
  int nx = 32;
  double T = 200.0;
  double safety = 0.8;
  long max_steps = 4'000'000;
};

/// Same scheme, but each day is split into as many equal steps as the current total density
/// and reaction rates require. Densities may grow when sampled fractions exceed 1, so the
/// step is re-derived every day. Throws NumericalError on blow-up or when max_steps is hit.
Trajectory solve_fdm_adaptive(const ModelParams& p, const StateField& init,
                              const AdaptiveFdmOptions& options);

}  // namespace seirhcd
