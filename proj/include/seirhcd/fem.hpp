#pragma once

#include "seirhcd/model.hpp"
#include "seirhcd/trajectory.hpp"

#include <array>
#include <vector>

namespace seirhcd {

/// Banded system sub[k]*x[k-1] + diag[k]*x[k] + super[k]*x[k+1] = rhs[k].
/// sub[0] and super[n-1] are ignored.
struct TridiagonalSystem {
  std::vector<double> sub, diag, super, rhs;

  TridiagonalSystem() = default;
  explicit TridiagonalSystem(std::size_t n) : sub(n, 0.0), diag(n, 0.0), super(n, 0.0), rhs(n, 0.0) {}
  std::size_t size() const { return diag.size(); }
};

/// Linear-element blocks on an element of length h.
struct ElementMatrices {
  using Block = std::array<std::array<double, 2>, 2>;

  static Block stiffness(double h) { return {{{1.0 / h, -1.0 / h}, {-1.0 / h, 1.0 / h}}}; }
  static Block mass(double h) { return {{{h / 3.0, h / 6.0}, {h / 6.0, h / 3.0}}}; }
};

/// Global stiffness of -d/dx(n v du/dx) with the element coefficient v * (n_k + n_{k+1})/2.
/// Natural (zero-flux) ends; no Dirichlet row applied.
TridiagonalSystem assemble_stiffness(const std::vector<double>& n, double v, double h);

/// Global consistent mass matrix.
TridiagonalSystem assemble_mass(std::size_t nodes, double h);

/// System for one diffusing compartment at the new time level:
///   (M/tau + K + M diag(a)) u_new = M (u_prev/tau + b)
/// where a(x) is the linear loss coefficient and b(x) the source, both frozen at u_prev.
/// The last row is replaced by the Dirichlet row u = 0. Throws NumericalError
/// ("degenerate assembly") when a diagonal entry vanishes.
TridiagonalSystem assemble_step(const StateField& u_prev, const ModelParams& p,
                                const GridSpec& grid, double t, Compartment compartment);

/// Thomas algorithm. Throws NumericalError naming the row of a zero pivot.
std::vector<double> tridiagonal_solve(const TridiagonalSystem& sys);

/// Semi-implicit finite-element run with daily snapshots.
Trajectory solve_fem(const ModelParams& p, const StateField& init, const GridSpec& grid);

}  // namespace seirhcd
