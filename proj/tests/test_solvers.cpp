#include "seirhcd/error.hpp"
#include "seirhcd/fdm.hpp"
#include "seirhcd/fem.hpp"
#include "seirhcd/observations.hpp"

#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <limits>

using namespace seirhcd;

namespace {

constexpr double kN = 2798170.0;

Background table1_background()
{
  return {32333 / kN, 219 / kN, 54 / kN, 4932 / kN};
}

StateField fig3_initial(int nx)
{
  return reference_initial_field(nx, 3508 / kN, table1_background());
}

ModelParams no_diffusion()
{
  ModelParams p;
  p.v_s = p.v_e = p.v_i = p.v_r = 0.0;
  return p;
}

StatePoint table1_density()
{
  StatePoint u;
  u[Compartment::S] = 2734917 / kN;
  u[Compartment::E] = 4329 / kN;
  u[Compartment::I] = 3508 / kN;
  u[Compartment::R] = 32333 / kN;
  u[Compartment::H] = 219 / kN;
  u[Compartment::C] = 54 / kN;
  u[Compartment::D] = 4932 / kN;
  return u;
}

StateField uniform_field(int nx, const StatePoint& u)
{
  StateField f(nx);
  for (std::size_t k = 0; k < f.size(); ++k) f.set(k, u);
  return f;
}

// Plain transcription of the explicit scheme, one node and one compartment at a time.
StateField transcribed_step(const StateField& u, const ModelParams& p, double tau)
{
  const int nx = u.nx;
  const double h = 1.0 / nx;
  StateField out(nx);
  std::vector<double> n(u.size());
  for (std::size_t k = 0; k < u.size(); ++k) {
    n[k] = 0.0;
    for (const auto& w : u.u) n[k] += w[k];
  }
  const double v[4] = {p.v_s, p.v_e, p.v_i, p.v_r};
  for (int k = 0; k < nx; ++k) {
    const double s = u.u[0][k], e = u.u[1][k], i = u.u[2][k], r = u.u[3][k];
    const double hh = u.u[4][k], c = u.u[5][k], d = u.u[6][k];
    const double b = p.beta(0.0);
    const double rs = -(p.alpha_i * s * i + p.alpha_e * s * e) + r / p.t_imm;
    const double re = (p.alpha_i * s * i + p.alpha_e * s * e) - e / p.t_inc;
    const double ri = e / p.t_inc - i / p.t_inf;
    const double rr = b * i / p.t_inf + (1.0 - p.eps_hc) * hh / p.t_hosp - r / p.t_imm;
    const double rh = (1.0 - b) * i / p.t_inf + (1.0 - p.mu) * c / p.t_crit - hh / p.t_hosp;
    const double rc = p.eps_hc * hh / p.t_hosp - c / p.t_crit;
    const double rd = p.mu * c / p.t_crit;
    const double react[4] = {rs, re, ri, rr};
    if (k >= 1) {
      for (int m = 0; m < 4; ++m) {
        const auto& w = u.u[m];
        const double grad_n = (n[k + 1] - n[k - 1]) / (2.0 * h);
        const double grad_u = (w[k + 1] - w[k - 1]) / (2.0 * h);
        const double lap = (w[k + 1] - 2.0 * w[k] + w[k - 1]) / (h * h);
        out.u[m][k] = w[k] + tau * (v[m] * grad_n * grad_u + v[m] * n[k] * lap + react[m]);
      }
    }
    out.u[4][k] = hh + tau * rh;
    out.u[5][k] = c + tau * rc;
    out.u[6][k] = d + tau * rd;
  }
  for (int m = 0; m < 4; ++m) out.u[m][0] = (4.0 * out.u[m][1] - out.u[m][2]) / 3.0;
  for (auto& w : out.u) w[nx] = 0.0;
  return out;
}

double max_abs_diff(const StateField& a, const StateField& b)
{
  double m = 0.0;
  for (std::size_t c = 0; c < kNumCompartments; ++c)
    for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a.u[c][k] - b.u[c][k]));
  return m;
}

// Endpoint error of a spatial run at one node against the RK4 system with the same step.
template <class Solve>
double endpoint_error(Solve solve, long nt, std::size_t node)
{
  const GridSpec grid{40, nt, 40.0};
  const ModelParams p = no_diffusion();
  const StatePoint u0 = table1_density();
  const StateField end = solve(p, uniform_field(grid.nx, u0), grid);
  const auto ode = solve_ode(p, kN * u0, grid);
  double err = 0.0;
  for (std::size_t c = 0; c < kNumCompartments; ++c)
    err = std::max(err, std::abs(end.u[c][node] - ode.back().v[c] / kN));
  return err;
}

StateField fdm_end(const ModelParams& p, const StateField& init, const GridSpec& grid)
{
  return solve_fdm(p, init, grid).trajectory.snapshots.back();
}

StateField fem_end(const ModelParams& p, const StateField& init, const GridSpec& grid)
{
  return solve_fem(p, init, grid).snapshots.back();
}

}  // namespace

TEST(FdmStep, UniformFieldWithoutDiffusionTakesEulerStep)
{
  const GridSpec grid{20, 1000, 10.0};
  const ModelParams p = no_diffusion();
  const StatePoint u = table1_density();
  const StateField next = fdm_step(uniform_field(20, u), p, grid, 0.0);
  const StatePoint du = reaction_rhs(u, p, 0.0);
  for (std::size_t k = 0; k < 20; ++k) {
    const StatePoint got = next.at(k);
    for (std::size_t c = 0; c < kNumCompartments; ++c)
      EXPECT_NEAR(got.v[c], u.v[c] + grid.tau() * du.v[c], 1e-15) << "k=" << k << " c=" << c;
  }
  for (const auto& w : next.u) EXPECT_EQ(w[20], 0.0);
}

TEST(FdmStep, ZeroStaysZero)
{
  const StateField next = fdm_step(StateField(16), ModelParams{}, GridSpec{16, 100, 1.0}, 0.0);
  EXPECT_EQ(max_abs_diff(next, StateField(16)), 0.0);
}

TEST(FdmStep, MatchesTranscriptionOnReferenceField)
{
  const GridSpec grid{200, 40000, 200.0};
  const ModelParams p;
  const StateField u0 = fig3_initial(200);
  const StateField a = fdm_step(u0, p, grid, 0.0);
  const StateField b = transcribed_step(u0, p, grid.tau());
  EXPECT_LE(max_abs_diff(a, b), 1e-13);
  // A second step from a state with nonzero diffusion history.
  EXPECT_LE(max_abs_diff(fdm_step(a, p, grid, grid.tau()), transcribed_step(b, p, grid.tau())), 1e-13);
}

TEST(FdmStep, NonFiniteNamesNodeAndStep)
{
  StateField u = uniform_field(10, table1_density());
  u[Compartment::I][4] = std::numeric_limits<double>::infinity();
  try {
    fdm_step(u, ModelParams{}, GridSpec{10, 100, 1.0}, 0.03);
    FAIL() << "expected NumericalError";
  }
  catch (const NumericalError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("k="), std::string::npos) << msg;
    EXPECT_NE(msg.find("j=4"), std::string::npos) << msg;
  }
}

TEST(ApplyBoundary, ZeroSlopeStencil)
{
  StateField u(8);
  u[Compartment::S][1] = u[Compartment::S][2] = 0.5;
  u[Compartment::E][1] = 0.4;
  u[Compartment::E][2] = 0.1;
  for (auto& w : u.u) w[8] = 0.3;
  apply_boundary(u);
  EXPECT_DOUBLE_EQ(u[Compartment::S][0], 0.5);
  EXPECT_DOUBLE_EQ(u[Compartment::E][0], 0.5);
  for (const auto& w : u.u) EXPECT_EQ(w[8], 0.0);
}

TEST(MaxStableTimestep, CflBound)
{
  ModelParams p;
  p.v_s = p.v_i = p.v_r = 0.0;
  p.v_e = 1e-3;
  EXPECT_DOUBLE_EQ(max_stable_timestep(p, GridSpec{100, 1, 1.0}, 1.0), 0.05);
  EXPECT_EQ(max_stable_timestep(no_diffusion(), GridSpec{100, 1, 1.0}, 1.0),
            std::numeric_limits<double>::infinity());
}

TEST(SolveFdm, RefusesUnstableStepWithSuggestion)
{
  const GridSpec grid{200, 100, 200.0};
  try {
    solve_fdm(ModelParams{}, fig3_initial(200), grid);
    FAIL() << "expected StabilityError";
  }
  catch (const StabilityError& e) {
    EXPECT_GT(e.suggested_nt(), 100);
    EXPECT_NO_THROW(solve_fdm(ModelParams{}, fig3_initial(200), GridSpec{200, e.suggested_nt(), 200.0}));
  }
}

TEST(SolveFdm, ZeroInitialDataStaysZero)
{
  const auto run = solve_fdm(ModelParams{}, StateField(20), GridSpec{20, 2000, 20.0});
  ASSERT_EQ(run.trajectory.snapshots.size(), 21u);
  for (const auto& f : run.trajectory.snapshots) EXPECT_EQ(max_abs_diff(f, StateField(20)), 0.0);
}

TEST(SolveFdm, ZeroDiffusionMatchesOdeAtFirstOrder)
{
  const double e1 = endpoint_error(fdm_end, 400, 10);
  const double e2 = endpoint_error(fdm_end, 800, 10);
  EXPECT_LT(e1, 0.05);
  EXPECT_GE(e1 / e2, 1.9);
  EXPECT_LE(e1 / e2, 2.3);
}

TEST(SolveFdm, ZeroDiffusionPreservesTotalDensity)
{
  const GridSpec grid{50, 20000, 200.0};
  const StateField init = fig3_initial(50);
  const auto n0 = total_density(init);
  const auto run = solve_fdm(no_diffusion(), init, grid);
  for (const auto& f : run.trajectory.snapshots) {
    const auto n = total_density(f);
    for (int k = 1; k < 50; ++k) EXPECT_NEAR(n[k], n0[k], 1e-12 * n0[k]);
  }
}

TEST(Tridiagonal, IdentityReturnsRhs)
{
  TridiagonalSystem s(4);
  s.diag = {1, 1, 1, 1};
  s.rhs = {3, -1, 2.5, 7};
  EXPECT_EQ(tridiagonal_solve(s), s.rhs);
}

TEST(Tridiagonal, MatchesDenseSolve)
{
  TridiagonalSystem s(3);
  s.diag = {4, 5, 3};
  s.super = {1, 2, 0};
  s.sub = {0, -1, 1.5};
  s.rhs = {1, 2, 3};
  Eigen::Matrix3d a;
  a << 4, 1, 0, -1, 5, 2, 0, 1.5, 3;
  const Eigen::Vector3d x = a.lu().solve(Eigen::Vector3d(1, 2, 3));
  const auto got = tridiagonal_solve(s);
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(got[k], x[k], 1e-13);

  TridiagonalSystem scaled = s;
  const double f[3] = {10.0, -0.25, 3e5};
  for (int k = 0; k < 3; ++k) {
    scaled.sub[k] *= f[k];
    scaled.diag[k] *= f[k];
    scaled.super[k] *= f[k];
    scaled.rhs[k] *= f[k];
  }
  const auto y = tridiagonal_solve(scaled);
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(y[k], got[k], 1e-13);
}

TEST(Tridiagonal, ZeroPivotNamesRow)
{
  TridiagonalSystem s(3);
  s.diag = {1, 1, 1};
  s.super = {1, 0, 0};
  s.sub = {0, 1, 0};
  try {
    tridiagonal_solve(s);
    FAIL() << "expected NumericalError";
  }
  catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("row 1"), std::string::npos) << e.what();
  }
}

TEST(FemAssembly, ElementBlocksAndMassTotal)
{
  const auto k = ElementMatrices::stiffness(0.1);
  EXPECT_DOUBLE_EQ(k[0][0], 10.0);
  EXPECT_DOUBLE_EQ(k[0][1], -10.0);
  const auto m = ElementMatrices::mass(0.1);
  EXPECT_DOUBLE_EQ(m[0][0], 0.1 / 3.0);
  EXPECT_DOUBLE_EQ(m[1][0], 0.1 / 6.0);

  // 1^T M 1 is the length of the interval; K annihilates constants.
  const TridiagonalSystem mass = assemble_mass(11, 0.1);
  double total = 0.0;
  for (std::size_t r = 0; r < 11; ++r)
    total += mass.diag[r] + (r > 0 ? mass.sub[r] : 0.0) + (r < 10 ? mass.super[r] : 0.0);
  EXPECT_NEAR(total, 1.0, 1e-14);
  const TridiagonalSystem stiff = assemble_stiffness(std::vector<double>(11, 2.0), 0.5, 0.1);
  for (std::size_t r = 0; r < 11; ++r) {
    const double row = stiff.diag[r] + (r > 0 ? stiff.sub[r] : 0.0) + (r < 10 ? stiff.super[r] : 0.0);
    EXPECT_NEAR(row, 0.0, 1e-12);
  }
}

TEST(FemAssembly, PureMassSystemReturnsPreviousState)
{
  ModelParams p = no_diffusion();
  p.alpha_i = p.alpha_e = 0.0;
  StateField u(16);
  for (int k = 0; k <= 16; ++k) u[Compartment::S][k] = std::cos(1.5 * k / 16.0) * (16 - k) / 16.0;
  const auto sys = assemble_step(u, p, GridSpec{16, 10, 1.0}, 0.0, Compartment::S);
  const auto x = tridiagonal_solve(sys);
  for (int k = 0; k <= 16; ++k) EXPECT_NEAR(x[k], u[Compartment::S][k], 1e-14);
}

TEST(SolveFem, ZeroInitialDataStaysZero)
{
  const auto traj = solve_fem(ModelParams{}, StateField(20), GridSpec{20, 200, 5.0});
  for (const auto& f : traj.snapshots) EXPECT_EQ(max_abs_diff(f, StateField(20)), 0.0);
}

TEST(SolveFem, ZeroDiffusionMatchesOdeAtFirstOrder)
{
  const double e1 = endpoint_error(fem_end, 400, 10);
  const double e2 = endpoint_error(fem_end, 800, 10);
  EXPECT_LT(e1, 0.05);
  EXPECT_GE(e1 / e2, 1.7);
  EXPECT_LE(e1 / e2, 2.3);
}

TEST(SolveFem, AgreesWithFdmOnShortHorizon)
{
  const GridSpec grid{100, 2000, 20.0};
  const ModelParams p;
  const StateField init = fig3_initial(100);
  const auto a = solve_fdm(p, init, grid).trajectory;
  const auto b = solve_fem(p, init, grid);
  ASSERT_EQ(a.snapshots.size(), b.snapshots.size());
  for (std::size_t d = 1; d < a.snapshots.size(); ++d) {
    for (Compartment c : {Compartment::I, Compartment::C, Compartment::D}) {
      const double x = trapezoid(a.snapshots[d][c], grid.h());
      const double y = trapezoid(b.snapshots[d][c], grid.h());
      EXPECT_NEAR(x, y, 0.02 * std::abs(y)) << "day " << d << " " << name(c);
    }
  }
}
