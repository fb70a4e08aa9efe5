#include "seirhcd/error.hpp"
#include "seirhcd/sampling.hpp"
#include "seirhcd/sobol.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <sstream>

using namespace seirhcd;

namespace {

ParameterBounds unit_box(std::size_t k)
{
  ParameterBounds b;
  for (std::size_t i = 0; i < k; ++i) {
    b.names.push_back("q" + std::to_string(i + 1));
    b.lo.push_back(0.0);
    b.hi.push_back(1.0);
  }
  return b;
}

template <class F>
std::vector<double> evaluate(const SaltelliDesign& d, F f)
{
  std::vector<double> y(static_cast<std::size_t>(d.rows.rows()));
  for (Eigen::Index r = 0; r < d.rows.rows(); ++r) y[static_cast<std::size_t>(r)] = f(d.rows.row(r));
  return y;
}

}  // namespace

TEST(Bounds, JsonRoundTripKeepsOrder)
{
  const ParameterBounds b = bounds_from_json(R"({"v_s": [0, 1e-3], "alpha_i": [0.1, 2]})");
  ASSERT_EQ(b.size(), 2u);
  EXPECT_EQ(b.names[0], "v_s");
  EXPECT_EQ(b.hi[1], 2.0);
  const ParameterBounds back = bounds_from_json(bounds_to_json(b));
  EXPECT_EQ(back.names, b.names);
  EXPECT_EQ(back.lo, b.lo);
  EXPECT_EQ(back.hi, b.hi);
}

TEST(Bounds, RejectsDegenerateRanges)
{
  EXPECT_THROW(bounds_from_json(R"({"a": [1, 1]})"), ConfigError);
  EXPECT_THROW(bounds_from_json(R"({"a": [2, 1]})"), ConfigError);
  EXPECT_THROW(bounds_from_json(R"({"a": [0]})"), ConfigError);
  EXPECT_THROW(bounds_from_json(R"({})"), ConfigError);
}

TEST(Bounds, UnitMappingInverts)
{
  const ParameterBounds b = bounds_from_json(R"({"a": [-2, 6], "b": [10, 11]})");
  const Eigen::Vector2d u(0.25, 0.5);
  const Eigen::VectorXd q = b.from_unit(u);
  EXPECT_DOUBLE_EQ(q[0], 0.0);
  EXPECT_DOUBLE_EQ(q[1], 10.5);
  EXPECT_TRUE(b.to_unit(q).isApprox(u));
}

TEST(SobolPoints, InUnitCubeAndSeeded)
{
  const Eigen::MatrixXd a = sobol_points(256, 5, 3);
  EXPECT_GE(a.minCoeff(), 0.0);
  EXPECT_LT(a.maxCoeff(), 1.0);
  EXPECT_EQ(a, sobol_points(256, 5, 3));
  EXPECT_NE(a, sobol_points(256, 5, 4));
  // A digitally shifted (0, m, s)-net in the first coordinate: one point per 1/256 interval.
  std::set<int> cells;
  for (Eigen::Index r = 0; r < 256; ++r) cells.insert(static_cast<int>(a(r, 0) * 256));
  EXPECT_EQ(cells.size(), 256u);
}

TEST(Saltelli, RowCountAndBlocks)
{
  const ParameterBounds b = bounds_from_json(R"({"a": [1, 2], "b": [-1, 0]})");
  const SaltelliDesign d = saltelli_sample(b, 4, 1);
  ASSERT_EQ(d.rows.rows(), 16);
  for (Eigen::Index r = 0; r < 16; ++r) {
    EXPECT_GE(d.rows(r, 0), 1.0);
    EXPECT_LE(d.rows(r, 0), 2.0);
    EXPECT_GE(d.rows(r, 1), -1.0);
    EXPECT_LE(d.rows(r, 1), 0.0);
  }
  for (std::size_t j = 0; j < 4; ++j) {
    const auto a = d.rows.row(static_cast<Eigen::Index>(d.row_a(j)));
    const auto bb = d.rows.row(static_cast<Eigen::Index>(d.row_b(j)));
    const auto ab0 = d.rows.row(static_cast<Eigen::Index>(d.row_ab(0, j)));
    const auto ab1 = d.rows.row(static_cast<Eigen::Index>(d.row_ab(1, j)));
    EXPECT_EQ(ab0[0], bb[0]);
    EXPECT_EQ(ab0[1], a[1]);
    EXPECT_EQ(ab1[0], a[0]);
    EXPECT_EQ(ab1[1], bb[1]);
  }
}

TEST(Saltelli, FourteenParametersGiveNTimesKPlusTwoRows)
{
  const SaltelliDesign d = saltelli_sample(ParameterBounds::defaults(), 512, 0);
  EXPECT_EQ(d.rows.rows(), 8192);
  EXPECT_EQ(d.rows.cols(), 14);
}

TEST(FirstOrder, AdditiveFunction)
{
  // Var(q1) = 1/12, Var(2 q2) = 4/12, total 5/12.
  const SaltelliDesign d = saltelli_sample(unit_box(2), 1024, 5);
  const auto y = evaluate(d, [](const auto& q) { return q[0] + 2.0 * q[1]; });
  const SensitivityResult r = first_order_indices(y, 2, 1024, {200, 0.95, 1});
  EXPECT_NEAR(r.S[0], 0.2, 0.05);
  EXPECT_NEAR(r.S[1], 0.8, 0.05);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_LE(r.ci_lo[i], r.S[i]);
    EXPECT_GE(r.ci_hi[i], r.S[i]);
  }
}

TEST(FirstOrder, SingleFactor)
{
  const SaltelliDesign d = saltelli_sample(unit_box(2), 1024, 6);
  const auto y = evaluate(d, [](const auto& q) { return q[0]; });
  const SensitivityResult r = first_order_indices(y, 2, 1024);
  EXPECT_NEAR(r.S[0], 1.0, 0.03);
  EXPECT_NEAR(r.S[1], 0.0, 0.03);
}

TEST(FirstOrder, IshigamiAgainstAnalyticValues)
{
  // Y = sin q1 + 7 sin^2 q2 + 0.1 q3^4 sin q1 on [-pi, pi]^3.
  // S1 = 0.3139, S2 = 0.4424, S3 = 0.
  ParameterBounds b = unit_box(3);
  for (std::size_t i = 0; i < 3; ++i) {
    b.lo[i] = -M_PI;
    b.hi[i] = M_PI;
  }
  const SaltelliDesign d = saltelli_sample(b, 8192, 2);
  const auto y = evaluate(d, [](const auto& q) {
    return std::sin(q[0]) + 7.0 * std::pow(std::sin(q[1]), 2) + 0.1 * std::pow(q[2], 4) * std::sin(q[0]);
  });
  const SensitivityResult r = first_order_indices(y, 3, 8192, {0, 0.95, 0});
  EXPECT_NEAR(r.S[0], 0.3139, 0.03);
  EXPECT_NEAR(r.S[1], 0.4424, 0.03);
  EXPECT_NEAR(r.S[2], 0.0, 0.03);
}

TEST(FirstOrder, ConstantOutputIsAnError)
{
  const std::vector<double> y(4 * 4, 3.0);
  try {
    first_order_indices(y, 2, 4);
    FAIL() << "expected NumericalError";
  }
  catch (const NumericalError& e) {
    EXPECT_STREQ(e.what(), "constant output");
  }
}

TEST(FirstOrder, SubsetOfSamples)
{
  const SaltelliDesign d = saltelli_sample(unit_box(2), 256, 8);
  const auto y = evaluate(d, [](const auto& q) { return q[0] + 2.0 * q[1]; });
  std::vector<std::size_t> use;
  for (std::size_t j = 0; j < 128; ++j) use.push_back(j);
  const SensitivityResult r = first_order_indices(y, 2, 256, {0, 0.95, 0}, use);
  EXPECT_EQ(r.n_samples, 128u);
  EXPECT_NEAR(r.S[1], 0.8, 0.1);
}

TEST(Timeslices, SmallRunOnDiffusionVelocities)
{
  const ParameterBounds b = bounds_from_json(R"({"v_s": [0, 1e-4], "alpha_i": [0.2, 0.6]})");
  AnalysisScenario sc;
  const double N = static_cast<double>(sc.params.population);
  sc.background = {32333 / N, 219 / N, 54 / N, 4932 / N};
  sc.i0 = 3508 / N;
  sc.nx = 16;
  sc.T = 40.0;
  TimesliceOptions opt;
  opt.days = {20, 40};
  opt.n = 16;
  opt.seed = 4;
  opt.bootstrap.resamples = 20;
  const TimesliceReport rep = analyze_timeslices(b, sc, opt);
  ASSERT_EQ(rep.results.size(), 2u);
  EXPECT_EQ(rep.failed_rows, 0u);
  EXPECT_EQ(rep.results[1].day, 40);
  EXPECT_EQ(rep.results[1].names, b.names);
  EXPECT_GT(rep.results[1].S[1], rep.results[1].S[0]);

  std::ostringstream csv;
  write_indices_csv(csv, rep.results);
  EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')), "day,parameter,S,ci_lo,ci_hi");
  std::ostringstream svg;
  write_indices_svg(svg, rep.results);
  EXPECT_NE(svg.str().find("<svg"), std::string::npos);
}

TEST(LatinHypercube, TwoPointsInOneDimension)
{
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Eigen::MatrixXd x = latin_hypercube(2, 1, seed);
    const double lo = std::min(x(0, 0), x(1, 0)), hi = std::max(x(0, 0), x(1, 0));
    EXPECT_GE(lo, 0.0);
    EXPECT_LT(lo, 0.5);
    EXPECT_GE(hi, 0.5);
    EXPECT_LE(hi, 1.0);
  }
}

TEST(LatinHypercube, OnePointPerStratum)
{
  const Eigen::MatrixXd x = latin_hypercube(250, 14, 9);
  for (Eigen::Index c = 0; c < 14; ++c) {
    std::vector<int> counts(250, 0);
    for (Eigen::Index r = 0; r < 250; ++r) ++counts[static_cast<std::size_t>(x(r, c) * 250)];
    for (int n : counts) EXPECT_EQ(n, 1);
  }
}
