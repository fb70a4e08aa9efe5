#include "seirhcd/emulator.hpp"
#include "seirhcd/error.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <sstream>

using namespace seirhcd;

namespace {

ParameterBounds box(std::size_t k, double lo = 0.0, double hi = 1.0)
{
  ParameterBounds b;
  for (std::size_t i = 0; i < k; ++i) {
    b.names.push_back("x" + std::to_string(i));
    b.lo.push_back(lo);
    b.hi.push_back(hi);
  }
  return b;
}

double sines(const Eigen::VectorXd& q)
{
  double s = 0.0;
  for (Eigen::Index i = 0; i < q.size(); ++i) s += std::sin(2.0 * q[i] + 0.3 * static_cast<double>(i));
  return s;
}

Eigen::VectorXd outputs(const LhcDesign& d, double (*f)(const Eigen::VectorXd&))
{
  Eigen::VectorXd y(d.points.rows());
  for (Eigen::Index r = 0; r < y.size(); ++r) y[r] = f(d.points.row(r).transpose());
  return y;
}

EmulatorModel fitted_sines(std::size_t k, std::size_t n)
{
  const LhcDesign d = lhc_sample(box(k), n, 21);
  EmulatorFitOptions opt;
  opt.restarts = 2;
  opt.seed = 5;
  return fit_emulator(d, outputs(d, sines), opt);
}

}  // namespace

TEST(LhcSample, PointsStayInTheBox)
{
  const ParameterBounds b = bounds_from_json(
      R"({"alpha_i": [0, 38.9], "t_imm": [0, 505], "v_s": [0, 0.0044]})");
  const LhcDesign d = lhc_sample(b, 250, 3);
  ASSERT_EQ(d.points.rows(), 250);
  for (Eigen::Index r = 0; r < 250; ++r)
    for (Eigen::Index c = 0; c < 3; ++c) {
      EXPECT_GE(d.points(r, c), b.lo[static_cast<std::size_t>(c)]);
      EXPECT_LE(d.points(r, c), b.hi[static_cast<std::size_t>(c)]);
    }
}

TEST(FitEmulator, LinearOutputIsReproducedEverywhere)
{
  const ParameterBounds b = box(3, -1.0, 2.0);
  const LhcDesign d = lhc_sample(b, 30, 4);
  auto f = [](const Eigen::VectorXd& q) { return 1.0 + 2.0 * q[0] - 0.5 * q[1] + 3.0 * q[2]; };
  Eigen::VectorXd y(30);
  for (Eigen::Index r = 0; r < 30; ++r) y[r] = f(d.points.row(r).transpose());
  const EmulatorModel m = fit_emulator(d, y);
  for (Eigen::Index r = 0; r < 30; ++r)
    EXPECT_NEAR(predict(m, d.points.row(r).transpose()).mean, y[r], 1e-8 * (1.0 + std::abs(y[r])));
  for (const Eigen::Vector3d q : {Eigen::Vector3d(0.1, 0.2, 0.3), Eigen::Vector3d(-0.9, 1.9, 0.0),
                                  Eigen::Vector3d(1.5, -0.5, 1.1)}) {
    EXPECT_NEAR(predict(m, q).mean, f(q), 1e-8 * (1.0 + std::abs(f(q))));
  }
}

TEST(FitEmulator, ConstantOutputHasFloorVariance)
{
  const LhcDesign d = lhc_sample(box(2), 20, 2);
  const EmulatorModel m = fit_emulator(d, Eigen::VectorXd::Constant(20, 4.5));
  EXPECT_LE(m.sigma2, 1e-10);
  for (const Eigen::Vector2d q : {Eigen::Vector2d(0.3, 0.9), Eigen::Vector2d(0.0, 0.0)})
    EXPECT_NEAR(predict(m, q).mean, 4.5, 1e-10);
}

TEST(FitEmulator, InterpolatesDesignPoints)
{
  const EmulatorModel m = fitted_sines(4, 60);
  const LhcDesign d = lhc_sample(box(4), 60, 21);
  for (Eigen::Index r = 0; r < 60; ++r) {
    const Prediction p = predict(m, d.points.row(r).transpose());
    EXPECT_NEAR(p.mean, m.outputs[r], 1e-6 * (1.0 + std::abs(m.outputs[r])));
    EXPECT_LE(p.variance, 1e-8 * m.sigma2);
  }
}

TEST(FitEmulator, LeaveOneOutErrorsAreCalibrated)
{
  const EmulatorModel m = fitted_sines(4, 60);
  const Eigen::VectorXd e = loo_standardized_errors(m);
  const auto within = (e.array().abs() <= 3.0).count();
  EXPECT_GE(static_cast<double>(within), 0.9 * 60);
}

TEST(FitEmulator, LeaveOneOutMatchesExplicitRefit)
{
  // The closed form equals the prediction of the GP conditioned on the other n-1 points.
  const EmulatorModel m = fitted_sines(2, 15);
  const Eigen::VectorXd e = loo_standardized_errors(m);
  const Eigen::Index n = 15, i = 6;
  Eigen::MatrixXd H(n, static_cast<Eigen::Index>(m.exponents.size()));
  for (Eigen::Index a = 0; a < n; ++a)
    for (std::size_t j = 0; j < m.exponents.size(); ++j) {
      double v = 1.0;
      for (std::size_t c = 0; c < 2; ++c) v *= std::pow(m.design(a, static_cast<Eigen::Index>(c)), m.exponents[j][c]);
      H(a, static_cast<Eigen::Index>(j)) = v;
    }
  Eigen::MatrixXd R(n, n);
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b = 0; b < n; ++b) {
      double s = 0.0;
      for (Eigen::Index c = 0; c < 2; ++c) s += std::pow((m.design(a, c) - m.design(b, c)) / m.delta[c], 2);
      R(a, b) = std::exp(-s) + (a == b ? m.nugget : 0.0);
    }
  const Eigen::VectorXd res = m.outputs - H * m.beta;
  std::vector<Eigen::Index> keep;
  for (Eigen::Index a = 0; a < n; ++a)
    if (a != i) keep.push_back(a);
  Eigen::MatrixXd Rk(n - 1, n - 1);
  Eigen::VectorXd rk(n - 1), yk(n - 1);
  for (Eigen::Index a = 0; a < n - 1; ++a) {
    rk[a] = R(i, keep[a]);
    yk[a] = res[keep[a]];
    for (Eigen::Index b = 0; b < n - 1; ++b) Rk(a, b) = R(keep[a], keep[b]);
  }
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(Rk);
  const double mean = rk.dot(ldlt.solve(yk));
  const double var = m.sigma2 * (R(i, i) - rk.dot(ldlt.solve(rk)));
  EXPECT_NEAR(e[i], (res[i] - mean) / std::sqrt(var), 1e-5 * (1.0 + std::abs(e[i])));
}

TEST(Predict, FarPointRecoversPriorVariance)
{
  const EmulatorModel m = fitted_sines(2, 30);
  const double far = 1.0 + 5.0 * m.delta.maxCoeff() + 1.0;
  const Prediction p = predict(m, Eigen::Vector2d(far, -far));
  EXPECT_GE(p.variance, 0.99 * m.sigma2);
}

TEST(Predict, IsotropicSymmetry)
{
  LhcDesign d{box(2), Eigen::MatrixXd(1, 2), 0};
  d.points << 0.5, 0.5;
  const EmulatorModel m = fit_emulator(d, Eigen::VectorXd::Constant(1, 2.0), {0, 1});
  ASSERT_EQ(m.delta[0], m.delta[1]);
  EmulatorModel scaled = m;
  scaled.sigma2 = 1.0;
  const double a = predict(scaled, Eigen::Vector2d(0.7, 0.5)).variance;
  const double b = predict(scaled, Eigen::Vector2d(0.3, 0.5)).variance;
  const double c = predict(scaled, Eigen::Vector2d(0.5, 0.7)).variance;
  EXPECT_GT(a, 0.0);
  EXPECT_NEAR(a, b, 1e-14);
  EXPECT_NEAR(a, c, 1e-14);
}

TEST(Implausibility, Examples)
{
  EXPECT_EQ(implausibility(Prediction{5.0, 2.0}, 5.0, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(implausibility(Prediction{1.0, 3.0}, 1.0 + 3.0 * std::sqrt(4.0), 1.0), 3.0);
  try {
    implausibility(Prediction{1.0, 0.0}, 2.0, 0.0);
    FAIL() << "expected NumericalError";
  }
  catch (const NumericalError& e) {
    EXPECT_STREQ(e.what(), "degenerate denominator");
  }
}

TEST(HistoryMatch, InfiniteThresholdAcceptsEverything)
{
  const EmulatorModel m = fitted_sines(2, 20);
  HistoryTarget t{"y", {m}, {0.0}, {1.0}};
  const PlausibleSpace s =
      history_match({t}, m.bounds, 50000, std::numeric_limits<double>::infinity(), 3);
  EXPECT_EQ(s.accepted.rows(), 50000);
  for (std::size_t k = 0; k < 2; ++k) EXPECT_NEAR(s.summary[k].q50, 0.5, 0.02);
  const ParameterBounds rb = s.refined_bounds();
  EXPECT_EQ(rb.lo, m.bounds.lo);
  EXPECT_EQ(rb.hi, m.bounds.hi);
}

TEST(HistoryMatch, KnownTruthIsNotRuledOut)
{
  const EmulatorModel m = fitted_sines(2, 40);
  const Eigen::Vector2d truth(0.3, 0.7);
  const double z = sines(truth);
  const double var_obs = std::pow(0.01 * z, 2);
  EXPECT_LT(implausibility(m, truth, z, var_obs), 3.0);
  const PlausibleSpace s = history_match({HistoryTarget{"y", {m}, {z}, {var_obs}}}, m.bounds, 20000, 3.0, 8);
  ASSERT_FALSE(s.empty());
  EXPECT_LT(s.accepted.rows(), 20000);
  const ParameterBounds rb = s.refined_bounds();
  for (std::size_t k = 0; k < 2; ++k) {
    EXPECT_LE(rb.lo[k], truth[static_cast<Eigen::Index>(k)]);
    EXPECT_GE(rb.hi[k], truth[static_cast<Eigen::Index>(k)]);
  }
}

TEST(HistoryMatch, IntersectionMatchesPerTargetCuts)
{
  const LhcDesign d = lhc_sample(box(2), 40, 21);
  const EmulatorModel a = fitted_sines(2, 40);
  Eigen::VectorXd y2(40);
  for (Eigen::Index r = 0; r < 40; ++r) y2[r] = d.points(r, 0) - d.points(r, 1);
  const EmulatorModel b = fit_emulator(d, y2);
  const HistoryTarget ta{"a", {a}, {sines(Eigen::Vector2d(0.3, 0.7))}, {0.01}};
  const HistoryTarget tb{"b", {b}, {-0.2}, {0.01}};
  const PlausibleSpace s = history_match({ta, tb}, a.bounds, 5000, 3.0, 1);
  ASSERT_EQ(s.accepted_per_target.size(), 2u);
  EXPECT_LE(static_cast<std::size_t>(s.accepted.rows()),
            std::min(s.accepted_per_target[0], s.accepted_per_target[1]));
  const auto ia = target_implausibility(ta, s.accepted);
  const auto ib = target_implausibility(tb, s.accepted);
  for (std::size_t r = 0; r < ia.size(); ++r) {
    EXPECT_LT(ia[r], 3.0);
    EXPECT_LT(ib[r], 3.0);
  }
  // Re-running on the same seed with one target reproduces that target's own count.
  const PlausibleSpace only_a = history_match({ta}, a.bounds, 5000, 3.0, 1);
  EXPECT_EQ(static_cast<std::size_t>(only_a.accepted.rows()), s.accepted_per_target[0]);
}

TEST(HistoryMatch, EmptySpaceKeepsDiagnostics)
{
  const EmulatorModel m = fitted_sines(2, 20);
  const PlausibleSpace s = history_match({HistoryTarget{"y", {m}, {1e6}, {1e-6}}}, m.bounds, 1000, 3.0, 2);
  EXPECT_TRUE(s.empty());
  EXPECT_TRUE(s.summary.empty());
  EXPECT_GT(s.min_implausibility[0], 3.0);
  EXPECT_EQ(s.refined_bounds().hi, m.bounds.hi);
}

TEST(Summarize, Quartiles)
{
  const QuantileSummary q = summarize({5, 1, 4, 2, 3});
  EXPECT_EQ(q.min, 1);
  EXPECT_EQ(q.q25, 2);
  EXPECT_EQ(q.q50, 3);
  EXPECT_EQ(q.q75, 4);
  EXPECT_EQ(q.max, 5);
}

TEST(PlausibleSpace, RefinedBoundsArePaddedHull)
{
  PlausibleSpace s;
  s.bounds = box(1);
  s.accepted.resize(3, 1);
  s.accepted << 0.4, 0.5, 0.45;
  const ParameterBounds rb = s.refined_bounds();
  EXPECT_NEAR(rb.lo[0], 0.4 - 10.0 * 0.1 / 4.0, 1e-15);
  EXPECT_NEAR(rb.hi[0], 0.5 + 10.0 * 0.1 / 4.0, 1e-15);
  s.accepted << 0.0, 0.5, 1.0;
  EXPECT_EQ(s.refined_bounds().lo[0], 0.0);
  EXPECT_EQ(s.refined_bounds().hi[0], 1.0);
}

TEST(Exports, CsvHeaders)
{
  PlausibleSpace s;
  s.bounds = box(2);
  s.accepted.resize(1, 2);
  s.accepted << 0.25, 0.75;
  s.summary = {summarize({0.25}), summarize({0.75})};
  std::ostringstream a, b;
  write_accepted_csv(a, s);
  write_boxplot_csv(b, s);
  EXPECT_EQ(a.str().substr(0, a.str().find('\n')), "x0,x1");
  EXPECT_EQ(b.str().substr(0, b.str().find('\n')), "parameter,lo,hi,min,q25,q50,q75,max");
  EXPECT_NE(quantiles_json(s).find("\"threshold\""), std::string::npos);
}
