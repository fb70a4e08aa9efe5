#include "seirhcd/emulator.hpp"

#include "seirhcd/error.hpp"
#include "seirhcd/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>
#include <limits>
#include <nlohmann/json.hpp>
#include <random>

namespace seirhcd {

LhcDesign lhc_sample(const ParameterBounds& bounds, std::size_t n, std::uint64_t seed)
{
  bounds.validate();
  if (n == 0) throw ConfigError("lhc_sample: need at least one point");
  const Eigen::MatrixXd unit = latin_hypercube(n, bounds.size(), seed);
  LhcDesign d{bounds, Eigen::MatrixXd(n, bounds.size()), seed};
  for (std::size_t i = 0; i < n; ++i)
    d.points.row(static_cast<Eigen::Index>(i)) = bounds.from_unit(unit.row(i).transpose()).transpose();
  return d;
}

namespace {

std::vector<std::vector<int>> monomial_exponents(std::size_t k, int degree)
{
  std::vector<std::vector<int>> out;
  std::vector<int> e(k, 0);
  out.push_back(e);
  // Extend each exponent vector of total degree d by one unit in a non-decreasing dimension
  // to enumerate every monomial of degree d + 1 exactly once.
  std::vector<std::pair<std::vector<int>, std::size_t>> frontier = {{e, 0}};
  for (int d = 1; d <= degree; ++d) {
    std::vector<std::pair<std::vector<int>, std::size_t>> next;
    for (const auto& [vec, first] : frontier) {
      for (std::size_t i = first; i < k; ++i) {
        auto v = vec;
        ++v[i];
        out.push_back(v);
        next.emplace_back(v, i);
      }
    }
    frontier = std::move(next);
  }
  return out;
}

Eigen::MatrixXd basis_matrix(const Eigen::MatrixXd& x, const std::vector<std::vector<int>>& exps)
{
  Eigen::MatrixXd H(x.rows(), static_cast<Eigen::Index>(exps.size()));
  for (Eigen::Index r = 0; r < x.rows(); ++r)
    for (std::size_t b = 0; b < exps.size(); ++b) {
      double v = 1.0;
      for (std::size_t i = 0; i < exps[b].size(); ++i)
        for (int p = 0; p < exps[b][i]; ++p) v *= x(r, static_cast<Eigen::Index>(i));
      H(r, static_cast<Eigen::Index>(b)) = v;
    }
  return H;
}

/// exp(-sum (a_i - b_i)^2 / delta_i^2), plus the nugget when the points coincide.
Eigen::MatrixXd correlation(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                            const Eigen::VectorXd& delta, double nugget)
{
  Eigen::ArrayXXd d2 = Eigen::ArrayXXd::Zero(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.cols(); ++i) {
    const double w = 1.0 / (delta[i] * delta[i]);
    d2 += (a.col(i).array().replicate(1, b.rows()).rowwise() - b.col(i).array().transpose()).square() * w;
  }
  Eigen::MatrixXd R = (-d2).exp().matrix();
  if (nugget != 0.0) R += (d2 == 0.0).cast<double>().matrix() * nugget;
  return R;
}

struct Profile {
  const Eigen::MatrixXd* x = nullptr;
  const Eigen::VectorXd* res = nullptr;
  double log_lo = 0, log_hi = 0;
  double nugget = 0;
};

/// Negative profile log-likelihood 0.5*n*log(sigma2_hat) + 0.5*log|R| at theta = log(delta).
double neg_log_likelihood(const Profile& ctx, const Eigen::VectorXd& theta, Eigen::VectorXd* grad)
{
  const Eigen::MatrixXd& x = *ctx.x;
  const Eigen::VectorXd& res = *ctx.res;
  const Eigen::Index n = x.rows();
  const Eigen::VectorXd delta = theta.array().exp();
  Eigen::MatrixXd R = correlation(x, x, delta, ctx.nugget);
  Eigen::LLT<Eigen::MatrixXd> llt(R);
  if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
  const Eigen::VectorXd alpha = llt.solve(res);
  const double quad = res.dot(alpha);
  if (!(quad > 0.0)) return std::numeric_limits<double>::infinity();
  const Eigen::MatrixXd L = llt.matrixL();
  const double logdet = 2.0 * L.diagonal().array().log().sum();
  const double value = 0.5 * n * std::log(quad / n) + 0.5 * logdet;
  if (grad) {
    // d(value)/d(theta_i) = 0.5 * sum_jk M_jk dR_jk/dtheta_i with M = R^{-1} - (n/quad) alpha alpha^T
    // and dR_jk/dtheta_i = R_jk * 2 (x_ji - x_ki)^2 / delta_i^2 (the nugget does not vary).
    Eigen::MatrixXd M = llt.solve(Eigen::MatrixXd::Identity(n, n));
    M.noalias() -= (static_cast<double>(n) / quad) * alpha * alpha.transpose();
    M = M.cwiseProduct(R);
    M.diagonal().setZero();
    const Eigen::VectorXd rowsum = M.rowwise().sum();
    grad->resize(theta.size());
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
      const auto xi = x.col(i);
      // sum_jk M_jk (x_j - x_k)^2 = 2 sum_j x_j^2 rowsum_j - 2 x^T M x for symmetric M.
      const double s = 2.0 * xi.cwiseAbs2().dot(rowsum) - 2.0 * xi.dot(M * xi);
      (*grad)[i] = 0.5 * (2.0 / (delta[i] * delta[i])) * s;
    }
  }
  return value;
}

struct GslContext {
  Profile profile;
};

Eigen::VectorXd to_theta(const GslContext& c, const gsl_vector* z)
{
  Eigen::VectorXd theta(static_cast<Eigen::Index>(z->size));
  for (std::size_t i = 0; i < z->size; ++i) {
    const double s = 1.0 / (1.0 + std::exp(-gsl_vector_get(z, i)));
    theta[static_cast<Eigen::Index>(i)] = c.profile.log_lo + (c.profile.log_hi - c.profile.log_lo) * s;
  }
  return theta;
}

void gsl_fdf(const gsl_vector* z, void* params, double* f, gsl_vector* g)
{
  const auto& c = *static_cast<const GslContext*>(params);
  const Eigen::VectorXd theta = to_theta(c, z);
  Eigen::VectorXd grad;
  double value = neg_log_likelihood(c.profile, theta, g ? &grad : nullptr);
  if (!std::isfinite(value)) value = 1e100;
  if (f) *f = value;
  if (g) {
    const double span = c.profile.log_hi - c.profile.log_lo;
    for (std::size_t i = 0; i < z->size; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      const double s = (theta[ii] - c.profile.log_lo) / span;
      const double gi = value >= 1e100 || !std::isfinite(grad[ii]) ? 0.0 : grad[ii];
      gsl_vector_set(g, i, gi * span * s * (1.0 - s));
    }
  }
}

double gsl_f(const gsl_vector* z, void* params)
{
  double f = 0;
  gsl_fdf(z, params, &f, nullptr);
  return f;
}

void gsl_df(const gsl_vector* z, void* params, gsl_vector* g)
{
  double f = 0;
  gsl_fdf(z, params, &f, g);
}

struct OptimumResult {
  Eigen::VectorXd theta;
  double value = std::numeric_limits<double>::infinity();
};

OptimumResult bounded_quasi_newton(GslContext& ctx, const Eigen::VectorXd& theta0, int max_iter)
{
  const std::size_t k = static_cast<std::size_t>(theta0.size());
  gsl_multimin_function_fdf fn;
  fn.n = k;
  fn.f = &gsl_f;
  fn.df = &gsl_df;
  fn.fdf = &gsl_fdf;
  fn.params = &ctx;

  gsl_vector* z = gsl_vector_alloc(k);
  const double span = ctx.profile.log_hi - ctx.profile.log_lo;
  for (std::size_t i = 0; i < k; ++i) {
    double s = (theta0[static_cast<Eigen::Index>(i)] - ctx.profile.log_lo) / span;
    s = std::clamp(s, 1e-6, 1.0 - 1e-6);
    gsl_vector_set(z, i, std::log(s / (1.0 - s)));
  }
  gsl_multimin_fdfminimizer* m =
      gsl_multimin_fdfminimizer_alloc(gsl_multimin_fdfminimizer_vector_bfgs2, k);
  gsl_multimin_fdfminimizer_set(m, &fn, z, 0.1, 0.1);

  OptimumResult best;
  for (int it = 0; it < max_iter; ++it) {
    if (gsl_multimin_fdfminimizer_iterate(m) != GSL_SUCCESS) break;
    if (gsl_multimin_test_gradient(m->gradient, 1e-4 * (1.0 + std::abs(m->f))) == GSL_SUCCESS) break;
  }
  best.value = m->f;
  best.theta = to_theta(ctx, m->x);
  gsl_multimin_fdfminimizer_free(m);
  gsl_vector_free(z);
  return best;
}

}  // namespace

EmulatorModel fit_emulator(const LhcDesign& design, const Eigen::VectorXd& y,
                           const EmulatorFitOptions& options)
{
  gsl_set_error_handler_off();
  const ParameterBounds& bounds = design.bounds;
  bounds.validate();
  const Eigen::Index n = design.points.rows();
  const std::size_t k = bounds.size();
  if (y.size() != n) throw ConfigError("fit_emulator: one output per design point is required");
  if (!y.allFinite()) throw NumericalError("fit_emulator: non-finite simulator output");
  if (options.delta_min <= 0 || options.delta_max <= options.delta_min)
    throw ConfigError("fit_emulator: invalid correlation-length bounds");

  EmulatorModel model;
  model.bounds = bounds;
  model.design.resize(n, static_cast<Eigen::Index>(k));
  for (Eigen::Index i = 0; i < n; ++i)
    model.design.row(i) = bounds.to_unit(design.points.row(i).transpose()).transpose();
  model.outputs = y;
  model.nugget = options.nugget;

  // Regression part; lower the degree until the basis has full column rank.
  for (int degree = std::max(0, options.degree); degree >= 0; --degree) {
    auto exps = monomial_exponents(k, degree);
    const Eigen::MatrixXd H = basis_matrix(model.design, exps);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(H);
    if (qr.rank() == H.cols() && H.rows() >= H.cols()) {
      model.degree = degree;
      model.exponents = std::move(exps);
      model.beta = qr.solve(y);
      break;
    }
    model.warnings.push_back(
        fmt::format("regression basis of degree {} is singular; reducing degree", degree));
  }
  const Eigen::VectorXd res = y - basis_matrix(model.design, model.exponents) * model.beta;

  const double scale = 1.0 + y.squaredNorm() / static_cast<double>(n);
  const double sigma2_floor = 1e-12 * scale;
  Profile profile{&model.design, &res, std::log(options.delta_min), std::log(options.delta_max),
                  options.nugget};

  Eigen::VectorXd theta_best = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(k),
                                                         std::log(0.5 * (options.delta_min + 1.0)));
  double best = std::numeric_limits<double>::infinity();
  if (res.squaredNorm() <= 1e-20 * scale * static_cast<double>(n)) {
    // Residual-free fit: nothing for the process to explain.
    model.sigma2 = sigma2_floor;
    best = 0.0;
  }
  else {
    GslContext ctx{profile};
    std::mt19937_64 rng(options.seed);
    std::uniform_real_distribution<double> start(profile.log_lo, profile.log_hi);
    const int restarts = std::max(1, options.restarts);
    for (int s = 0; s < restarts; ++s) {
      Eigen::VectorXd theta0(static_cast<Eigen::Index>(k));
      for (auto& t : theta0) t = s == 0 ? std::log(0.5) : start(rng);
      const OptimumResult r = bounded_quasi_newton(ctx, theta0, options.max_iterations);
      if (r.value < best) {
        best = r.value;
        theta_best = r.theta;
      }
    }
    if (!(best < 1e100)) throw NumericalError("fit_emulator: likelihood optimisation failed at every start");
  }
  model.delta = theta_best.array().exp();

  const Eigen::MatrixXd R = correlation(model.design, model.design, model.delta, options.nugget);
  Eigen::LLT<Eigen::MatrixXd> llt(R);
  if (llt.info() != Eigen::Success) throw NumericalError("fit_emulator: correlation matrix not positive definite");
  model.chol_lower = llt.matrixL();
  model.weights = llt.solve(res);
  if (model.sigma2 == 0.0) model.sigma2 = std::max(sigma2_floor, res.dot(model.weights) / n);
  model.log_likelihood = -best;
  return model;
}

std::vector<Prediction> predict_many(const EmulatorModel& model, const Eigen::MatrixXd& q)
{
  const Eigen::Index m = q.rows();
  const std::size_t k = model.bounds.size();
  if (static_cast<std::size_t>(q.cols()) != k) throw ConfigError("predict: dimension mismatch");
  Eigen::MatrixXd unit(m, static_cast<Eigen::Index>(k));
  for (Eigen::Index i = 0; i < m; ++i) unit.row(i) = model.bounds.to_unit(q.row(i).transpose()).transpose();

  const Eigen::MatrixXd r = correlation(unit, model.design, model.delta, model.nugget);  // m x n
  const Eigen::VectorXd mean =
      basis_matrix(unit, model.exponents) * model.beta + r * model.weights;
  const Eigen::MatrixXd v =
      model.chol_lower.triangularView<Eigen::Lower>().solve(r.transpose());  // n x m
  std::vector<Prediction> out(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) {
    double self = 1.0;
    for (Eigen::Index j = 0; j < model.design.rows(); ++j)
      if ((unit.row(i) - model.design.row(j)).squaredNorm() == 0.0) {
        self += model.nugget;
        break;
      }
    out[static_cast<std::size_t>(i)] = {mean[i],
                                        model.sigma2 * std::max(0.0, self - v.col(i).squaredNorm())};
  }
  return out;
}

Prediction predict(const EmulatorModel& model, const Eigen::VectorXd& q)
{
  return predict_many(model, q.transpose()).front();
}

Eigen::VectorXd loo_standardized_errors(const EmulatorModel& model)
{
  const Eigen::Index n = model.design.rows();
  const Eigen::MatrixXd L = model.chol_lower;
  const Eigen::MatrixXd Linv = L.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(n, n));
  const Eigen::VectorXd qdiag = Linv.colwise().squaredNorm().transpose();  // diag of R^{-1}
  Eigen::VectorXd out(n);
  for (Eigen::Index i = 0; i < n; ++i)
    out[i] = model.weights[i] / std::sqrt(qdiag[i] * model.sigma2);
  return out;
}

double implausibility(const Prediction& pred, double z, double var_obs)
{
  if (var_obs < 0.0) throw ConfigError("implausibility: observation variance must be >= 0");
  const double total = pred.variance + var_obs;
  if (!(total > 0.0)) throw NumericalError("degenerate denominator");
  return std::abs(z - pred.mean) / std::sqrt(total);
}

double implausibility(const EmulatorModel& model, const Eigen::VectorXd& q, double z, double var_obs)
{
  return implausibility(predict(model, q), z, var_obs);
}

std::vector<double> target_implausibility(const HistoryTarget& target, const Eigen::MatrixXd& q)
{
  if (target.models.empty() || target.models.size() != target.z.size() ||
      target.z.size() != target.var_obs.size())
    throw ConfigError("history target '" + target.name + "' needs one z and var_obs per emulator");
  std::vector<double> out(static_cast<std::size_t>(q.rows()), 0.0);
  for (std::size_t d = 0; d < target.models.size(); ++d) {
    const auto preds = predict_many(target.models[d], q);
    for (std::size_t i = 0; i < out.size(); ++i)
      out[i] = std::max(out[i], implausibility(preds[i], target.z[d], target.var_obs[d]));
  }
  return out;
}

QuantileSummary summarize(std::vector<double> values)
{
  QuantileSummary s;
  if (values.empty()) return s;
  std::sort(values.begin(), values.end());
  auto q = [&](double p) {
    const double pos = p * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
  };
  s.min = values.front();
  s.q25 = q(0.25);
  s.q50 = q(0.5);
  s.q75 = q(0.75);
  s.max = values.back();
  return s;
}

ParameterBounds PlausibleSpace::refined_bounds() const
{
  if (empty()) return bounds;
  ParameterBounds out = bounds;
  const double m = static_cast<double>(accepted.rows());
  for (std::size_t i = 0; i < bounds.size(); ++i) {
    const double lo = accepted.col(static_cast<Eigen::Index>(i)).minCoeff();
    const double hi = accepted.col(static_cast<Eigen::Index>(i)).maxCoeff();
    // The sample hull sits about width/(m+1) inside each edge; ten spacings miss an edge with odds e^-10.
    double pad = 10.0 * (hi - lo) / (m + 1.0);
    if (!(pad > 0.0)) pad = 1e-6 * bounds.width(i);
    out.lo[i] = std::max(bounds.lo[i], lo - pad);
    out.hi[i] = std::min(bounds.hi[i], hi + pad);
  }
  return out;
}

PlausibleSpace history_match(const std::vector<HistoryTarget>& targets,
                             const ParameterBounds& bounds, std::size_t n_candidates,
                             double threshold, std::uint64_t seed, unsigned workers)
{
  bounds.validate();
  if (targets.empty()) throw ConfigError("history_match: no targets");
  for (const auto& t : targets)
    for (const auto& m : t.models)
      if (m.bounds.names != bounds.names)
        throw ConfigError("history_match: emulator '" + t.name + "' was fitted on other inputs");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const auto k = static_cast<Eigen::Index>(bounds.size());
  Eigen::MatrixXd cand(static_cast<Eigen::Index>(n_candidates), k);
  for (Eigen::Index i = 0; i < cand.rows(); ++i)
    for (Eigen::Index d = 0; d < k; ++d)
      cand(i, d) = bounds.lo[static_cast<std::size_t>(d)] + unif(rng) * bounds.width(static_cast<std::size_t>(d));

  PlausibleSpace space;
  space.bounds = bounds;
  space.threshold = threshold;
  space.n_candidates = n_candidates;

  constexpr Eigen::Index block = 2000;
  const std::size_t nblocks = (n_candidates + block - 1) / block;
  std::vector<std::vector<double>> imp(targets.size(), std::vector<double>(n_candidates));
  parallel_for(nblocks * targets.size(), workers, [&](std::size_t job) {
    const std::size_t t = job / nblocks, b = job % nblocks;
    const Eigen::Index start = static_cast<Eigen::Index>(b) * block;
    const Eigen::Index len = std::min<Eigen::Index>(block, cand.rows() - start);
    const auto vals = target_implausibility(targets[t], cand.middleRows(start, len));
    std::copy(vals.begin(), vals.end(), imp[t].begin() + start);
  });

  std::vector<Eigen::Index> keep;
  space.accepted_per_target.assign(targets.size(), 0);
  for (std::size_t t = 0; t < targets.size(); ++t) {
    if (n_candidates == 0) break;
    space.min_implausibility.push_back(*std::min_element(imp[t].begin(), imp[t].end()));
    space.max_implausibility.push_back(*std::max_element(imp[t].begin(), imp[t].end()));
  }
  for (std::size_t i = 0; i < n_candidates; ++i) {
    bool ok = true;
    for (std::size_t t = 0; t < targets.size(); ++t) {
      if (imp[t][i] < threshold) ++space.accepted_per_target[t];
      else ok = false;
    }
    if (ok) keep.push_back(static_cast<Eigen::Index>(i));
  }
  space.accepted.resize(static_cast<Eigen::Index>(keep.size()), k);
  for (std::size_t n = 0; n < keep.size(); ++n)
    space.accepted.row(static_cast<Eigen::Index>(n)) = cand.row(keep[n]);
  if (!keep.empty()) {
    for (Eigen::Index d = 0; d < k; ++d) {
      std::vector<double> col(space.accepted.col(d).data(),
                              space.accepted.col(d).data() + space.accepted.rows());
      space.summary.push_back(summarize(std::move(col)));
    }
  }
  return space;
}

void write_accepted_csv(std::ostream& out, const PlausibleSpace& space)
{
  for (std::size_t i = 0; i < space.bounds.size(); ++i)
    out << (i ? "," : "") << space.bounds.names[i];
  out << '\n';
  for (Eigen::Index r = 0; r < space.accepted.rows(); ++r) {
    for (Eigen::Index d = 0; d < space.accepted.cols(); ++d)
      out << (d ? "," : "") << fmt::format("{:.17g}", space.accepted(r, d));
    out << '\n';
  }
}

std::string quantiles_json(const PlausibleSpace& space)
{
  nlohmann::ordered_json j;
  j["threshold"] = space.threshold;
  j["n_candidates"] = space.n_candidates;
  j["n_accepted"] = space.accepted.rows();
  j["accepted_per_target"] = space.accepted_per_target;
  j["min_implausibility"] = space.min_implausibility;
  j["max_implausibility"] = space.max_implausibility;
  nlohmann::ordered_json params = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < space.bounds.size(); ++i) {
    nlohmann::ordered_json p;
    p["lo"] = space.bounds.lo[i];
    p["hi"] = space.bounds.hi[i];
    if (!space.empty()) {
      const auto& s = space.summary[i];
      p["min"] = s.min;
      p["q25"] = s.q25;
      p["q50"] = s.q50;
      p["q75"] = s.q75;
      p["max"] = s.max;
    }
    params[space.bounds.names[i]] = p;
  }
  j["parameters"] = params;
  return j.dump(2);
}

void write_boxplot_csv(std::ostream& out, const PlausibleSpace& space)
{
  out << "parameter,lo,hi,min,q25,q50,q75,max\n";
  if (space.empty()) return;
  for (std::size_t i = 0; i < space.bounds.size(); ++i) {
    const auto& s = space.summary[i];
    auto norm = [&](double v) { return (v - space.bounds.lo[i]) / space.bounds.width(i); };
    out << fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n",
                       space.bounds.names[i], space.bounds.lo[i], space.bounds.hi[i], norm(s.min),
                       norm(s.q25), norm(s.q50), norm(s.q75), norm(s.max));
  }
}

}  // namespace seirhcd
