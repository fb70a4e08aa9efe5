#include "seirhcd/sobol.hpp"

#include "seirhcd/error.hpp"
#include "seirhcd/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <numeric>
#include <optional>
#include <random>

namespace seirhcd {

SaltelliDesign saltelli_sample(const ParameterBounds& bounds, std::size_t n, std::uint64_t seed)
{
  bounds.validate();
  if (n == 0) throw ConfigError("saltelli_sample: base sample count must be positive");
  const std::size_t k = bounds.size();
  const Eigen::MatrixXd base = sobol_points(n, 2 * k, seed);

  SaltelliDesign design;
  design.k = k;
  design.n = n;
  design.rows.resize(static_cast<Eigen::Index>(n * (k + 2)), static_cast<Eigen::Index>(k));
  for (std::size_t j = 0; j < n; ++j) {
    const Eigen::VectorXd a = bounds.from_unit(base.row(j).head(k).transpose());
    const Eigen::VectorXd b = bounds.from_unit(base.row(j).tail(k).transpose());
    design.rows.row(design.row_a(j)) = a.transpose();
    design.rows.row(design.row_b(j)) = b.transpose();
    for (std::size_t i = 0; i < k; ++i) {
      Eigen::VectorXd ab = a;
      ab[i] = b[i];
      design.rows.row(design.row_ab(i, j)) = ab.transpose();
    }
  }
  return design;
}

namespace {

/// Point estimates over the base samples listed in `use`.
std::vector<double> estimate(std::span<const double> y, std::size_t k, std::size_t n,
                             const std::vector<std::size_t>& use, bool& constant)
{
  const double m = static_cast<double>(use.size());
  double mean = 0.0;
  for (std::size_t j : use) mean += y[j] + y[n + j];
  mean /= 2.0 * m;
  double var = 0.0;
  for (std::size_t j : use) {
    const double da = y[j] - mean, db = y[n + j] - mean;
    var += da * da + db * db;
  }
  var /= 2.0 * m;
  constant = !(var > 0.0);

  std::vector<double> s(k, 0.0);
  if (constant) return s;
  for (std::size_t i = 0; i < k; ++i) {
    double vi = 0.0;
    for (std::size_t j : use) vi += y[n + j] * (y[(2 + i) * n + j] - y[j]);
    s[i] = vi / m / var;
  }
  return s;
}

double percentile(std::vector<double> v, double q)
{
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

SensitivityResult first_order_indices(std::span<const double> y, std::size_t k, std::size_t n,
                                      const BootstrapOptions& bootstrap,
                                      const std::vector<std::size_t>& use_in)
{
  if (y.size() != n * (k + 2))
    throw ConfigError(fmt::format("first_order_indices: expected {} outputs, got {}", n * (k + 2),
                                  y.size()));
  for (double v : y)
    if (!std::isfinite(v)) throw NumericalError("first_order_indices: non-finite output");
  std::vector<std::size_t> use = use_in;
  if (use.empty()) {
    use.resize(n);
    std::iota(use.begin(), use.end(), 0);
  }

  bool constant = false;
  SensitivityResult out;
  out.S = estimate(y, k, n, use, constant);
  if (constant) throw NumericalError("constant output");
  out.n_samples = use.size();

  std::vector<std::vector<double>> boot(k);
  if (bootstrap.resamples > 0) {
    std::mt19937_64 rng(bootstrap.seed);
    std::uniform_int_distribution<std::size_t> pick(0, use.size() - 1);
    std::vector<std::size_t> sample(use.size());
    for (std::size_t b = 0; b < bootstrap.resamples; ++b) {
      for (auto& j : sample) j = use[pick(rng)];
      bool degenerate = false;
      const auto s = estimate(y, k, n, sample, degenerate);
      if (degenerate) continue;
      for (std::size_t i = 0; i < k; ++i) boot[i].push_back(s[i]);
    }
  }
  const double tail = 0.5 * (1.0 - bootstrap.level);
  for (std::size_t i = 0; i < k; ++i) {
    if (boot[i].empty()) {
      out.ci_lo.push_back(out.S[i]);
      out.ci_hi.push_back(out.S[i]);
    }
    else {
      out.ci_lo.push_back(percentile(boot[i], tail));
      out.ci_hi.push_back(percentile(boot[i], 1.0 - tail));
    }
    out.ci.push_back(0.5 * (out.ci_hi[i] - out.ci_lo[i]));
  }
  return out;
}

TimesliceReport analyze_timeslices(const ParameterBounds& bounds, const AnalysisScenario& scenario,
                                   const TimesliceOptions& options)
{
  if (options.days.empty()) throw ConfigError("analyze_timeslices: no days requested");
  for (int d : options.days)
    if (d < 0 || d > scenario.T)
      throw ConfigError(fmt::format("analyze_timeslices: day {} outside [0, {}]", d, scenario.T));
  select_observable(ObservationSeries{}, options.output);  // rejects non-observables early

  const SaltelliDesign design = saltelli_sample(bounds, options.n, options.seed);
  const std::size_t rows = static_cast<std::size_t>(design.rows.rows());
  const std::size_t ndays = options.days.size();

  // outputs[row * ndays + day]
  std::vector<double> outputs(rows * ndays, 0.0);
  std::vector<char> failed(rows, 0), retried(rows, 0);

  parallel_for(rows, options.workers, [&](std::size_t r) {
    const Eigen::VectorXd q = design.rows.row(static_cast<Eigen::Index>(r)).transpose();
    const std::span<const double> row(q.data(), static_cast<std::size_t>(q.size()));
    std::optional<ObservationSeries> obs;
    try {
      obs = observe_row(scenario, bounds.names, row, options.days);
    }
    catch (const NumericalError&) {
      retried[r] = 1;
      try {
        obs = observe_row(scenario, bounds.names, row, options.days, 2.0);
      }
      catch (const NumericalError&) {
        failed[r] = 1;
        return;
      }
    }
    const auto& y = select_observable(*obs, options.output);
    for (std::size_t d = 0; d < ndays; ++d) outputs[r * ndays + d] = y[d];
  });

  TimesliceReport report;
  report.failed_rows = static_cast<std::size_t>(std::count(failed.begin(), failed.end(), 1));
  report.retried_rows = static_cast<std::size_t>(std::count(retried.begin(), retried.end(), 1));
  if (static_cast<double>(report.failed_rows) > options.max_failure_fraction * rows)
    throw NumericalError(fmt::format("{} of {} model runs failed (limit {:.1f}%)",
                                     report.failed_rows, rows, 100.0 * options.max_failure_fraction));

  std::vector<std::size_t> use;
  for (std::size_t j = 0; j < design.n; ++j) {
    bool ok = !failed[design.row_a(j)] && !failed[design.row_b(j)];
    for (std::size_t i = 0; ok && i < design.k; ++i) ok = !failed[design.row_ab(i, j)];
    if (ok) use.push_back(j);
  }
  report.dropped_samples = design.n - use.size();
  if (use.empty()) throw NumericalError("analyze_timeslices: no complete base samples");

  std::vector<double> y(rows);
  for (std::size_t d = 0; d < ndays; ++d) {
    for (std::size_t r = 0; r < rows; ++r) y[r] = outputs[r * ndays + d];
    BootstrapOptions boot = options.bootstrap;
    boot.seed = options.bootstrap.seed + d;
    SensitivityResult res = first_order_indices(y, design.k, design.n, boot, use);
    res.day = options.days[d];
    res.names = bounds.names;
    report.results.push_back(std::move(res));
  }
  return report;
}

void write_indices_csv(std::ostream& out, const std::vector<SensitivityResult>& results)
{
  out << "day,parameter,S,ci_lo,ci_hi\n";
  for (const auto& r : results)
    for (std::size_t i = 0; i < r.S.size(); ++i)
      out << fmt::format("{},{},{:.17g},{:.17g},{:.17g}\n", r.day, r.names[i], r.S[i],
                         r.ci_lo[i], r.ci_hi[i]);
}

void write_indices_svg(std::ostream& out, const std::vector<SensitivityResult>& results)
{
  const double panel_w = 520, panel_h = 260, margin = 40;
  const double width = panel_w + 2 * margin;
  const double height = results.size() * (panel_h + margin) + margin;
  out << fmt::format(R"(<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" )"
                     R"(font-family="sans-serif" font-size="10">)" "\n",
                     width, height);
  for (std::size_t p = 0; p < results.size(); ++p) {
    const auto& r = results[p];
    const double top = margin + p * (panel_h + margin);
    const double base = top + panel_h;
    const double bar_w = panel_w / std::max<std::size_t>(1, r.S.size());
    auto y_of = [&](double v) { return base - std::clamp(v, -0.1, 1.0) * (panel_h - 20); };
    out << fmt::format(R"(<text x="{}" y="{}">day {}</text>)" "\n", margin, top - 5, r.day);
    out << fmt::format(R"(<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="black"/>)" "\n", margin,
                       y_of(0), margin + panel_w, y_of(0));
    for (std::size_t i = 0; i < r.S.size(); ++i) {
      const double x = margin + i * bar_w;
      const double y0 = y_of(0), y1 = y_of(r.S[i]);
      out << fmt::format(R"(<rect x="{:.2f}" y="{:.2f}" width="{:.2f}" height="{:.2f}" fill="#c0392b"/>)" "\n",
                         x + 0.15 * bar_w, std::min(y0, y1), 0.7 * bar_w, std::abs(y1 - y0));
      const double cx = x + 0.5 * bar_w;
      out << fmt::format(R"(<line x1="{:.2f}" y1="{:.2f}" x2="{:.2f}" y2="{:.2f}" stroke="black"/>)" "\n",
                         cx, y_of(r.ci_lo[i]), cx, y_of(r.ci_hi[i]));
      out << fmt::format(R"(<text x="{:.2f}" y="{:.2f}" text-anchor="middle">{}</text>)" "\n", cx,
                         base + 12, r.names[i]);
    }
  }
  out << "</svg>\n";
}

}  // namespace seirhcd
