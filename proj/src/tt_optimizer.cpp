#include "seirhcd/tt_optimizer.hpp"

#include "seirhcd/error.hpp"
#include "seirhcd/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <map>
#include <nlohmann/json.hpp>
#include <numbers>
#include <numeric>
#include <random>

namespace seirhcd {

double TTConfig::node(std::size_t dim, std::size_t i) const
{
  if (i + 1 == n) return b_max[dim];
  return b_min[dim] + (b_max[dim] - b_min[dim]) * static_cast<double>(i) / static_cast<double>(n - 1);
}

double TTConfig::cell(std::size_t dim) const
{
  return (b_max[dim] - b_min[dim]) / static_cast<double>(n - 1);
}

void TTConfig::validate() const
{
  if (b_min.empty()) throw ConfigError("tt: b_min must not be empty");
  if (b_min.size() != b_max.size()) throw ConfigError("tt: b_min and b_max differ in length");
  for (std::size_t k = 0; k < b_min.size(); ++k)
    if (!std::isfinite(b_min[k]) || !std::isfinite(b_max[k]) || !(b_min[k] < b_max[k]))
      throw ConfigError(fmt::format("tt: bounds of dimension {} must satisfy b_min < b_max", k));
  if (n < 2) throw ConfigError("tt: n must be >= 2");
  if (r_max < 1) throw ConfigError("tt: r_max must be >= 1");
  if (sweeps < 1) throw ConfigError("tt: sweeps must be >= 1");
  if (mapping != "exp" && mapping != "arctan")
    throw ConfigError("tt: mapping must be \"exp\" or \"arctan\"");
  if (std::isnan(alpha0)) throw ConfigError("tt: alpha0 must not be NaN");
}

std::size_t TTConfig::budget() const
{
  return sweeps * d() * n * r_max * r_max;
}

TTConfig tt_config_from_json(const std::string& text, const std::string& origin)
{
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  }
  catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  if (j.is_object() && j.contains("tt")) j = j.at("tt");
  if (!j.is_object()) throw ConfigError(origin + ": expected a JSON object");
  static const std::vector<std::string> keys = {
      "b_min", "b_max", "n", "r_max", "sweeps", "alpha0", "mapping", "seed",
      "max_evaluations", "stagnation_sweeps", "workers"};
  for (const auto& [key, _] : j.items())
    if (std::find(keys.begin(), keys.end(), key) == keys.end())
      throw ConfigError(fmt::format("{}: unknown key '{}'", origin, key));

  TTConfig cfg;
  try {
    if (j.contains("b_min")) cfg.b_min = j.at("b_min").get<std::vector<double>>();
    if (j.contains("b_max")) cfg.b_max = j.at("b_max").get<std::vector<double>>();
    if (j.contains("n")) cfg.n = j.at("n").get<std::size_t>();
    if (j.contains("r_max")) cfg.r_max = j.at("r_max").get<std::size_t>();
    if (j.contains("sweeps")) cfg.sweeps = j.at("sweeps").get<std::size_t>();
    if (j.contains("alpha0") && !j.at("alpha0").is_null()) cfg.alpha0 = j.at("alpha0").get<double>();
    if (j.contains("mapping")) cfg.mapping = j.at("mapping").get<std::string>();
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("max_evaluations")) cfg.max_evaluations = j.at("max_evaluations").get<std::size_t>();
    if (j.contains("stagnation_sweeps"))
      cfg.stagnation_sweeps = j.at("stagnation_sweeps").get<std::size_t>();
    if (j.contains("workers")) cfg.workers = j.at("workers").get<unsigned>();
  }
  catch (const nlohmann::json::exception& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  return cfg;
}

std::string tt_config_to_json(const TTConfig& cfg)
{
  nlohmann::ordered_json j;
  j["b_min"] = cfg.b_min;
  j["b_max"] = cfg.b_max;
  j["n"] = cfg.n;
  j["r_max"] = cfg.r_max;
  j["sweeps"] = cfg.sweeps;
  j["alpha0"] = std::isfinite(cfg.alpha0) ? nlohmann::ordered_json(cfg.alpha0) : nlohmann::ordered_json();
  j["mapping"] = cfg.mapping;
  j["seed"] = cfg.seed;
  j["max_evaluations"] = cfg.max_evaluations;
  j["stagnation_sweeps"] = cfg.stagnation_sweeps;
  j["workers"] = cfg.workers;
  return j.dump(2);
}

double mapping_h(double J, double alpha, double scale, const std::string& mapping)
{
  const double x = (J - alpha) / scale;
  if (std::isnan(x)) return 0.0;
  if (mapping == "arctan") return 1.0 - std::atan(x) / (0.5 * std::numbers::pi);
  return x > 745.0 ? 0.0 : std::exp(-x);
}

double update_shift(double alpha, std::span<const double> batch)
{
  for (double v : batch)
    if (std::isfinite(v)) alpha = std::min(alpha, v);
  return alpha;
}

std::vector<std::size_t> maxvol(const Eigen::MatrixXd& a, std::size_t pin, double tol,
                                int max_iterations)
{
  const Eigen::Index m = a.rows(), r = a.cols();
  if (r == 0 || m < r) throw NumericalError("maxvol: need at least as many rows as columns");
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(m, r);

  // Greedy start: pivoted QR of q^T picks well-separated rows.
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> piv(q.transpose());
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(r));
  for (Eigen::Index j = 0; j < r; ++j) rows[static_cast<std::size_t>(j)] = piv.colsPermutation().indices()[j];

  auto coefficients = [&] {
    Eigen::MatrixXd sub(r, r);
    for (Eigen::Index j = 0; j < r; ++j) sub.row(j) = q.row(rows[static_cast<std::size_t>(j)]);
    // b = q * sub^{-1}, solved as sub^T b^T = q^T; b restricted to the selected rows is I.
    return Eigen::MatrixXd(Eigen::PartialPivLU<Eigen::MatrixXd>(sub.transpose()).solve(q.transpose()).transpose());
  };

  Eigen::Index pinned_col = -1;
  if (pin < static_cast<std::size_t>(m)) {
    const auto p = static_cast<Eigen::Index>(pin);
    auto it = std::find(rows.begin(), rows.end(), p);
    if (it == rows.end()) {
      Eigen::Index j = 0;
      coefficients().row(p).cwiseAbs().maxCoeff(&j);
      rows[static_cast<std::size_t>(j)] = p;
      pinned_col = j;
    }
    else {
      pinned_col = it - rows.begin();
    }
  }

  for (int it = 0; it < max_iterations; ++it) {
    Eigen::MatrixXd b = coefficients();
    if (pinned_col >= 0) b.col(pinned_col).setZero();
    Eigen::Index bi = 0, bj = 0;
    const double big = b.cwiseAbs().maxCoeff(&bi, &bj);
    if (!(big > tol)) break;
    rows[static_cast<std::size_t>(bj)] = bi;
  }
  return {rows.begin(), rows.end()};
}

namespace {

using Multi = std::vector<std::size_t>;

struct Search {
  const Objective& objective;
  const TTConfig& cfg;
  TTResult& result;
  std::map<Multi, double> cache;  // NaN marks a failed candidate
  double scale = 1.0;

  std::vector<double> point(const Multi& idx) const
  {
    std::vector<double> q(idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) q[k] = cfg.node(k, idx[k]);
    return q;
  }

  /// Evaluates every candidate (new ones concurrently), folds alpha and the best point, and
  /// returns the objective values in candidate order.
  std::vector<double> evaluate(const std::vector<Multi>& candidates)
  {
    std::vector<const Multi*> fresh;
    {
      std::map<Multi, char> seen;
      for (const auto& c : candidates)
        if (!cache.contains(c) && seen.emplace(c, 0).second) fresh.push_back(&c);
    }
    std::vector<double> values(fresh.size(), std::numeric_limits<double>::quiet_NaN());
    std::vector<std::string> errors(fresh.size());
    parallel_for(fresh.size(), cfg.workers, [&](std::size_t f) {
      const auto q = point(*fresh[f]);
      try {
        const double v = objective(q);
        if (std::isfinite(v)) values[f] = v;
        else errors[f] = "non-finite objective value";
      }
      catch (const std::exception& e) {
        errors[f] = e.what();
      }
    });
    result.evaluations += fresh.size();
    for (std::size_t f = 0; f < fresh.size(); ++f) {
      cache.emplace(*fresh[f], values[f]);
      if (!errors[f].empty())
        result.failures.push_back(fmt::format("[{}] {}", fmt::join(point(*fresh[f]), ", "), errors[f]));
    }

    std::vector<double> out(candidates.size());
    bool any = false;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      out[c] = cache.at(candidates[c]);
      if (!std::isfinite(out[c])) continue;
      any = true;
      // Ties resolve to the lexicographically smallest index so the result is order-free.
      if (out[c] < result.J_best || (out[c] == result.J_best && candidates[c] < result.index_best)) {
        result.J_best = out[c];
        result.index_best = candidates[c];
      }
    }
    if (!any) throw NumericalError("tt_optimize: every candidate of a core failed to evaluate");
    result.alpha = update_shift(result.alpha, out);

    // Scale: 10th percentile of this batch's excess over alpha. Near-optimal candidates keep
    // distinct mapped values even when the bulk of the batch is orders of magnitude worse.
    std::vector<double> excess;
    for (double v : out)
      if (std::isfinite(v)) excess.push_back(v - result.alpha);
    const auto at = static_cast<std::size_t>(0.1 * static_cast<double>(excess.size() - 1));
    std::nth_element(excess.begin(), excess.begin() + static_cast<long>(at), excess.end());
    scale = excess[at] > 0.0 ? excess[at] : 1.0;
    return out;
  }

  double mapped(double v) const
  {
    return std::isfinite(v) ? mapping_h(v, result.alpha, scale, cfg.mapping) : 0.0;
  }
};

Multi concat(const Multi& left, std::size_t i, const Multi& right)
{
  Multi m;
  m.reserve(left.size() + 1 + right.size());
  m.insert(m.end(), left.begin(), left.end());
  m.push_back(i);
  m.insert(m.end(), right.begin(), right.end());
  return m;
}

/// Row of the largest mapped value, i.e. of the best candidate in the unfolding.
std::size_t argmax_row(const Eigen::MatrixXd& a)
{
  Eigen::Index i = 0, j = 0;
  a.maxCoeff(&i, &j);
  return static_cast<std::size_t>(i);
}

}  // namespace

TTResult tt_optimize(const Objective& objective, const TTConfig& cfg)
{
  cfg.validate();
  const std::size_t d = cfg.d(), n = cfg.n;

  // TT ranks r_0 = r_d = 1, r_k = min(r_max, n^k, n^(d-k)).
  std::vector<std::size_t> rank(d + 1, 1);
  for (std::size_t k = 1; k < d; ++k) {
    double cap = static_cast<double>(cfg.r_max);
    cap = std::min(cap, std::pow(static_cast<double>(n), static_cast<double>(k)));
    cap = std::min(cap, std::pow(static_cast<double>(n), static_cast<double>(d - k)));
    rank[k] = static_cast<std::size_t>(cap);
  }

  TTResult result;
  result.alpha = cfg.alpha0;
  for (std::size_t k = 0; k < d; ++k) result.cell.push_back(cfg.cell(k));
  Search search{objective, cfg, result, {}, 1.0};

  // left[k]: index prefixes over dims 0..k-1 (|left[k]| = rank[k]);
  // right[k]: suffixes over dims k..d-1 (|right[k]| = rank[k]).
  std::vector<std::vector<Multi>> left(d + 1), right(d + 1);
  left[0] = {Multi{}};
  right[d] = {Multi{}};
  std::mt19937_64 rng(cfg.seed);
  for (std::size_t k = 1; k < d; ++k) {
    std::vector<std::size_t> pool(left[k - 1].size() * n);
    std::iota(pool.begin(), pool.end(), 0);
    std::shuffle(pool.begin(), pool.end(), rng);
    for (std::size_t m = 0; m < rank[k]; ++m) {
      const std::size_t p = pool[m];
      Multi pre = left[k - 1][p / n];
      pre.push_back(p % n);
      left[k].push_back(std::move(pre));
    }
  }

  std::size_t stagnant = 0;
  bool forward = false;  // left sets are initialised, so the first sweep runs right to left
  for (std::size_t sweep = 1; sweep <= cfg.sweeps; ++sweep) {
    const double best_before = result.J_best;
    bool budget_hit = false;
    for (std::size_t step = 0; step < d; ++step) {
      const std::size_t k = forward ? step : d - 1 - step;
      const auto& L = left[k];
      const auto& R = right[k + 1];
      // Candidate (l, i, r) sits at row (l * n + i), column r of the left unfolding.
      std::vector<Multi> cand;
      cand.reserve(L.size() * n * R.size());
      for (std::size_t l = 0; l < L.size(); ++l)
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t r = 0; r < R.size(); ++r) cand.push_back(concat(L[l], i, R[r]));

      if (cfg.max_evaluations > 0) {
        std::size_t fresh = 0;
        std::map<Multi, char> seen;
        for (const auto& c : cand)
          if (!search.cache.contains(c) && seen.emplace(c, 0).second) ++fresh;
        if (result.evaluations + fresh > cfg.max_evaluations) {
          if (result.evaluations == 0)
            throw ConfigError(fmt::format("tt: max_evaluations = {} is below the {} calls of the first core",
                                          cfg.max_evaluations, fresh));
          budget_hit = true;
          break;
        }
      }
      const auto values = search.evaluate(cand);
      result.log.push_back({sweep, k, result.evaluations, result.alpha, result.J_best});

      if (forward && k + 1 < d) {
        Eigen::MatrixXd a(static_cast<Eigen::Index>(L.size() * n), static_cast<Eigen::Index>(R.size()));
        for (std::size_t c = 0; c < cand.size(); ++c)
          a(static_cast<Eigen::Index>(c / R.size()), static_cast<Eigen::Index>(c % R.size())) =
              search.mapped(values[c]);
        const auto rows = maxvol(a, argmax_row(a));
        std::vector<Multi> next;
        for (std::size_t row : rows) {
          Multi pre = L[row / n];
          pre.push_back(row % n);
          next.push_back(std::move(pre));
        }
        left[k + 1] = std::move(next);
      }
      else if (!forward && k > 0) {
        // Right unfolding: row (i * |R| + r), column l.
        Eigen::MatrixXd a(static_cast<Eigen::Index>(n * R.size()), static_cast<Eigen::Index>(L.size()));
        for (std::size_t c = 0; c < cand.size(); ++c) {
          const std::size_t l = c / (n * R.size()), rest = c % (n * R.size());
          a(static_cast<Eigen::Index>(rest), static_cast<Eigen::Index>(l)) = search.mapped(values[c]);
        }
        const auto rows = maxvol(a, argmax_row(a));
        std::vector<Multi> next;
        for (std::size_t row : rows) {
          Multi suf{row / R.size()};
          const auto& tail = R[row % R.size()];
          suf.insert(suf.end(), tail.begin(), tail.end());
          next.push_back(std::move(suf));
        }
        right[k] = std::move(next);
      }
    }
    result.sweeps_done = sweep;
    if (budget_hit) {
      result.stop_reason = "evaluation budget";
      break;
    }
    stagnant = result.J_best < best_before ? 0 : stagnant + 1;
    if (cfg.stagnation_sweeps > 0 && stagnant >= cfg.stagnation_sweeps) {
      result.stop_reason = "stagnation";
      break;
    }
    forward = !forward;
  }
  if (result.stop_reason.empty()) result.stop_reason = "sweeps";
  if (result.index_best.empty()) throw NumericalError("tt_optimize: no candidate evaluated");
  result.q_best = search.point(result.index_best);
  return result;
}

void write_tt_log_csv(std::ostream& out, const TTResult& result)
{
  out << "iteration,dimension,evaluations,alpha,J_best\n";
  for (const auto& e : result.log)
    out << fmt::format("{},{},{},{:.17g},{:.17g}\n", e.iteration, e.dimension, e.evaluations,
                       e.alpha, e.J_best);
}

}  // namespace seirhcd
