#ifndef CQR_HARNESS_HPP
#define CQR_HARNESS_HPP

// Repeated-split benchmark protocol:
//   shuffle -> test split -> proper-train / calibration split -> standardise on proper
//   train -> fit engines on proper train -> calibrate -> score the test rows.
// Repetitions are seeded from the master seed by a counter, run independently and are
// merged by repetition index.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <future>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "cqr/conformal.hpp"
#include "cqr/datagen.hpp"
#include "cqr/engines.hpp"
#include "cqr/report.hpp"

namespace cqr {

// ---------------------------------------------------------------------------
// Quantile crossing
// ---------------------------------------------------------------------------

inline QuantilePair fix_crossing(QuantilePair q) { return q.lo <= q.hi ? q : QuantilePair{q.hi, q.lo}; }

/// Sorts every pair in place; returns the number of swapped pairs.
inline std::size_t fix_crossing(std::span<QuantilePair> pairs) {
  std::size_t swaps = 0;
  for (auto& q : pairs) {
    if (q.lo > q.hi) {
      std::swap(q.lo, q.hi);
      ++swaps;
    }
  }
  return swaps;
}

/// Wraps a quantile predictor so its outputs are always ordered; counts repairs.
class CrossingFixedModel final : public QuantileRegressor {
 public:
  explicit CrossingFixedModel(QuantilePtr inner) : inner_(std::move(inner)) {}

  QuantilePair predict_pair(Row x) const override {
    const auto q = inner_->predict_pair(x);
    if (q.lo > q.hi) swaps_.fetch_add(1, std::memory_order_relaxed);
    return fix_crossing(q);
  }
  std::vector<QuantilePair> predict_all(const Matrix& X) const override {
    auto pairs = inner_->predict_all(X);
    swaps_.fetch_add(fix_crossing(pairs), std::memory_order_relaxed);
    return pairs;
  }
  std::size_t swaps() const noexcept { return swaps_.load(std::memory_order_relaxed); }

 private:
  QuantilePtr inner_;
  mutable std::atomic<std::size_t> swaps_{0};
};

// ---------------------------------------------------------------------------
// Nominal quantile-level tuning
// ---------------------------------------------------------------------------

inline std::vector<double> default_tuning_grid() { return {0.02, 0.05, 0.1, 0.15, 0.2, 0.3}; }

struct TuningResult {
  double nominal_alpha = 0.1;
  double level_lo = 0.05;
  double level_hi = 0.95;
  std::vector<double> scores;  // mean validation interval length per grid entry
};

namespace detail {

inline ConformalBand calibrate_quantiles(Method method, QuantilePtr q, const Dataset& cal, double alpha) {
  if (method == Method::cqr_asym)
    return cqr_asym_calibrate(std::move(q), cal, QuantileLevel(alpha / 2), QuantileLevel(alpha / 2));
  return cqr_calibrate(std::move(q), cal, QuantileLevel(alpha));
}

inline double mean_length(const std::vector<Interval>& intervals) {
  if (intervals.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& iv : intervals) acc += iv.length();
  return acc / static_cast<double>(intervals.size());
}

}  // namespace detail

/// Grid search over symmetric nominal levels (a/2, 1 - a/2). For each fold the fitter is
/// trained on half of the remaining folds, conformalised on the other half and scored by
/// mean interval length on the held-out fold. Ties go to the grid entry nearest alpha.
inline TuningResult tune_quantile_levels(const QuantileFitter& fitter, const Dataset& train, double alpha,
                                         int cv_folds, std::span<const double> grid, std::uint64_t seed,
                                         Method method = Method::cqr) {
  if (grid.empty()) throw Error(ErrorCode::invalid_argument, "tuning grid is empty");
  for (double a : grid)
    if (!(a > 0.0 && a < 1.0)) throw Error(ErrorCode::invalid_argument, "tuning grid entries must lie in (0, 1)");
  TuningResult result;
  auto pick = [&](std::size_t g) {
    result.nominal_alpha = grid[g];
    result.level_lo = grid[g] / 2;
    result.level_hi = 1.0 - grid[g] / 2;
  };
  if (grid.size() == 1) {
    pick(0);
    return result;
  }
  const std::size_t n = train.rows();
  cv_folds = std::max(2, cv_folds);
  if (n < static_cast<std::size_t>(cv_folds) * 4)
    throw Error(ErrorCode::invalid_argument, "too few rows for quantile-level cross-validation");

  const auto ids = fold_assignment(n, cv_folds, seed);
  result.scores.assign(grid.size(), 0.0);
  for (int f = 0; f < cv_folds; ++f) {
    std::vector<std::size_t> rest, val;
    for (std::size_t i = 0; i < n; ++i) (ids[i] == f ? val : rest).push_back(i);
    std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(f) + 1));
    std::shuffle(rest.begin(), rest.end(), rng);
    const auto half = static_cast<std::ptrdiff_t>(rest.size() / 2);
    const std::vector<std::size_t> fit_rows(rest.begin(), rest.begin() + half);
    const std::vector<std::size_t> cal_rows(rest.begin() + half, rest.end());
    const auto d_fit = train.subset(fit_rows);
    const auto d_cal = train.subset(cal_rows);
    const auto d_val = train.subset(val);

    const auto family = fitter(d_fit);
    for (std::size_t g = 0; g < grid.size(); ++g) {
      auto q = std::make_shared<CrossingFixedModel>(family(grid[g] / 2, 1.0 - grid[g] / 2));
      const auto band = detail::calibrate_quantiles(method, q, d_cal, alpha);
      result.scores[g] += detail::mean_length(band.predict_all(d_val.X)) / cv_folds;
    }
  }
  std::size_t best = 0;
  for (std::size_t g = 1; g < grid.size(); ++g) {
    const double dg = std::abs(grid[g] - alpha), db = std::abs(grid[best] - alpha);
    if (result.scores[g] < result.scores[best] ||
        (result.scores[g] == result.scores[best] && (dg < db || (dg == db && grid[g] < grid[best]))))
      best = g;
  }
  pick(best);
  return result;
}

// ---------------------------------------------------------------------------
// Experiment
// ---------------------------------------------------------------------------

struct ExperimentConfig {
  double alpha = 0.1;
  int n_repetitions = 20;
  double test_fraction = 0.2;
  double calibration_fraction = 0.5;  // share of the training rows used for calibration
  std::vector<Method> methods{Method::cqr};
  Engine engine = Engine::qrf;
  EngineConfig engines;
  bool tune_quantiles = false;
  int cv_folds = 5;
  std::vector<double> tuning_grid = default_tuning_grid();
  double gamma = 1.0;
  std::uint64_t seed = 0;
  bool original_units = false;
  int threads = 1;

  void validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorCode::invalid_argument, "alpha must lie in (0, 1)");
    if (!(test_fraction > 0.0 && test_fraction < 1.0) ||
        !(calibration_fraction > 0.0 && calibration_fraction < 1.0))
      throw Error(ErrorCode::invalid_argument, "fractions must lie in (0, 1)");
    if (n_repetitions < 1) throw Error(ErrorCode::invalid_argument, "repetitions must be >= 1");
    if (methods.empty()) throw Error(ErrorCode::invalid_argument, "no methods selected");
    if (!(gamma >= 0.0)) throw Error(ErrorCode::invalid_argument, "gamma must be non-negative");
    if (engine == Engine::ridge)
      for (auto m : methods)
        if (m == Method::cqr || m == Method::cqr_asym)
          throw Error(ErrorCode::invalid_argument, "engine ridge has no quantile regressor; use qrf, mlp or linear-q");
  }
};

/// Row indices for one repetition.
struct RepetitionSplit {
  std::vector<std::size_t> test;
  DataSplit train;  // i1 proper training, i2 calibration
};

inline RepetitionSplit plan_repetition(std::size_t n, const ExperimentConfig& cfg, std::uint64_t rep_seed) {
  if (n < 40) throw Error(ErrorCode::invalid_argument, "dataset needs at least 40 rows");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::mt19937_64 rng(rep_seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  const auto n_test = static_cast<std::size_t>(std::llround(cfg.test_fraction * static_cast<double>(n)));
  const std::size_t n_train = n - n_test;
  const auto n_cal = static_cast<std::size_t>(std::llround(cfg.calibration_fraction * static_cast<double>(n_train)));
  RepetitionSplit s;
  s.test.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_test));
  const auto i1_end = perm.begin() + static_cast<std::ptrdiff_t>(n - n_cal);
  s.train.i1.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_test), i1_end);
  s.train.i2.assign(i1_end, perm.end());
  s.train.validate(n);
  return s;
}

/// Calibrated band for one method plus the bookkeeping the report needs.
struct CalibratedMethod {
  Method method = Method::cqr;
  std::optional<ConformalBand> band;
  std::string error;
  double level_lo = 0.0;
  double level_hi = 0.0;
  std::shared_ptr<const CrossingFixedModel> quantiles;  // CQR variants only
};

/// Fits every engine the methods need on `proper_train` and calibrates on `cal`.
/// Nothing else is read, so the result is independent of any test rows.
inline std::vector<CalibratedMethod> calibrate_methods(const ExperimentConfig& cfg, const Dataset& proper_train,
                                                       const Dataset& cal, std::uint64_t rep_seed,
                                                       std::shared_ptr<const OracleFrame> oracle = nullptr) {
  EngineSession session(cfg.engine, cfg.engines, proper_train, mix_seed(rep_seed, 1), oracle);
  std::vector<CalibratedMethod> out;
  for (const Method m : cfg.methods) {
    CalibratedMethod cm;
    cm.method = m;
    try {
      switch (m) {
        case Method::split:
          cm.band = split_conformal_calibrate(session.mean(), cal, QuantileLevel(cfg.alpha));
          break;
        case Method::local:
          cm.band = local_conformal_calibrate(session.mean(), session.dispersion(), cal, QuantileLevel(cfg.alpha),
                                              cfg.gamma);
          break;
        case Method::cqr:
        case Method::cqr_asym: {
          double lo = cfg.alpha / 2, hi = 1.0 - cfg.alpha / 2;
          if (cfg.tune_quantiles) {
            const auto fitter = EngineSession::make_quantile_fitter(cfg.engine, cfg.engines, mix_seed(rep_seed, 1), oracle);
            const auto t = tune_quantile_levels(fitter, proper_train, cfg.alpha, cfg.cv_folds, cfg.tuning_grid,
                                                mix_seed(rep_seed, 2), m);
            lo = t.level_lo;
            hi = t.level_hi;
          }
          auto q = std::make_shared<CrossingFixedModel>(session.quantiles(lo, hi));
          cm.band = detail::calibrate_quantiles(m, q, cal, cfg.alpha);
          cm.quantiles = std::move(q);
          cm.level_lo = lo;
          cm.level_hi = hi;
          break;
        }
      }
    } catch (const std::exception& e) {
      cm.band.reset();
      cm.error = e.what();
    }
    out.push_back(std::move(cm));
  }
  return out;
}

namespace detail {

inline double sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

inline double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace detail

/// Runs one repetition on a fixed split; returns one row per configured method.
inline std::vector<RepetitionRow> run_repetition(const ExperimentConfig& cfg, const Dataset& data,
                                                 const RepetitionSplit& split, int repetition,
                                                 std::uint64_t rep_seed,
                                                 const std::optional<SyntheticLaw>& law = std::nullopt) {
  std::vector<RepetitionRow> rows;
  auto fail_all = [&](const std::string& msg) {
    for (auto m : cfg.methods) {
      RepetitionRow r;
      r.method = std::string(method_name(m));
      r.repetition = repetition;
      r.seed = rep_seed;
      r.ok = false;
      r.error = msg;
      rows.push_back(std::move(r));
    }
    return rows;
  };

  StandardizationParams params;
  Dataset train, cal, test;
  std::shared_ptr<const OracleFrame> oracle;
  try {
    const auto raw_train = data.subset(split.train.i1);
    params = standardize_fit(raw_train);
    train = standardize_apply(params, raw_train);
    cal = standardize_apply(params, data.subset(split.train.i2));
    test = standardize_apply(params, data.subset(split.test));
    if (cfg.engine == Engine::oracle) {
      if (!law) throw Error(ErrorCode::invalid_argument, "oracle engine is only available for synthetic data");
      oracle = std::make_shared<const OracleFrame>(*law, params);
    }
  } catch (const std::exception& e) {
    return fail_all(e.what());
  }

  const auto t0 = std::chrono::steady_clock::now();
  const auto calibrated = calibrate_methods(cfg, train, cal, rep_seed, oracle);
  const double length_scale = cfg.original_units ? params.response_scale : 1.0;
  for (const auto& cm : calibrated) {
    RepetitionRow r;
    r.method = std::string(method_name(cm.method));
    r.repetition = repetition;
    r.seed = rep_seed;
    r.n_test = test.rows();
    r.n_cal = cal.rows();
    r.level_lo = cm.level_lo;
    r.level_hi = cm.level_hi;
    try {
      if (!cm.band) throw Error(ErrorCode::invalid_argument, cm.error);
      const auto intervals = cm.band->predict_all(test.X);
      std::size_t covered = 0, below = 0, above = 0, collapsed = 0;
      double length = 0.0;
      for (std::size_t i = 0; i < intervals.size(); ++i) {
        const double y = test.y(static_cast<Eigen::Index>(i));
        const auto& iv = intervals[i];
        if (y < iv.lo) ++below;
        else if (y > iv.hi) ++above;
        else ++covered;
        if (iv.collapsed) ++collapsed;
        length += iv.length();
      }
      const auto nt = static_cast<double>(intervals.size());
      r.avg_length = length / nt * length_scale;
      r.coverage = static_cast<double>(covered) / nt;
      r.tail_lo_miss = static_cast<double>(below) / nt;
      r.tail_hi_miss = static_cast<double>(above) / nt;
      r.correction_lo = cm.band->correction_lo() * length_scale;
      r.correction_hi = cm.band->correction_hi() * length_scale;
      r.collapsed = collapsed;
      r.crossings = cm.quantiles ? cm.quantiles->swaps() : 0;
    } catch (const std::exception& e) {
      r.ok = false;
      r.error = e.what();
    }
    r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rows.push_back(std::move(r));
  }
  return rows;
}

inline ExperimentReport summarize(const ExperimentConfig& cfg, std::vector<RepetitionRow> rows, ReportMeta meta) {
  ExperimentReport report;
  report.meta = std::move(meta);
  for (const Method m : cfg.methods) {
    const std::string name(method_name(m));
    MethodSummary s;
    s.method = name;
    std::vector<double> len, cov, lo, hi;
    for (const auto& r : rows) {
      if (r.method != name) continue;
      s.wall_seconds += r.wall_seconds;
      if (!r.ok) {
        ++s.n_failed;
        continue;
      }
      len.push_back(r.avg_length);
      cov.push_back(r.coverage);
      lo.push_back(r.tail_lo_miss);
      hi.push_back(r.tail_hi_miss);
      s.crossings += r.crossings;
      s.collapsed += r.collapsed;
    }
    s.n_reps = static_cast<int>(len.size());
    s.avg_length = detail::mean_of(len);
    s.sd_length = detail::sample_sd(len);
    s.avg_coverage = detail::mean_of(cov);
    s.sd_coverage = detail::sample_sd(cov);
    s.tail_lo_miss = detail::mean_of(lo);
    s.tail_hi_miss = detail::mean_of(hi);
    report.methods.push_back(std::move(s));
  }
  report.rows = std::move(rows);
  return report;
}

inline ExperimentReport run_experiment(const ExperimentConfig& cfg, const Dataset& data,
                                       const std::optional<SyntheticLaw>& law = std::nullopt,
                                       const std::string& dataset_name = "dataset") {
  cfg.validate();
  if (data.rows() < 40) throw Error(ErrorCode::invalid_argument, "dataset needs at least 40 rows");

  std::vector<std::vector<RepetitionRow>> per_rep(static_cast<std::size_t>(cfg.n_repetitions));
  auto run_one = [&](int rep) {
    const std::uint64_t rep_seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(rep));
    const auto split = plan_repetition(data.rows(), cfg, rep_seed);
    per_rep[static_cast<std::size_t>(rep)] = run_repetition(cfg, data, split, rep, rep_seed, law);
  };
  if (cfg.threads <= 1) {
    for (int rep = 0; rep < cfg.n_repetitions; ++rep) run_one(rep);
  } else {
    for (int start = 0; start < cfg.n_repetitions; start += cfg.threads) {
      std::vector<std::future<void>> batch;
      for (int rep = start; rep < std::min(cfg.n_repetitions, start + cfg.threads); ++rep)
        batch.push_back(std::async(std::launch::async, run_one, rep));
      for (auto& f : batch) f.get();
    }
  }

  std::vector<RepetitionRow> rows;
  for (auto& v : per_rep)
    for (auto& r : v) rows.push_back(std::move(r));

  ReportMeta meta;
  meta.dataset = dataset_name;
  meta.engine = std::string(engine_name(cfg.engine));
  meta.alpha = cfg.alpha;
  meta.n_repetitions = cfg.n_repetitions;
  meta.gamma = cfg.gamma;
  meta.seed = cfg.seed;
  meta.tune_quantiles = cfg.tune_quantiles;
  meta.units = cfg.original_units ? "original" : "standardized";
  return summarize(cfg, std::move(rows), std::move(meta));
}

// ---------------------------------------------------------------------------
// Monte Carlo coverage audit: one engine fit on a proper training draw, then many
// independent (calibration draw, fresh test draw) trials.
// ---------------------------------------------------------------------------

struct AuditConfig {
  Method method = Method::cqr;
  Engine engine = Engine::linear_q;
  EngineConfig engines;
  SyntheticSpec data{SyntheticKind::heteroscedastic, 0, 0.5, 0.0, 10.0, 0};
  double alpha = 0.1;
  double gamma = 1.0;
  std::size_t n_train = 200;
  std::size_t n_cal = 99;
  std::size_t n_test = 200;
  int trials = 2000;
  bool refit_each_trial = false;
  std::uint64_t seed = 0;
};

struct AuditResult {
  int trials = 0;
  double pooled_coverage = 0.0;
  double standard_error = 0.0;  // of the pooled coverage, from the spread of per-trial coverages
  double lower_bound = 0.0;     // 1 - alpha
  double upper_bound = 0.0;     // 1 - alpha + 1 / (n_cal + 1)
  double tail_lo_miss = 0.0;
  double tail_hi_miss = 0.0;
  double tail_lo_se = 0.0;
  double tail_hi_se = 0.0;

  /// Pooled coverage inside [lower - 4 SE, upper + 4 SE].
  bool within_bounds() const {
    return pooled_coverage >= lower_bound - 4 * standard_error && pooled_coverage <= upper_bound + 4 * standard_error;
  }
};

inline AuditResult coverage_audit(const AuditConfig& cfg) {
  if (cfg.trials < 1 || cfg.n_cal < 1 || cfg.n_test < 1 || cfg.n_train < 1)
    throw Error(ErrorCode::invalid_argument, "audit sizes must be positive");
  const SyntheticLaw law(cfg.data);
  std::mt19937_64 rng(cfg.seed);

  StandardizationParams identity;
  identity.kept_features = {0};
  identity.mean = Vector::Zero(1);
  identity.sd = Vector::Ones(1);
  identity.input_features = 1;
  const auto oracle = std::make_shared<const OracleFrame>(law, identity);

  ExperimentConfig ecfg;
  ecfg.alpha = cfg.alpha;
  ecfg.gamma = cfg.gamma;
  ecfg.methods = {cfg.method};
  ecfg.engine = cfg.engine;
  ecfg.engines = cfg.engines;

  std::vector<double> cov, lo, hi;
  Dataset train = law.draw(cfg.n_train, rng);
  std::unique_ptr<EngineSession> session;
  std::shared_ptr<CrossingFixedModel> quant;
  auto refit = [&] {
    session = std::make_unique<EngineSession>(cfg.engine, cfg.engines, train, mix_seed(cfg.seed, 7), oracle);
    if (cfg.method == Method::cqr || cfg.method == Method::cqr_asym)
      quant = std::make_shared<CrossingFixedModel>(session->quantiles(cfg.alpha / 2, 1.0 - cfg.alpha / 2));
  };
  refit();

  for (int t = 0; t < cfg.trials; ++t) {
    if (cfg.refit_each_trial && t > 0) {
      train = law.draw(cfg.n_train, rng);
      refit();
    }
    const auto cal = law.draw(cfg.n_cal, rng);
    const auto test = law.draw(cfg.n_test, rng);
    ConformalBand band = [&] {
      switch (cfg.method) {
        case Method::split: return split_conformal_calibrate(session->mean(), cal, QuantileLevel(cfg.alpha));
        case Method::local:
          return local_conformal_calibrate(session->mean(), session->dispersion(), cal, QuantileLevel(cfg.alpha),
                                           cfg.gamma);
        default: return detail::calibrate_quantiles(cfg.method, quant, cal, cfg.alpha);
      }
    }();
    const auto intervals = band.predict_all(test.X);
    std::size_t in = 0, below = 0, above = 0;
    for (std::size_t i = 0; i < intervals.size(); ++i) {
      const double y = test.y(static_cast<Eigen::Index>(i));
      if (y < intervals[i].lo) ++below;
      else if (y > intervals[i].hi) ++above;
      else ++in;
    }
    const auto nt = static_cast<double>(cfg.n_test);
    cov.push_back(static_cast<double>(in) / nt);
    lo.push_back(static_cast<double>(below) / nt);
    hi.push_back(static_cast<double>(above) / nt);
  }

  AuditResult r;
  r.trials = cfg.trials;
  const double root = std::sqrt(static_cast<double>(cfg.trials));
  r.pooled_coverage = detail::mean_of(cov);
  r.standard_error = detail::sample_sd(cov) / root;
  r.tail_lo_miss = detail::mean_of(lo);
  r.tail_hi_miss = detail::mean_of(hi);
  r.tail_lo_se = detail::sample_sd(lo) / root;
  r.tail_hi_se = detail::sample_sd(hi) / root;
  r.lower_bound = 1.0 - cfg.alpha;
  r.upper_bound = 1.0 - cfg.alpha + 1.0 / static_cast<double>(cfg.n_cal + 1);
  return r;
}

// ---------------------------------------------------------------------------
// Three-method synthetic comparison with per-point bounds for plotting.
// ---------------------------------------------------------------------------

struct DemoPoint {
  double x = 0.0;
  double y = 0.0;
  double oracle_lo = 0.0, oracle_hi = 0.0;
  std::vector<Interval> bands;  // one per method, original units
};

struct DemoResult {
  std::vector<Method> methods;
  std::vector<DemoPoint> points;  // sorted by x
  std::vector<double> coverage;
  std::vector<double> avg_length;
};

inline DemoResult demo_fig1(const SyntheticSpec& spec, ExperimentConfig cfg) {
  cfg.validate();
  const auto synth = generate(spec);
  const std::uint64_t rep_seed = mix_seed(cfg.seed, 0);
  const auto split = plan_repetition(synth.data.rows(), cfg, rep_seed);
  const auto raw_train = synth.data.subset(split.train.i1);
  const auto params = standardize_fit(raw_train);
  const auto train = standardize_apply(params, raw_train);
  const auto cal = standardize_apply(params, synth.data.subset(split.train.i2));
  const auto raw_test = synth.data.subset(split.test);
  const auto test = standardize_apply(params, raw_test);
  std::shared_ptr<const OracleFrame> oracle;
  if (cfg.engine == Engine::oracle) oracle = std::make_shared<const OracleFrame>(synth.law, params);

  const auto calibrated = calibrate_methods(cfg, train, cal, rep_seed, oracle);
  DemoResult out;
  out.methods = cfg.methods;
  out.points.resize(test.rows());
  for (std::size_t i = 0; i < test.rows(); ++i) {
    auto& p = out.points[i];
    p.x = raw_test.X(static_cast<Eigen::Index>(i), 0);
    p.y = raw_test.y(static_cast<Eigen::Index>(i));
    p.oracle_lo = synth.law.quantile(p.x, cfg.alpha / 2);
    p.oracle_hi = synth.law.quantile(p.x, 1.0 - cfg.alpha / 2);
  }
  for (const auto& cm : calibrated) {
    if (!cm.band) throw Error(ErrorCode::invalid_argument, std::string(method_name(cm.method)) + ": " + cm.error);
    const auto intervals = cm.band->predict_all(test.X);
    std::size_t in = 0;
    double len = 0.0;
    for (std::size_t i = 0; i < intervals.size(); ++i) {
      Interval iv{intervals[i].lo * params.response_scale, intervals[i].hi * params.response_scale,
                  intervals[i].collapsed};
      if (iv.contains(out.points[i].y)) ++in;
      len += iv.length();
      out.points[i].bands.push_back(iv);
    }
    out.coverage.push_back(static_cast<double>(in) / static_cast<double>(intervals.size()));
    out.avg_length.push_back(len / static_cast<double>(intervals.size()));
  }
  std::sort(out.points.begin(), out.points.end(), [](const DemoPoint& a, const DemoPoint& b) { return a.x < b.x; });
  return out;
}

}  // namespace cqr

#endif  // CQR_HARNESS_HPP
