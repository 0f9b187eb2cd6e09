#ifndef CQR_ENGINES_HPP
#define CQR_ENGINES_HPP

// Binds an engine name to the three roles a conformal method may need from it:
// a mean predictor, a dispersion predictor for the locally adaptive method, and a
// family of quantile predictors for CQR.

#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include "cqr/datagen.hpp"
#include "cqr/regressors/forest.hpp"
#include "cqr/regressors/knn.hpp"
#include "cqr/regressors/linear_quantile.hpp"
#include "cqr/regressors/mlp.hpp"
#include "cqr/regressors/ridge.hpp"

namespace cqr {

enum class Engine { ridge, mlp, qrf, linear_q, oracle };

inline std::string_view engine_name(Engine e) {
  switch (e) {
    case Engine::ridge: return "ridge";
    case Engine::mlp: return "mlp";
    case Engine::qrf: return "qrf";
    case Engine::linear_q: return "linear-q";
    case Engine::oracle: return "oracle";
  }
  return "?";
}

inline Engine parse_engine(std::string_view s) {
  if (s == "ridge") return Engine::ridge;
  if (s == "mlp") return Engine::mlp;
  if (s == "qrf" || s == "rf") return Engine::qrf;
  if (s == "linear-q" || s == "linear_q") return Engine::linear_q;
  if (s == "oracle") return Engine::oracle;
  throw Error(ErrorCode::invalid_argument, "unknown engine: " + std::string(s));
}

/// Forest settings for the benchmark harness. Large leaves keep the leaf
/// distributions wide enough for tail quantiles at n in the low thousands.
inline ForestConfig benchmark_forest_config() {
  ForestConfig cfg;
  cfg.min_leaf_size = 100;
  return cfg;
}

struct EngineConfig {
  ForestConfig forest = benchmark_forest_config();
  MlpConfig mlp;
  LinearQuantileConfig linear;
  std::size_t knn_k = 11;
  std::vector<double> ridge_grid = default_ridge_grid();
  int ridge_cv_folds = 5;
};

/// The known conditional law of a synthetic dataset, re-expressed in the standardised
/// coordinates the engines see. Requires the single synthetic feature to be kept.
class OracleFrame {
 public:
  OracleFrame(SyntheticLaw law, StandardizationParams params) : law_(std::move(law)), params_(std::move(params)) {
    if (params_.kept_features.size() != 1 || params_.kept_features[0] != 0)
      throw Error(ErrorCode::invalid_argument, "oracle engine needs the single synthetic feature");
  }
  double original_x(Row x) const { return x(0) * params_.sd(0) + params_.mean(0); }
  double quantile(Row x, double level) const {
    return law_.quantile(original_x(x), level) / params_.response_scale;
  }
  double scale(Row x) const { return law_.scale(original_x(x)) / params_.response_scale; }

 private:
  SyntheticLaw law_;
  StandardizationParams params_;
};

class OracleQuantileModel final : public QuantileRegressor {
 public:
  OracleQuantileModel(std::shared_ptr<const OracleFrame> frame, double lo, double hi)
      : frame_(std::move(frame)), lo_(lo), hi_(hi) {}
  QuantilePair predict_pair(Row x) const override { return {frame_->quantile(x, lo_), frame_->quantile(x, hi_)}; }

 private:
  std::shared_ptr<const OracleFrame> frame_;
  double lo_, hi_;
};

class OracleMedianModel final : public MeanRegressor {
 public:
  explicit OracleMedianModel(std::shared_ptr<const OracleFrame> frame) : frame_(std::move(frame)) {}
  double predict(Row x) const override { return frame_->quantile(x, 0.5); }

 private:
  std::shared_ptr<const OracleFrame> frame_;
};

class OracleScaleModel final : public DispersionRegressor {
 public:
  explicit OracleScaleModel(std::shared_ptr<const OracleFrame> frame) : frame_(std::move(frame)) {}
  double predict(Row x) const override { return frame_->scale(x); }

 private:
  std::shared_ptr<const OracleFrame> frame_;
};

/// Caps the leaf size at n / 2 so small training sets still admit a forest.
inline ForestConfig fitted_forest_config(ForestConfig cfg, std::size_t n) {
  cfg.min_leaf_size = std::max(1, std::min(cfg.min_leaf_size, static_cast<int>(n / 2)));
  return cfg;
}

/// Fits and caches per-repetition engine state on the proper training rows only.
class EngineSession {
 public:
  EngineSession(Engine engine, const EngineConfig& cfg, const Dataset& proper_train, std::uint64_t seed,
                std::shared_ptr<const OracleFrame> oracle = nullptr)
      : engine_(engine), cfg_(cfg), train_(proper_train), seed_(seed), oracle_(std::move(oracle)) {
    if (engine_ == Engine::oracle && !oracle_)
      throw Error(ErrorCode::invalid_argument, "oracle engine is only available for synthetic data");
  }

  MeanPtr mean() {
    if (mean_) return mean_;
    switch (engine_) {
      case Engine::ridge: {
        const double lambda =
            ridge_cv_select(train_.X, train_.y, cfg_.ridge_grid, cfg_.ridge_cv_folds, mix_seed(seed_, 11));
        mean_ = std::make_shared<RidgeModel>(ridge_fit(train_.X, train_.y, RegularizerSpec(lambda)));
        break;
      }
      case Engine::mlp: {
        auto c = cfg_.mlp;
        c.seed = mix_seed(seed_, 12);
        mean_ = std::make_shared<MlpMeanModel>(mlp_fit_mean(train_.X, train_.y, c));
        break;
      }
      case Engine::qrf: mean_ = std::make_shared<ForestMeanModel>(forest()); break;
      case Engine::linear_q:
        mean_ = std::make_shared<LinearMedianModel>(
            linear_pinball_fit(train_.X, train_.y, QuantileLevel(0.5), cfg_.linear));
        break;
      case Engine::oracle: mean_ = std::make_shared<OracleMedianModel>(oracle_); break;
    }
    return mean_;
  }

  /// Dispersion model fitted to the in-sample absolute residuals of mean().
  DispersionPtr dispersion() {
    if (dispersion_) return dispersion_;
    if (engine_ == Engine::oracle) return dispersion_ = std::make_shared<OracleScaleModel>(oracle_);
    const Vector pred = mean()->predict_all(train_.X);
    const Vector r = (train_.y - pred).cwiseAbs();
    switch (engine_) {
      case Engine::mlp: {
        auto c = cfg_.mlp;
        c.seed = mix_seed(seed_, 13);
        dispersion_ = std::make_shared<MlpDispersionModel>(mlp_fit_dispersion(train_.X, r, c));
        break;
      }
      case Engine::qrf: {
        auto c = fitted_forest_config(cfg_.forest, train_.rows());
        c.seed = mix_seed(seed_, 14);
        dispersion_ = std::make_shared<ForestDispersionModel>(
            std::make_shared<const Forest>(Forest::fit(train_.X, r, c)));
        break;
      }
      default: {
        const auto k = std::min<std::size_t>(cfg_.knn_k, train_.rows());
        dispersion_ = std::make_shared<KnnDispersion>(knn_mad_fit(train_.X, r, k));
        break;
      }
    }
    return dispersion_;
  }

  /// Quantile predictor at the given levels.
  QuantilePtr quantiles(double level_lo, double level_hi) { return family()(level_lo, level_hi); }

  QuantileFamily family() {
    if (family_) return family_;
    // The conditional-mean forest and the quantile forest are the same trees.
    family_ = engine_ == Engine::qrf ? forest_family(forest())
                                     : make_quantile_fitter(engine_, cfg_, seed_, oracle_)(train_);
    return family_;
  }

  static QuantileFamily forest_family(ForestPtr f) {
    return [f](double lo, double hi) -> QuantilePtr {
      return std::make_shared<ForestQuantileModel>(f, QuantileLevel(lo), QuantileLevel(hi));
    };
  }

  /// Fitter usable on arbitrary subsets of the proper training rows (for tuning).
  static QuantileFitter make_quantile_fitter(Engine engine, const EngineConfig& cfg, std::uint64_t seed,
                                             std::shared_ptr<const OracleFrame> oracle = nullptr) {
    switch (engine) {
      case Engine::qrf:
        return [cfg, seed](const Dataset& d) -> QuantileFamily {
          auto c = fitted_forest_config(cfg.forest, d.rows());
          c.seed = mix_seed(seed, 15);
          return forest_family(std::make_shared<const Forest>(Forest::fit(d.X, d.y, c)));
        };
      case Engine::mlp:
        return [cfg, seed](const Dataset& d) -> QuantileFamily {
          auto data = std::make_shared<const Dataset>(d);
          auto cache = std::make_shared<std::map<std::pair<double, double>, QuantilePtr>>();
          return [cfg, seed, data, cache](double lo, double hi) -> QuantilePtr {
            auto& slot = (*cache)[{lo, hi}];
            if (!slot) {
              auto c = cfg.mlp;
              c.seed = mix_seed(seed, 16);
              slot = std::make_shared<MlpQuantileModel>(
                  mlp_fit_quantiles(data->X, data->y, QuantileLevel(lo), QuantileLevel(hi), c));
            }
            return slot;
          };
        };
      case Engine::linear_q:
        return [cfg](const Dataset& d) -> QuantileFamily {
          auto data = std::make_shared<const Dataset>(d);
          return [cfg, data](double lo, double hi) -> QuantilePtr {
            return std::make_shared<LinearQuantileModel>(
                linear_quantile_fit(data->X, data->y, QuantileLevel(lo), QuantileLevel(hi), cfg.linear));
          };
        };
      case Engine::oracle:
        if (!oracle) throw Error(ErrorCode::invalid_argument, "oracle engine is only available for synthetic data");
        return [oracle](const Dataset&) -> QuantileFamily {
          return [oracle](double lo, double hi) -> QuantilePtr {
            return std::make_shared<OracleQuantileModel>(oracle, lo, hi);
          };
        };
      case Engine::ridge: break;
    }
    throw Error(ErrorCode::invalid_argument, "engine ridge has no quantile regressor; use qrf, mlp or linear-q");
  }

 private:
  ForestPtr forest() {
    if (!forest_) {
      auto c = fitted_forest_config(cfg_.forest, train_.rows());
      c.seed = mix_seed(seed_, 15);
      forest_ = std::make_shared<const Forest>(Forest::fit(train_.X, train_.y, c));
    }
    return forest_;
  }

  Engine engine_;
  const EngineConfig& cfg_;
  const Dataset& train_;
  std::uint64_t seed_;
  std::shared_ptr<const OracleFrame> oracle_;
  ForestPtr forest_;
  MeanPtr mean_;
  DispersionPtr dispersion_;
  QuantileFamily family_;
};

}  // namespace cqr

#endif  // CQR_ENGINES_HPP
