#ifndef CQR_REGRESSORS_INTERFACES_HPP
#define CQR_REGRESSORS_INTERFACES_HPP

#include <functional>
#include <memory>
#include <vector>

#include "cqr/types.hpp"

namespace cqr {

/// Fitted conditional-mean predictor. Immutable after fitting.
class MeanRegressor {
 public:
  virtual ~MeanRegressor() = default;
  virtual double predict(Row x) const = 0;

  virtual Vector predict_all(const Matrix& X) const {
    Vector out(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) out(i) = predict(X.row(i));
    return out;
  }
};

struct QuantilePair {
  double lo = 0.0;
  double hi = 0.0;
  friend bool operator==(const QuantilePair&, const QuantilePair&) = default;
};

/// Fitted pair of conditional quantile predictors at levels (level_lo, level_hi).
class QuantileRegressor {
 public:
  virtual ~QuantileRegressor() = default;
  virtual QuantilePair predict_pair(Row x) const = 0;

  virtual std::vector<QuantilePair> predict_all(const Matrix& X) const {
    std::vector<QuantilePair> out(static_cast<std::size_t>(X.rows()));
    for (Eigen::Index i = 0; i < X.rows(); ++i) out[static_cast<std::size_t>(i)] = predict_pair(X.row(i));
    return out;
  }
};

/// Fitted dispersion (conditional mean absolute deviation) predictor; outputs are >= 0.
class DispersionRegressor {
 public:
  virtual ~DispersionRegressor() = default;
  virtual double predict(Row x) const = 0;

  virtual Vector predict_all(const Matrix& X) const {
    Vector out(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) out(i) = predict(X.row(i));
    return out;
  }
};

using MeanPtr = std::shared_ptr<const MeanRegressor>;
using QuantilePtr = std::shared_ptr<const QuantileRegressor>;
using DispersionPtr = std::shared_ptr<const DispersionRegressor>;

/// Returns a quantile predictor for the requested levels. Engines that can read any
/// level off a single fit (quantile forests) return cheap views; others refit.
using QuantileFamily = std::function<QuantilePtr(double level_lo, double level_hi)>;

/// Fits a quantile family on the given training rows.
using QuantileFitter = std::function<QuantileFamily(const Dataset& train)>;

}  // namespace cqr

#endif  // CQR_REGRESSORS_INTERFACES_HPP
