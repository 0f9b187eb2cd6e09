#ifndef CQR_REGRESSORS_LINEAR_QUANTILE_HPP
#define CQR_REGRESSORS_LINEAR_QUANTILE_HPP

#include <cmath>

#include "cqr/losses.hpp"
#include "cqr/regressors/interfaces.hpp"

namespace cqr {

struct LinearQuantileConfig {
  int epochs = 2000;
  double learning_rate = 0.05;
};

struct LinearFit {
  Vector coef;
  double intercept = 0.0;

  double predict(Row x) const { return x.dot(coef) + intercept; }
};

/// Full-batch subgradient descent on the mean pinball loss of a linear model.
/// The returned parameters are the average of the iterates over the second half of
/// training, which removes the step-size-scale oscillation around the kinked optimum.
inline LinearFit linear_pinball_fit(const Matrix& X, const Vector& y, QuantileLevel level,
                                    const LinearQuantileConfig& cfg) {
  if (X.rows() != y.size() || y.size() < 1)
    throw Error(ErrorCode::invalid_argument, "linear quantile fit needs rows(X) == len(Y) >= 1");
  if (cfg.epochs < 1 || !(cfg.learning_rate > 0.0))
    throw Error(ErrorCode::invalid_argument, "epochs and learning rate must be positive");

  const PinballLoss loss(level);
  const double inv_n = 1.0 / static_cast<double>(y.size());
  Vector coef = Vector::Zero(X.cols());
  double b = 0.0;
  Vector coef_avg = Vector::Zero(X.cols());
  double b_avg = 0.0;
  int averaged = 0;
  const int average_from = cfg.epochs / 2;

  Vector g(y.size());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const Vector pred = (X * coef).array() + b;
    for (Eigen::Index i = 0; i < y.size(); ++i) g(i) = loss.subgradient(y(i), pred(i));
    coef.noalias() -= cfg.learning_rate * inv_n * (X.transpose() * g);
    b -= cfg.learning_rate * inv_n * g.sum();
    if (!std::isfinite(b) || !coef.allFinite())
      throw Error(ErrorCode::diverged, "diverged; reduce learning rate");
    if (epoch >= average_from) {
      coef_avg += coef;
      b_avg += b;
      ++averaged;
    }
  }
  return {coef_avg / averaged, b_avg / averaged};
}

class LinearQuantileModel final : public QuantileRegressor {
 public:
  LinearQuantileModel(LinearFit lo, LinearFit hi) : lo_(std::move(lo)), hi_(std::move(hi)) {}
  QuantilePair predict_pair(Row x) const override { return {lo_.predict(x), hi_.predict(x)}; }

  const LinearFit& lower() const noexcept { return lo_; }
  const LinearFit& upper() const noexcept { return hi_; }

 private:
  LinearFit lo_, hi_;
};

inline LinearQuantileModel linear_quantile_fit(const Matrix& X, const Vector& y, QuantileLevel level_lo,
                                               QuantileLevel level_hi, const LinearQuantileConfig& cfg = {}) {
  return LinearQuantileModel(linear_pinball_fit(X, y, level_lo, cfg), linear_pinball_fit(X, y, level_hi, cfg));
}

/// Median regression used as the point predictor when the linear engine backs a mean-based method.
class LinearMedianModel final : public MeanRegressor {
 public:
  explicit LinearMedianModel(LinearFit fit) : fit_(std::move(fit)) {}
  double predict(Row x) const override { return fit_.predict(x); }

 private:
  LinearFit fit_;
};

}  // namespace cqr

#endif  // CQR_REGRESSORS_LINEAR_QUANTILE_HPP
