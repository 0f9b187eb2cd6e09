#ifndef CQR_LOSSES_HPP
#define CQR_LOSSES_HPP

#include <cstddef>
#include <span>

#include "cqr/quantile.hpp"
#include "cqr/types.hpp"

namespace cqr {

/// Check (pinball) loss for a target quantile level. Its population minimiser
/// is the level-quantile of the response.
class PinballLoss {
 public:
  explicit PinballLoss(QuantileLevel level) : alpha_(level.value()) {}
  explicit PinballLoss(double level) : PinballLoss(QuantileLevel(level)) {}

  double level() const noexcept { return alpha_; }

  double operator()(double y, double y_hat) const noexcept {
    const double r = y - y_hat;
    return r > 0.0 ? alpha_ * r : (1.0 - alpha_) * (-r);
  }

  /// d/d(y_hat). At the kink the subgradient 0 is chosen.
  double subgradient(double y, double y_hat) const noexcept {
    if (y > y_hat) return -alpha_;
    if (y < y_hat) return 1.0 - alpha_;
    return 0.0;
  }

  double mean(std::span<const double> y, std::span<const double> y_hat) const {
    if (y.size() != y_hat.size()) throw Error(ErrorCode::invalid_argument, "size mismatch");
    if (y.empty()) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) acc += (*this)(y[i], y_hat[i]);
    return acc / static_cast<double>(y.size());
  }

 private:
  double alpha_;
};

inline double squared_error(double y, double y_hat) noexcept {
  const double r = y - y_hat;
  return r * r;
}

inline double squared_error_gradient(double y, double y_hat) noexcept { return 2.0 * (y_hat - y); }

inline double mean_squared_error(std::span<const double> y, std::span<const double> y_hat) {
  if (y.size() != y_hat.size()) throw Error(ErrorCode::invalid_argument, "size mismatch");
  if (y.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) acc += squared_error(y[i], y_hat[i]);
  return acc / static_cast<double>(y.size());
}

/// L2 penalty weight * ||theta||^2.
class RegularizerSpec {
 public:
  explicit RegularizerSpec(double l2_weight = 0.0) : l2_(l2_weight) {
    if (!(l2_weight >= 0.0)) throw Error(ErrorCode::invalid_argument, "l2 weight must be non-negative");
  }
  double l2_weight() const noexcept { return l2_; }

  double penalty(std::span<const double> theta) const noexcept {
    double acc = 0.0;
    for (double t : theta) acc += t * t;
    return l2_ * acc;
  }
  double gradient(double theta_j) const noexcept { return 2.0 * l2_ * theta_j; }

 private:
  double l2_;
};

}  // namespace cqr

#endif  // CQR_LOSSES_HPP
