#ifndef CQR_QUANTILE_HPP
#define CQR_QUANTILE_HPP

// Exact empirical quantiles as order statistics. No interpolation anywhere:
// the finite-sample coverage results only hold for the ceil(level * n) rule.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "cqr/types.hpp"

namespace cqr {

/// A probability level strictly inside (0, 1).
class QuantileLevel {
 public:
  explicit QuantileLevel(double value) : value_(value) {
    if (!(value > 0.0 && value < 1.0))
      throw Error(ErrorCode::invalid_argument, "quantile level must lie in (0, 1)");
  }
  double value() const noexcept { return value_; }

 private:
  double value_;
};

/// Immutable ascending multiset of scores. Order statistics are 1-indexed.
class SortedSample {
 public:
  explicit SortedSample(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty()) throw Error(ErrorCode::empty_sample, "empty sample");
    std::sort(values_.begin(), values_.end());
  }
  explicit SortedSample(std::span<const double> values)
      : SortedSample(std::vector<double>(values.begin(), values.end())) {}

  std::size_t size() const noexcept { return values_.size(); }
  std::span<const double> values() const noexcept { return values_; }

  /// Z_(k), 1 <= k <= n.
  double order_statistic(std::size_t k) const {
    if (k < 1 || k > values_.size())
      throw Error(ErrorCode::invalid_argument, "order statistic index out of range");
    return values_[k - 1];
  }

 private:
  std::vector<double> values_;
};

namespace detail {

// level * n is usually meant to be an exact integer when it looks like one
// (0.9 * (1 + 1/9) * 9 == 9); round-off must not push it to the next rank.
inline double snap_to_integer(double x) {
  const double r = std::round(x);
  return std::abs(x - r) <= 1e-9 * std::max(1.0, std::abs(x)) ? r : x;
}

/// ceil(level * n) with round-off snapping; 0 is lifted to rank 1.
inline std::size_t ceil_rank(double level, std::size_t n) {
  const double k = std::ceil(snap_to_integer(level * static_cast<double>(n)));
  return static_cast<std::size_t>(std::max(1.0, k));
}

}  // namespace detail

/// Left empirical quantile: Z_(ceil(level * n)).
inline double empirical_quantile(const SortedSample& s, QuantileLevel level) {
  return s.order_statistic(std::min(detail::ceil_rank(level.value(), s.size()), s.size()));
}

/// Right empirical quantile: Z_(floor(level * n) + 1).
inline double right_empirical_quantile(const SortedSample& s, QuantileLevel level) {
  const double k = std::floor(detail::snap_to_integer(level.value() * static_cast<double>(s.size())));
  return s.order_statistic(std::min(static_cast<std::size_t>(k) + 1, s.size()));
}

/// The (1 - alpha)(1 + 1/n)-th empirical quantile of the calibration scores.
/// Returns +infinity when that level exceeds one, i.e. when the calibration set is too
/// small for the requested miscoverage; the resulting interval is then the whole line.
inline double inflated_quantile(const SortedSample& s, QuantileLevel alpha) {
  const std::size_t n = s.size();
  // (1 - alpha)(1 + 1/n) * n == (1 - alpha)(n + 1)
  const double k = std::ceil(detail::snap_to_integer((1.0 - alpha.value()) * static_cast<double>(n + 1)));
  if (k > static_cast<double>(n)) return std::numeric_limits<double>::infinity();
  return s.order_statistic(static_cast<std::size_t>(std::max(1.0, k)));
}

/// Fraction of sample values <= z.
inline double empirical_cdf(const SortedSample& s, double z) {
  const auto v = s.values();
  const auto it = std::upper_bound(v.begin(), v.end(), z);
  return static_cast<double>(it - v.begin()) / static_cast<double>(v.size());
}

/// Fraction of sample values < z.
inline double empirical_cdf_strict(const SortedSample& s, double z) {
  const auto v = s.values();
  const auto it = std::lower_bound(v.begin(), v.end(), z);
  return static_cast<double>(it - v.begin()) / static_cast<double>(v.size());
}

}  // namespace cqr

#endif  // CQR_QUANTILE_HPP
