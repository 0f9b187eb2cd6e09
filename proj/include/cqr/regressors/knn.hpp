#ifndef CQR_REGRESSORS_KNN_HPP
#define CQR_REGRESSORS_KNN_HPP

#include <algorithm>
#include <utility>
#include <vector>

#include "cqr/regressors/interfaces.hpp"

namespace cqr {

/// k-nearest-neighbour average of absolute residuals (Euclidean distance, brute force).
/// Equal distances are broken by training row order.
class KnnDispersion final : public DispersionRegressor {
 public:
  KnnDispersion(Matrix X, Vector residuals, std::size_t k)
      : X_(std::move(X)), r_(std::move(residuals)), k_(k) {}

  double predict(Row x) const override {
    const auto n = static_cast<std::size_t>(X_.rows());
    std::vector<std::pair<double, std::size_t>> d(n);
    for (std::size_t i = 0; i < n; ++i)
      d[i] = {(X_.row(static_cast<Eigen::Index>(i)) - x).squaredNorm(), i};
    std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k_ - 1), d.end());
    double acc = 0.0;
    for (std::size_t j = 0; j < k_; ++j) acc += r_(static_cast<Eigen::Index>(d[j].second));
    return acc / static_cast<double>(k_);
  }

  std::size_t k() const noexcept { return k_; }

 private:
  Matrix X_;
  Vector r_;
  std::size_t k_;
};

inline KnnDispersion knn_mad_fit(const Matrix& X, const Vector& residuals, std::size_t k) {
  if (X.rows() != residuals.size()) throw Error(ErrorCode::invalid_argument, "row count mismatch");
  if (k < 1 || k > static_cast<std::size_t>(X.rows()))
    throw Error(ErrorCode::invalid_argument, "k must lie in [1, n]");
  if ((residuals.array() < 0.0).any())
    throw Error(ErrorCode::invalid_argument, "residuals must be non-negative");
  return KnnDispersion(X, residuals, k);
}

}  // namespace cqr

#endif  // CQR_REGRESSORS_KNN_HPP
