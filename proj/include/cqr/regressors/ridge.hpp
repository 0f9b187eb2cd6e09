#ifndef CQR_REGRESSORS_RIDGE_HPP
#define CQR_REGRESSORS_RIDGE_HPP

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "cqr/losses.hpp"
#include "cqr/regressors/interfaces.hpp"

namespace cqr {

/// Linear model x * coef + intercept.
class RidgeModel final : public MeanRegressor {
 public:
  RidgeModel(Vector coef, double intercept) : coef_(std::move(coef)), intercept_(intercept) {}

  double predict(Row x) const override { return x.dot(coef_) + intercept_; }
  Vector predict_all(const Matrix& X) const override {
    return (X * coef_).array() + intercept_;
  }

  const Vector& coefficients() const noexcept { return coef_; }
  double intercept() const noexcept { return intercept_; }

 private:
  Vector coef_;
  double intercept_;
};

/// Closed-form ridge regression on centred data; the intercept is not penalised.
inline RidgeModel ridge_fit(const Matrix& X, const Vector& y, RegularizerSpec reg) {
  if (X.rows() != y.size() || y.size() < 1)
    throw Error(ErrorCode::invalid_argument, "ridge_fit needs rows(X) == len(Y) >= 1");
  const Eigen::RowVectorXd x_mean = X.colwise().mean();
  const double y_mean = y.mean();
  const Matrix Xc = X.rowwise() - x_mean;
  const Vector yc = y.array() - y_mean;

  const Eigen::Index p = X.cols();
  Eigen::MatrixXd gram = Xc.transpose() * Xc;
  const Vector rhs = Xc.transpose() * yc;
  Vector coef(p);
  if (reg.l2_weight() > 0.0) {
    gram.diagonal().array() += reg.l2_weight();
    Eigen::LLT<Eigen::MatrixXd> llt(gram);
    if (llt.info() != Eigen::Success)
      throw Error(ErrorCode::singular_system, "singular normal equations; use λ > 0");
    coef = llt.solve(rhs);
  } else {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(gram);
    qr.setThreshold(1e-10);
    if (qr.rank() < p) throw Error(ErrorCode::singular_system, "singular normal equations; use λ > 0");
    coef = qr.solve(rhs);
  }
  const double intercept = y_mean - x_mean.dot(coef);
  return RidgeModel(std::move(coef), intercept);
}

/// Deterministic k-fold assignment: fold id for every row.
inline std::vector<int> fold_assignment(std::size_t n, int folds, std::uint64_t seed) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<int> id(n);
  for (std::size_t i = 0; i < n; ++i) id[perm[i]] = static_cast<int>(i % static_cast<std::size_t>(folds));
  return id;
}

inline std::vector<double> default_ridge_grid() { return {1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3}; }

/// Picks the penalty with the lowest k-fold validation MSE. Ties go to the larger penalty.
inline double ridge_cv_select(const Matrix& X, const Vector& y, std::span<const double> grid, int folds,
                              std::uint64_t seed) {
  if (grid.empty()) throw Error(ErrorCode::invalid_argument, "empty ridge grid");
  const std::size_t n = static_cast<std::size_t>(y.size());
  folds = std::clamp(folds, 2, static_cast<int>(std::max<std::size_t>(n, 2)));
  const auto id = fold_assignment(n, folds, seed);
  const Dataset all(X, y);

  double best_lambda = grid.front();
  double best_score = std::numeric_limits<double>::infinity();
  for (double lambda : grid) {
    double sse = 0.0;
    for (int f = 0; f < folds; ++f) {
      std::vector<std::size_t> tr, va;
      for (std::size_t i = 0; i < n; ++i) (id[i] == f ? va : tr).push_back(i);
      if (tr.empty() || va.empty()) continue;
      const auto dtr = all.subset(tr);
      const auto dva = all.subset(va);
      const auto model = ridge_fit(dtr.X, dtr.y, RegularizerSpec(lambda));
      sse += (model.predict_all(dva.X) - dva.y).squaredNorm();
    }
    if (sse <= best_score) {
      best_score = sse;
      best_lambda = lambda;
    }
  }
  return best_lambda;
}

}  // namespace cqr

#endif  // CQR_REGRESSORS_RIDGE_HPP
