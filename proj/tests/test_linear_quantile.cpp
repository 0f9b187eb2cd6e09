#include <catch_amalgamated.hpp>

#include <random>

#include "cqr/quantile.hpp"
#include "cqr/regressors/linear_quantile.hpp"

using Catch::Approx;
using cqr::LinearQuantileConfig;
using cqr::Matrix;
using cqr::QuantileLevel;
using cqr::Vector;

namespace {

Vector one_to(int n) {
  Vector y(n);
  for (int i = 0; i < n; ++i) y(i) = i + 1;
  return y;
}

}  // namespace

TEST_CASE("uninformative features: intercept converges to the sample quantile", "[linear_q]") {
  const Matrix X = Matrix::Zero(99, 1);
  const Vector y = one_to(99);
  const LinearQuantileConfig cfg{4000, 0.5};
  const auto med = cqr::linear_pinball_fit(X, y, QuantileLevel(0.5), cfg);
  CHECK(med.intercept == Approx(50).margin(1.0));
  const auto lo = cqr::linear_pinball_fit(X, y, QuantileLevel(0.05), cfg);
  CHECK(lo.intercept == Approx(5).margin(2.0));
}

TEST_CASE("constant-model fit agrees with the empirical quantile", "[linear_q][property]") {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> z;
  const int n = 201;
  Vector y(n);
  for (int i = 0; i < n; ++i) y(i) = z(rng);
  std::vector<double> v(y.data(), y.data() + n);
  const cqr::SortedSample s(v);
  for (double a : {0.1, 0.5, 0.9}) {
    const auto fit = cqr::linear_pinball_fit(Matrix::Zero(n, 1), y, QuantileLevel(a), {6000, 0.05});
    const double q = cqr::empirical_quantile(s, QuantileLevel(a));
    // The pinball minimiser set spans adjacent order statistics.
    const double lo = s.order_statistic(std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(a * n))));
    const double hi = s.order_statistic(std::min<std::size_t>(n, static_cast<std::size_t>(std::ceil(a * n)) + 1));
    INFO("a=" << a << " fit=" << fit.intercept << " q=" << q);
    CHECK(fit.intercept >= lo - 0.05);
    CHECK(fit.intercept <= hi + 0.05);
  }
}

TEST_CASE("noise-free linear data: both quantiles recover the line", "[linear_q]") {
  const int n = 50;
  Matrix X(n, 1);
  Vector y(n);
  for (int i = 0; i < n; ++i) {
    X(i, 0) = -1.0 + 2.0 * i / (n - 1);
    y(i) = 1.5 * X(i, 0) - 0.5;
  }
  const auto m = cqr::linear_quantile_fit(X, y, QuantileLevel(0.05), QuantileLevel(0.95), {40000, 0.01});
  for (int i = 0; i < n; i += 7) {
    const auto q = m.predict_pair(X.row(i));
    CHECK(q.lo == Approx(y(i)).margin(1e-2));
    CHECK(q.hi == Approx(y(i)).margin(1e-2));
  }
}

TEST_CASE("fits are deterministic", "[linear_q]") {
  std::mt19937_64 rng(22);
  std::normal_distribution<double> z;
  Matrix X(80, 2);
  Vector y(80);
  for (int i = 0; i < 80; ++i) {
    X(i, 0) = z(rng);
    X(i, 1) = z(rng);
    y(i) = X(i, 0) + z(rng);
  }
  const auto a = cqr::linear_quantile_fit(X, y, QuantileLevel(0.1), QuantileLevel(0.9));
  const auto b = cqr::linear_quantile_fit(X, y, QuantileLevel(0.1), QuantileLevel(0.9));
  CHECK(a.lower().coef == b.lower().coef);
  CHECK(a.upper().intercept == b.upper().intercept);
}

TEST_CASE("divergence and bad configuration", "[linear_q]") {
  Matrix X(3, 1);
  X << 1e300, -1e300, 1e300;
  const Vector y = one_to(3);
  try {
    (void)cqr::linear_pinball_fit(X, y, QuantileLevel(0.5), {100, 1e10});
    FAIL("expected divergence");
  } catch (const cqr::Error& e) {
    CHECK(e.code() == cqr::ErrorCode::diverged);
  }
  CHECK_THROWS_AS(cqr::linear_pinball_fit(Matrix::Zero(3, 1), y, QuantileLevel(0.5), {0, 0.1}), cqr::Error);
  CHECK_THROWS_AS(cqr::linear_pinball_fit(Matrix::Zero(2, 1), y, QuantileLevel(0.5), {10, 0.1}), cqr::Error);
}
