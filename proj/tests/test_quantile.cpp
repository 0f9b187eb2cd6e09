#include <catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "cqr/quantile.hpp"

using cqr::QuantileLevel;
using cqr::SortedSample;
using Catch::Approx;

namespace {

std::vector<double> iota_sample(int n) {
  std::vector<double> v;
  for (int i = 1; i <= n; ++i) v.push_back(i);
  return v;
}

// Naive oracle: sort, then index ceil(a*n) computed in exact rational arithmetic on a
// grid a = num / den.
double oracle_quantile(std::vector<double> v, long num, long den) {
  std::sort(v.begin(), v.end());
  const long n = static_cast<long>(v.size());
  long k = (num * n + den - 1) / den;
  k = std::clamp(k, 1L, n);
  return v[static_cast<std::size_t>(k - 1)];
}

}  // namespace

TEST_CASE("sorted sample keeps order statistics", "[quantile]") {
  SortedSample s(std::vector<double>{3, 1, 2, 2});
  REQUIRE(s.size() == 4);
  CHECK(s.order_statistic(1) == 1);
  CHECK(s.order_statistic(2) == 2);
  CHECK(s.order_statistic(3) == 2);
  CHECK(s.order_statistic(4) == 3);
  CHECK_THROWS_AS(s.order_statistic(0), cqr::Error);
  CHECK_THROWS_AS(s.order_statistic(5), cqr::Error);
}

TEST_CASE("empty sample and bad levels are rejected", "[quantile]") {
  CHECK_THROWS_WITH(SortedSample(std::vector<double>{}), "empty sample");
  try {
    SortedSample(std::vector<double>{});
  } catch (const cqr::Error& e) {
    CHECK(e.code() == cqr::ErrorCode::empty_sample);
  }
  CHECK_THROWS_AS(QuantileLevel(0.0), cqr::Error);
  CHECK_THROWS_AS(QuantileLevel(1.0), cqr::Error);
  CHECK_THROWS_AS(QuantileLevel(-0.2), cqr::Error);
  CHECK_THROWS_AS(QuantileLevel(std::nan("")), cqr::Error);
}

TEST_CASE("left empirical quantile examples", "[quantile]") {
  CHECK(cqr::empirical_quantile(SortedSample(iota_sample(5)), QuantileLevel(0.5)) == 3);
  for (double a : {0.01, 0.3, 0.5, 0.99}) CHECK(cqr::empirical_quantile(SortedSample(std::vector<double>{7}), QuantileLevel(a)) == 7);
  CHECK(cqr::empirical_quantile(SortedSample(iota_sample(10)), QuantileLevel(0.91)) == 10);
  CHECK(cqr::empirical_quantile(SortedSample(iota_sample(5)), QuantileLevel(0.4)) == 2);
}

TEST_CASE("right empirical quantile examples", "[quantile]") {
  CHECK(cqr::right_empirical_quantile(SortedSample(iota_sample(5)), QuantileLevel(0.5)) == 3);
  CHECK(cqr::right_empirical_quantile(SortedSample(iota_sample(5)), QuantileLevel(0.4)) == 3);
  for (double a : {0.01, 0.5, 0.99})
    CHECK(cqr::right_empirical_quantile(SortedSample(std::vector<double>{7}), QuantileLevel(a)) == 7);
}

TEST_CASE("inflated quantile examples", "[quantile]") {
  CHECK(cqr::inflated_quantile(SortedSample(iota_sample(9)), QuantileLevel(0.1)) == 9);
  CHECK(cqr::inflated_quantile(SortedSample(iota_sample(99)), QuantileLevel(0.1)) == 90);
  const double q = cqr::inflated_quantile(SortedSample(iota_sample(3)), QuantileLevel(0.1));
  CHECK(std::isinf(q));
  CHECK(q > 0);
}

TEST_CASE("empirical cdf examples", "[quantile]") {
  const SortedSample s(iota_sample(3));
  CHECK(cqr::empirical_cdf(s, 2) == Approx(2.0 / 3.0));
  CHECK(cqr::empirical_cdf_strict(s, 2) == Approx(1.0 / 3.0));
  CHECK(cqr::empirical_cdf(s, 0) == 0);
  CHECK(cqr::empirical_cdf_strict(s, 0) == 0);
  CHECK(cqr::empirical_cdf(s, 3) == 1);
  CHECK(cqr::empirical_cdf_strict(s, 3) == Approx(2.0 / 3.0));
}

TEST_CASE("levels that are integral up to round-off pick the exact rank", "[quantile]") {
  // 0.9 * 10 and 0.7 * 10 are not exact in binary.
  CHECK(cqr::empirical_quantile(SortedSample(iota_sample(10)), QuantileLevel(0.9)) == 9);
  CHECK(cqr::empirical_quantile(SortedSample(iota_sample(10)), QuantileLevel(0.7)) == 7);
  CHECK(cqr::right_empirical_quantile(SortedSample(iota_sample(10)), QuantileLevel(0.7)) == 8);
  CHECK(cqr::inflated_quantile(SortedSample(iota_sample(19)), QuantileLevel(0.05)) == 19);
}

TEST_CASE("property: Galois connection between quantile and cdf", "[quantile][property]") {
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<int> size(1, 30);
  std::uniform_int_distribution<int> val(-5, 5);  // small range forces ties
  std::uniform_real_distribution<double> lvl(0.001, 0.999);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<double> v(static_cast<std::size_t>(size(rng)));
    for (auto& x : v) x = val(rng);
    const SortedSample s(v);
    const double a = lvl(rng);
    const double q = cqr::empirical_quantile(s, QuantileLevel(a));
    for (double z = -6; z <= 6; z += 0.5) {
      INFO("trial " << trial << " a=" << a << " z=" << z);
      CHECK((q <= z) == (a <= cqr::empirical_cdf(s, z) + 1e-12));
    }
  }
}

TEST_CASE("property: empirical quantile matches sort-index oracle", "[quantile][property]") {
  std::mt19937_64 rng(202);
  std::uniform_int_distribution<int> size(1, 50);
  std::normal_distribution<double> z;
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> v(static_cast<std::size_t>(size(rng)));
    for (auto& x : v) x = z(rng);
    const SortedSample s(v);
    for (long num = 1; num < 100; ++num) {
      const double a = static_cast<double>(num) / 100.0;
      REQUIRE(cqr::empirical_quantile(s, QuantileLevel(a)) == oracle_quantile(v, num, 100));
    }
  }
}

TEST_CASE("property: right quantile is never below left quantile", "[quantile][property]") {
  std::mt19937_64 rng(303);
  std::uniform_int_distribution<int> size(1, 40);
  std::uniform_real_distribution<double> u, lvl(0.001, 0.999);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> v(static_cast<std::size_t>(size(rng)));
    for (auto& x : v) x = u(rng);
    const SortedSample s(v);
    const QuantileLevel a(lvl(rng));
    CHECK(cqr::empirical_quantile(s, a) <= cqr::right_empirical_quantile(s, a));
  }
}

TEST_CASE("property: a sample member falls at or below the level quantile w.p. in [a, a + 1/n]",
          "[quantile][property][montecarlo]") {
  std::mt19937_64 rng(404);
  std::uniform_real_distribution<double> u;
  const int trials = 100000;
  for (auto [n, a] : {std::pair{7, 0.3}, std::pair{20, 0.9}, std::pair{5, 0.5}}) {
    int hits = 0;
    std::vector<double> v(static_cast<std::size_t>(n));
    for (int t = 0; t < trials; ++t) {
      for (auto& x : v) x = u(rng);
      const double last = v.back();
      if (last <= cqr::empirical_quantile(SortedSample(v), QuantileLevel(a))) ++hits;
    }
    const double p = static_cast<double>(hits) / trials;
    const double se = std::sqrt(p * (1 - p) / trials);
    INFO("n=" << n << " a=" << a << " p=" << p);
    CHECK(p >= a - 4 * se);
    CHECK(p <= a + 1.0 / n + 4 * se);
  }
}

TEST_CASE("property: fresh draw falls below the inflated quantile w.p. ceil(a(n+1))/(n+1)",
          "[quantile][property][montecarlo]") {
  std::mt19937_64 rng(505);
  std::uniform_real_distribution<double> u;
  const int trials = 100000;
  for (auto [n, alpha] : {std::pair{9, 0.5}, std::pair{19, 0.1}, std::pair{12, 0.25}}) {
    const double target = std::ceil((1 - alpha) * (n + 1) - 1e-9) / (n + 1);
    int hits = 0;
    std::vector<double> v(static_cast<std::size_t>(n));
    for (int t = 0; t < trials; ++t) {
      for (auto& x : v) x = u(rng);
      if (u(rng) <= cqr::inflated_quantile(SortedSample(v), QuantileLevel(alpha))) ++hits;
    }
    const double p = static_cast<double>(hits) / trials;
    const double se = std::sqrt(target * (1 - target) / trials);
    INFO("n=" << n << " alpha=" << alpha << " p=" << p << " target=" << target);
    CHECK(std::abs(p - target) <= 4 * se);
    CHECK(target >= 1 - alpha);
    CHECK(target <= 1 - alpha + 1.0 / n);
  }
}
