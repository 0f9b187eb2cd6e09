#include <catch_amalgamated.hpp>

#include <cmath>
#include <functional>
#include <random>

#include "cqr/conformal.hpp"
#include "cqr/datagen.hpp"
#include "cqr/engines.hpp"

using Catch::Approx;
using cqr::Dataset;
using cqr::Interval;
using cqr::Matrix;
using cqr::QuantileLevel;
using cqr::QuantilePair;
using cqr::Row;
using cqr::Vector;

namespace {

class FnMean final : public cqr::MeanRegressor {
 public:
  explicit FnMean(std::function<double(double)> f) : f_(std::move(f)) {}
  double predict(Row x) const override { return f_(x(0)); }

 private:
  std::function<double(double)> f_;
};

class FnScale final : public cqr::DispersionRegressor {
 public:
  explicit FnScale(std::function<double(double)> f) : f_(std::move(f)) {}
  double predict(Row x) const override { return f_(x(0)); }

 private:
  std::function<double(double)> f_;
};

class FnQuantiles final : public cqr::QuantileRegressor {
 public:
  FnQuantiles(std::function<double(double)> lo, std::function<double(double)> hi)
      : lo_(std::move(lo)), hi_(std::move(hi)) {}
  QuantilePair predict_pair(Row x) const override { return {lo_(x(0)), hi_(x(0))}; }

 private:
  std::function<double(double)> lo_, hi_;
};

cqr::MeanPtr mean_fn(std::function<double(double)> f) { return std::make_shared<FnMean>(std::move(f)); }
cqr::DispersionPtr scale_fn(std::function<double(double)> f) { return std::make_shared<FnScale>(std::move(f)); }
cqr::QuantilePtr quant_fn(std::function<double(double)> lo, std::function<double(double)> hi) {
  return std::make_shared<FnQuantiles>(std::move(lo), std::move(hi));
}

Dataset points(std::initializer_list<std::pair<double, double>> xy) {
  Matrix X(static_cast<Eigen::Index>(xy.size()), 1);
  Vector y(static_cast<Eigen::Index>(xy.size()));
  Eigen::Index i = 0;
  for (auto [x, v] : xy) {
    X(i, 0) = x;
    y(i++) = v;
  }
  return Dataset(X, y);
}

Eigen::RowVectorXd pt(double x) { return Eigen::RowVectorXd::Constant(1, x); }

// y = x + (0.2 + x) z on x ~ U[0, 2]
Dataset draw(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(0, 2);
  std::normal_distribution<double> z;
  Matrix X(n, 1);
  Vector y(n);
  for (int i = 0; i < n; ++i) {
    X(i, 0) = u(rng);
    y(i) = X(i, 0) + (0.2 + X(i, 0)) * z(rng);
  }
  return Dataset(X, y);
}

}  // namespace

TEST_CASE("split conformal examples", "[conformal]") {
  // Residuals 1..9 around a zero predictor.
  const auto cal = points({{0, 1}, {1, -2}, {2, 3}, {3, -4}, {4, 5}, {5, -6}, {6, 7}, {7, -8}, {8, 9}});
  const auto band = cqr::split_conformal_calibrate(mean_fn([](double) { return 0.0; }), cal, QuantileLevel(0.1));
  CHECK(band.correction() == 9);
  for (double x : {-1.0, 0.0, 3.5}) {
    const auto iv = band.predict(pt(x));
    CHECK(iv.length() == 18);
    CHECK(iv.lo == -9);
  }

  const auto perfect = cqr::split_conformal_calibrate(mean_fn([](double x) { return 2 * x; }),
                                                      points({{1, 2}, {2, 4}, {3, 6}, {4, 8}}), QuantileLevel(0.5));
  CHECK(perfect.predict(pt(7)).length() == 0);
  CHECK(perfect.predict(pt(7)).lo == 14);

  const auto tiny = cqr::split_conformal_calibrate(mean_fn([](double) { return 0.0; }),
                                                   points({{0, 1}, {1, 2}, {2, 3}}), QuantileLevel(0.1));
  const auto iv = tiny.predict(pt(0));
  CHECK(std::isinf(iv.lo));
  CHECK(iv.lo < 0);
  CHECK(std::isinf(iv.hi));
  CHECK(iv.hi > 0);
  CHECK(iv.contains(1e300));
}

TEST_CASE("local conformal examples", "[conformal]") {
  std::mt19937_64 rng(1);
  const auto cal = draw(rng, 99);
  const auto test = draw(rng, 50);
  const auto mu = mean_fn([](double x) { return x; });

  SECTION("unit scale with zero offset is split conformal") {
    const auto split = cqr::split_conformal_calibrate(mu, cal, QuantileLevel(0.1));
    const auto local =
        cqr::local_conformal_calibrate(mu, scale_fn([](double) { return 1.0; }), cal, QuantileLevel(0.1), 0.0);
    const auto a = split.predict_all(test.X), b = local.predict_all(test.X);
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].lo == b[i].lo);
      CHECK(a[i].hi == b[i].hi);
    }
  }
  SECTION("constant rescaling of the dispersion model leaves intervals unchanged") {
    const auto base = cqr::local_conformal_calibrate(mu, scale_fn([](double x) { return 0.2 + x; }), cal,
                                                     QuantileLevel(0.1), 0.0);
    const auto scaled = cqr::local_conformal_calibrate(mu, scale_fn([](double x) { return 7.3 * (0.2 + x); }), cal,
                                                       QuantileLevel(0.1), 0.0);
    const auto a = base.predict_all(test.X), b = scaled.predict_all(test.X);
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].lo == Approx(b[i].lo).epsilon(1e-12));
      CHECK(a[i].hi == Approx(b[i].hi).epsilon(1e-12));
    }
  }
  SECTION("huge offset approaches split conformal widths") {
    const auto split = cqr::split_conformal_calibrate(mu, cal, QuantileLevel(0.1));
    const auto local = cqr::local_conformal_calibrate(mu, scale_fn([](double x) { return 0.2 + x; }), cal,
                                                      QuantileLevel(0.1), 1e6);
    const auto a = split.predict_all(test.X), b = local.predict_all(test.X);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(b[i].length() == Approx(a[i].length()).epsilon(1e-5));
  }
  SECTION("zero scale is an error") {
    try {
      (void)cqr::local_conformal_calibrate(mu, scale_fn([](double) { return 0.0; }), cal, QuantileLevel(0.1), 0.0);
      FAIL("expected zero scale");
    } catch (const cqr::Error& e) {
      CHECK(e.code() == cqr::ErrorCode::zero_scale);
      CHECK(std::string(e.what()) == "zero scale; set γ > 0");
    }
    const auto band = cqr::local_conformal_calibrate(mu, scale_fn([](double x) { return x > 5 ? 0.0 : 1.0; }), cal,
                                                     QuantileLevel(0.1), 0.0);
    CHECK_THROWS_AS(band.predict(pt(6)), cqr::Error);
    CHECK_THROWS_AS(cqr::local_conformal_calibrate(mu, scale_fn([](double) { return 1.0; }), cal,
                                                   QuantileLevel(0.1), -1.0),
                    cqr::Error);
  }
}

TEST_CASE("cqr conformity score", "[conformal]") {
  const QuantilePair q{-1, 1};
  CHECK(cqr::cqr_score(q, 2) == 1);
  CHECK(cqr::cqr_score(q, 0) == -1);
  CHECK(cqr::cqr_score(q, -3) == 2);
}

TEST_CASE("cqr narrows when every calibration point is inside the band", "[conformal]") {
  const auto cal = points({{0, 0.1}, {1, -0.2}, {2, 0.3}, {3, 0.0}, {4, -0.1}, {5, 0.2}, {6, 0.05}, {7, -0.3},
                           {8, 0.15}, {9, 0.25}});
  const auto band = cqr::cqr_calibrate(quant_fn([](double) { return -1.0; }, [](double) { return 1.0; }), cal,
                                       QuantileLevel(0.5));
  CHECK(band.correction() < 0);
  const auto iv = band.predict(pt(0));
  CHECK(iv.lo > -1);
  CHECK(iv.hi < 1);
  CHECK(iv.length() < 2);
}

TEST_CASE("cqr with exact conditional quantiles needs almost no correction", "[conformal]") {
  std::mt19937_64 rng(2);
  const auto cal = draw(rng, 999);
  const double z = cqr::normal_quantile(0.95);
  const auto q = quant_fn([z](double x) { return x - z * (0.2 + x); }, [z](double x) { return x + z * (0.2 + x); });
  const auto band = cqr::cqr_calibrate(q, cal, QuantileLevel(0.1));
  CHECK(std::abs(band.correction()) < 0.1);
}

TEST_CASE("crossed quantile predictions are rejected", "[conformal]") {
  const auto cal = points({{0, 0}, {1, 1}, {2, 2}});
  const auto crossed = quant_fn([](double) { return 1.0; }, [](double) { return -1.0; });
  try {
    (void)cqr::cqr_calibrate(crossed, cal, QuantileLevel(0.5));
    FAIL("expected crossing error");
  } catch (const cqr::Error& e) {
    CHECK(e.code() == cqr::ErrorCode::quantile_crossing);
  }
  CHECK_THROWS_AS(cqr::cqr_asym_calibrate(crossed, cal, QuantileLevel(0.25), QuantileLevel(0.25)), cqr::Error);
}

TEST_CASE("corrected intervals that cross collapse to the midpoint", "[conformal]") {
  // Scores all very negative: the plug-in band is much wider than needed.
  const auto cal = points({{0, 0}, {1, 0}, {2, 0}, {3, 0}});
  const auto band = cqr::cqr_calibrate(quant_fn([](double) { return -10.0; }, [](double) { return 10.0; }), cal,
                                       QuantileLevel(0.5));
  CHECK(band.correction() == -10);
  const auto narrow = cqr::cqr_calibrate(quant_fn([](double x) { return x < 10 ? -10.0 : 1.0; },
                                                  [](double x) { return x < 10 ? 10.0 : 3.0; }),
                                         cal, QuantileLevel(0.5));
  const auto iv = narrow.predict(pt(20));  // (1 + 10, 3 - 10) crosses
  CHECK(iv.collapsed);
  CHECK(iv.lo == 2);
  CHECK(iv.hi == 2);
  CHECK(iv.length() == 0);
}

TEST_CASE("asymmetric cqr with every response below the lower quantile", "[conformal]") {
  const auto cal = points({{0, -1}, {1, -2}, {2, -3}, {3, -4}, {4, -5}});
  const auto band = cqr::cqr_asym_calibrate(quant_fn([](double) { return 0.0; }, [](double) { return 1.0; }), cal,
                                            QuantileLevel(0.4), QuantileLevel(0.4));
  // Lower gaps q_lo - y = 1..5; (1 - 0.4) * 6 = 3.6 -> rank 4.
  CHECK(band.correction_lo() == 4);
  // Upper gaps y - q_hi = -2..-6 -> rank 4 of {-6,-5,-4,-3,-2} is -3.
  CHECK(band.correction_hi() == -3);
  CHECK(band.correction_hi() < 0);
  const auto iv = band.predict(pt(0));
  CHECK(iv.lo == -4);
  CHECK(iv.hi == -2);
}

TEST_CASE("asymmetric against symmetric cqr on symmetric scores", "[conformal][montecarlo]") {
  // Band too narrow by a constant: lower and upper scores are |noise| on either side.
  // Containment needs at least r of the top m absolute residuals on each side, where
  // m = n + 1 - ceil(0.9 (n + 1)) and r = n + 1 - ceil(0.95 (n + 1)); signs are fair coins.
  const auto q = quant_fn([](double x) { return x - 0.1; }, [](double x) { return x + 0.1; });
  auto containment = [&](int n, int reps, std::uint64_t seed, double& w_sym, double& w_asym) {
    std::mt19937_64 rng(seed);
    int contains = 0;
    w_sym = w_asym = 0;
    for (int r = 0; r < reps; ++r) {
      const auto cal = draw(rng, n);
      const auto a = cqr::cqr_calibrate(q, cal, QuantileLevel(0.1)).predict(pt(1.0));
      const auto b =
          cqr::cqr_asym_calibrate(q, cal, QuantileLevel(0.05), QuantileLevel(0.05)).predict(pt(1.0));
      contains += b.lo <= a.lo && a.hi <= b.hi;
      w_sym += a.length() / reps;
      w_asym += b.length() / reps;
    }
    return static_cast<double>(contains) / reps;
  };

  double ws = 0, wa = 0;
  const int reps = 4000;
  const double freq = containment(199, reps, 3, ws, wa);
  const double exact = 184756.0 / 1048576.0;  // m = 20, r = 10: C(20, 10) / 2^20
  CHECK(std::abs(freq - exact) < 4 * std::sqrt(exact * (1 - exact) / reps));
  CHECK(wa >= ws);

  // With n + 1 < 2 / alpha each asymmetric tail is unbounded, so containment is certain.
  const double small = containment(15, 200, 4, ws, wa);
  CHECK(small == 1.0);
  CHECK(std::isinf(wa));
}

TEST_CASE("asymmetric cqr per-tail miscoverage with exact quantiles", "[conformal][montecarlo]") {
  std::mt19937_64 rng(4);
  const double z = cqr::normal_quantile(0.95);
  const auto q = quant_fn([z](double x) { return x - z * (0.2 + x); }, [z](double x) { return x + z * (0.2 + x); });
  const int reps = 2000, n_cal = 99, n_test = 100;
  double lo_miss = 0, hi_miss = 0;
  for (int r = 0; r < reps; ++r) {
    const auto band = cqr::cqr_asym_calibrate(q, draw(rng, n_cal), QuantileLevel(0.05), QuantileLevel(0.05));
    const auto test = draw(rng, n_test);
    const auto iv = band.predict_all(test.X);
    for (int i = 0; i < n_test; ++i) {
      lo_miss += test.y(i) < iv[static_cast<std::size_t>(i)].lo;
      hi_miss += test.y(i) > iv[static_cast<std::size_t>(i)].hi;
    }
  }
  const double total = static_cast<double>(reps) * n_test;
  lo_miss /= total;
  hi_miss /= total;
  // Each tail: miss in [a - 1/(n+1), a] up to Monte Carlo noise.
  const double se = std::sqrt(0.05 * 0.95 / total) * 4;  // pooled, plus calibration noise below
  for (double m : {lo_miss, hi_miss}) {
    CHECK(m <= 0.05 + 4 * se);
    CHECK(m >= 0.05 - 1.0 / (n_cal + 1) - 4 * se);
  }
}

TEST_CASE("marginal coverage lies within the finite-sample bounds", "[conformal][montecarlo]") {
  std::mt19937_64 rng(5);
  const auto mu = mean_fn([](double x) { return 0.9 * x + 0.1; });
  const auto sigma = scale_fn([](double x) { return 0.5 + 0.5 * x; });
  const auto q = quant_fn([](double x) { return 0.8 * x - 1.2 * (0.2 + x); }, [](double x) { return 1.1 * x + 1.8 * (0.2 + x); });
  const int reps = 2000, n_cal = 99, n_test = 200;
  const double alpha = 0.1;
  for (auto method : {cqr::Method::split, cqr::Method::local, cqr::Method::cqr}) {
    std::vector<double> cov;
    for (int r = 0; r < reps; ++r) {
      const auto cal = draw(rng, n_cal);
      const auto band = method == cqr::Method::split ? cqr::split_conformal_calibrate(mu, cal, QuantileLevel(alpha))
                        : method == cqr::Method::local
                            ? cqr::local_conformal_calibrate(mu, sigma, cal, QuantileLevel(alpha), 0.0)
                            : cqr::cqr_calibrate(q, cal, QuantileLevel(alpha));
      const auto test = draw(rng, n_test);
      const auto iv = band.predict_all(test.X);
      int in = 0;
      for (int i = 0; i < n_test; ++i) in += iv[static_cast<std::size_t>(i)].contains(test.y(i));
      cov.push_back(static_cast<double>(in) / n_test);
    }
    double mean = 0, ss = 0;
    for (double c : cov) mean += c;
    mean /= reps;
    for (double c : cov) ss += (c - mean) * (c - mean);
    const double se = std::sqrt(ss / (reps - 1) / reps);
    INFO(cqr::method_name(method) << " coverage " << mean << " se " << se);
    CHECK(mean >= 1 - alpha - 4 * se);
    CHECK(mean <= 1 - alpha + 1.0 / (n_cal + 1) + 4 * se);
  }
}

TEST_CASE("property: smaller alpha never shrinks the correction", "[conformal][property]") {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> z;
  for (int t = 0; t < 300; ++t) {
    std::vector<double> s(25);
    for (auto& v : s) v = z(rng);
    const cqr::SortedSample sample(s);
    double prev = -std::numeric_limits<double>::infinity();
    for (int a = 99; a >= 1; --a) {
      const double q = cqr::inflated_quantile(sample, QuantileLevel(a / 100.0));
      REQUIRE(q >= prev);
      prev = q;
    }
  }
}

TEST_CASE("property: translation and scale equivariance with fitted engines", "[conformal][property]") {
  cqr::SyntheticSpec spec;
  spec.kind = cqr::SyntheticKind::heteroscedastic;
  spec.n = 300;
  spec.seed = 17;
  const auto base = cqr::generate(spec).data;
  std::vector<std::size_t> tr, ca, te;
  for (std::size_t i = 0; i < 300; ++i) (i < 120 ? tr : i < 240 ? ca : te).push_back(i);

  cqr::EngineConfig ecfg;
  ecfg.forest.n_trees = 30;
  ecfg.forest.min_leaf_size = 5;

  auto run = [&](double shift, double scale, cqr::Engine engine, cqr::Method method) {
    Dataset d = base;
    d.y = d.y.array() * scale + shift;
    const auto train = d.subset(tr), cal = d.subset(ca), test = d.subset(te);
    cqr::EngineSession s(engine, ecfg, train, 5);
    const QuantileLevel a(0.1);
    cqr::ConformalBand band = [&] {
      switch (method) {
        case cqr::Method::split: return cqr::split_conformal_calibrate(s.mean(), cal, a);
        case cqr::Method::local: return cqr::local_conformal_calibrate(s.mean(), s.dispersion(), cal, a, 0.1 * scale);
        case cqr::Method::cqr: return cqr::cqr_calibrate(s.quantiles(0.05, 0.95), cal, a);
        case cqr::Method::cqr_asym:
          return cqr::cqr_asym_calibrate(s.quantiles(0.05, 0.95), cal, QuantileLevel(0.05), QuantileLevel(0.05));
      }
      throw std::logic_error("unreachable");
    }();
    return band.predict_all(test.X);
  };

  for (auto method : {cqr::Method::split, cqr::Method::local, cqr::Method::cqr, cqr::Method::cqr_asym}) {
    INFO(cqr::method_name(method));
    const auto ref = run(0.0, 1.0, cqr::Engine::qrf, method);
    const auto shifted = run(3.25, 1.0, cqr::Engine::qrf, method);
    const auto scaled = run(0.0, 2.0, cqr::Engine::qrf, method);
    for (std::size_t i = 0; i < ref.size(); ++i) {
      CHECK(shifted[i].lo == Approx(ref[i].lo + 3.25).margin(1e-9));
      CHECK(shifted[i].hi == Approx(ref[i].hi + 3.25).margin(1e-9));
      CHECK(scaled[i].lo == Approx(2 * ref[i].lo).margin(1e-9));
      CHECK(scaled[i].hi == Approx(2 * ref[i].hi).margin(1e-9));
    }
  }
  // Ridge is scale-equivariant at any penalty when the penalty is chosen on the same grid
  // for both; translation only moves the intercept.
  for (auto method : {cqr::Method::split, cqr::Method::local}) {
    const auto ref = run(0.0, 1.0, cqr::Engine::ridge, method);
    const auto shifted = run(-7.5, 1.0, cqr::Engine::ridge, method);
    for (std::size_t i = 0; i < ref.size(); ++i) {
      CHECK(shifted[i].lo == Approx(ref[i].lo - 7.5).margin(1e-9));
      CHECK(shifted[i].hi == Approx(ref[i].hi - 7.5).margin(1e-9));
    }
  }
}

TEST_CASE("method names round-trip", "[conformal]") {
  for (auto m : {cqr::Method::split, cqr::Method::local, cqr::Method::cqr, cqr::Method::cqr_asym})
    CHECK(cqr::parse_method(cqr::method_name(m)) == m);
  CHECK_THROWS_AS(cqr::parse_method("bogus"), cqr::Error);
}

TEST_CASE("data split validation", "[conformal]") {
  CHECK_NOTHROW(cqr::DataSplit{{0, 1}, {2, 3}}.validate(4));
  CHECK_THROWS_AS((cqr::DataSplit{{0, 1}, {1, 3}}.validate(4)), cqr::Error);
  CHECK_THROWS_AS((cqr::DataSplit{{0, 1}, {}}.validate(4)), cqr::Error);
  CHECK_THROWS_AS((cqr::DataSplit{{0, 9}, {2}}.validate(4)), cqr::Error);
}
