#ifndef CQR_DATAGEN_HPP
#define CQR_DATAGEN_HPP

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <boost/math/special_functions/erf.hpp>

#include "cqr/quantile.hpp"
#include "cqr/types.hpp"

namespace cqr {

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw Error(ErrorCode::invalid_argument, "normal quantile needs p in (0, 1)");
  return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * p);
}

// ---------------------------------------------------------------------------
// Synthetic heteroscedastic data with a known conditional law.
//
//   X ~ U[0, 5]
//   Y = 2 sin(X) + s(X) * eps + B * outlier_scale * eps',   B ~ Bernoulli(outlier_prob)
//   s(x) = noise_scale * (0.1 + x)   (heteroscedastic kinds)
//   s(x) = noise_scale               (homoscedastic)
//
// Given X = x, Y is a two-component Gaussian mixture centred at 2 sin(x), so the exact
// conditional CDF is available and the conditional quantiles follow by root finding.
// ---------------------------------------------------------------------------

enum class SyntheticKind { homoscedastic, heteroscedastic, heteroscedastic_outliers };

inline std::string_view kind_name(SyntheticKind k) {
  switch (k) {
    case SyntheticKind::homoscedastic: return "homoscedastic";
    case SyntheticKind::heteroscedastic: return "heteroscedastic";
    case SyntheticKind::heteroscedastic_outliers: return "heteroscedastic_outliers";
  }
  return "?";
}

inline SyntheticKind parse_kind(std::string_view s) {
  if (s == "homoscedastic") return SyntheticKind::homoscedastic;
  if (s == "heteroscedastic") return SyntheticKind::heteroscedastic;
  if (s == "heteroscedastic_outliers") return SyntheticKind::heteroscedastic_outliers;
  throw Error(ErrorCode::invalid_argument, "unknown synthetic kind: " + std::string(s));
}

struct SyntheticSpec {
  SyntheticKind kind = SyntheticKind::heteroscedastic_outliers;
  std::size_t n = 2000;
  double noise_scale = 0.5;
  double outlier_prob = 0.03;  // only used by heteroscedastic_outliers
  double outlier_scale = 50.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(noise_scale >= 0.0) || !(outlier_scale > 0.0) || !(outlier_prob >= 0.0 && outlier_prob < 1.0))
      throw Error(ErrorCode::invalid_argument, "invalid synthetic spec");
  }
};

class SyntheticLaw {
 public:
  static constexpr double x_min = 0.0;
  static constexpr double x_max = 5.0;

  explicit SyntheticLaw(const SyntheticSpec& spec) : spec_(spec) { spec_.validate(); }

  double mean(double x) const { return 2.0 * std::sin(x); }

  double scale(double x) const {
    return spec_.kind == SyntheticKind::homoscedastic ? spec_.noise_scale : spec_.noise_scale * (0.1 + x);
  }

  double outlier_prob() const {
    return spec_.kind == SyntheticKind::heteroscedastic_outliers ? spec_.outlier_prob : 0.0;
  }

  double cdf(double x, double y) const {
    const double d = y - mean(x);
    const double s = scale(x);
    const double p = outlier_prob();
    const double base = component_cdf(d, s);
    if (p == 0.0) return base;
    return (1.0 - p) * base + p * component_cdf(d, std::hypot(s, spec_.outlier_scale));
  }

  /// Exact conditional quantile inf{y : F(y | x) >= level}.
  double quantile(double x, double level) const {
    const double m = mean(x);
    const double s = scale(x);
    const double p = outlier_prob();
    if (p == 0.0) return s == 0.0 ? m : m + s * normal_quantile(level);
    // Mixture: bracket and bisect on the continuous, increasing CDF.
    const double wide = std::hypot(s, spec_.outlier_scale);
    double lo = m - 60.0 * wide, hi = m + 60.0 * wide;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(m) + wide); ++it) {
      const double mid = 0.5 * (lo + hi);
      (cdf(x, mid) >= level ? hi : lo) = mid;
    }
    return hi;
  }

  /// Draws n fresh (X, Y) pairs from the law.
  Dataset draw(std::size_t n, std::mt19937_64& rng) const {
    std::uniform_real_distribution<double> ux(x_min, x_max);
    std::normal_distribution<double> z(0.0, 1.0);
    std::bernoulli_distribution outlier(outlier_prob());
    Matrix X(static_cast<Eigen::Index>(n), 1);
    Vector y(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      const double x = ux(rng);
      double v = mean(x) + scale(x) * z(rng);
      const double extra = z(rng);
      if (outlier(rng)) v += spec_.outlier_scale * extra;
      X(r, 0) = x;
      y(r) = v;
    }
    return Dataset(std::move(X), std::move(y));
  }

  const SyntheticSpec& spec() const noexcept { return spec_; }

 private:
  static double component_cdf(double d, double sd) {
    if (sd == 0.0) return d >= 0.0 ? 1.0 : 0.0;
    return normal_cdf(d / sd);
  }

  SyntheticSpec spec_;
};

struct SyntheticData {
  Dataset data;
  SyntheticLaw law;
};

inline SyntheticData generate(const SyntheticSpec& spec) {
  SyntheticLaw law(spec);
  std::mt19937_64 rng(spec.seed);
  return {law.draw(spec.n, rng), law};
}

// ---------------------------------------------------------------------------
// CSV ingestion
// ---------------------------------------------------------------------------

struct CsvData {
  Dataset data;
  std::vector<std::string> feature_names;
  std::string target_name;
  std::size_t dropped_rows = 0;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '"')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '"' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    cells.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return cells;
}

inline bool parse_number(std::string_view cell, double& out) {
  if (cell.empty()) return false;
  if (cell.front() == '+') cell.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), out);
  return ec == std::errc() && ptr == cell.data() + cell.size() && std::isfinite(out);
}

}  // namespace detail

/// Reads a comma-separated file with a header row. Rows with a missing, non-numeric or
/// non-finite cell (or the wrong cell count) are dropped and counted.
inline CsvData load_csv(const std::string& path, const std::string& target_column) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::file_not_found, "cannot open file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::no_usable_rows, "no usable rows");
  const auto header = detail::split_commas(line);
  std::size_t target = header.size();
  for (std::size_t j = 0; j < header.size(); ++j)
    if (header[j] == target_column) target = j;
  if (target == header.size()) throw Error(ErrorCode::target_column_missing, "target column not found");

  CsvData out;
  out.target_name = target_column;
  for (std::size_t j = 0; j < header.size(); ++j)
    if (j != target) out.feature_names.emplace_back(header[j]);

  std::vector<double> xs, ys;
  std::vector<double> row(header.size());
  std::size_t kept = 0;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_commas(line);
    bool ok = cells.size() == header.size();
    for (std::size_t j = 0; ok && j < cells.size(); ++j) ok = detail::parse_number(cells[j], row[j]);
    if (!ok) {
      ++out.dropped_rows;
      continue;
    }
    for (std::size_t j = 0; j < row.size(); ++j) (j == target ? ys : xs).push_back(row[j]);
    ++kept;
  }
  if (kept == 0) throw Error(ErrorCode::no_usable_rows, "no usable rows");

  const auto p = static_cast<Eigen::Index>(header.size() - 1);
  Matrix X = Eigen::Map<const Matrix>(xs.data(), static_cast<Eigen::Index>(kept), p);
  Vector y = Eigen::Map<const Vector>(ys.data(), static_cast<Eigen::Index>(kept));
  out.data = Dataset(std::move(X), std::move(y));
  return out;
}

// ---------------------------------------------------------------------------
// Standardisation: features to zero mean / unit variance, response divided by its
// mean absolute value. Statistics come from the proper training rows only and are
// accumulated in sorted order, so they do not depend on the row order.
// ---------------------------------------------------------------------------

struct StandardizationParams {
  std::vector<std::size_t> kept_features;
  std::vector<std::size_t> dropped_features;
  Vector mean;  // per kept feature
  Vector sd;    // per kept feature, > 0
  double response_scale = 1.0;
  std::size_t input_features = 0;
};

namespace detail {

inline double ordered_sum(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return std::accumulate(v.begin(), v.end(), 0.0);
}

}  // namespace detail

inline StandardizationParams standardize_fit(const Dataset& train) {
  if (train.rows() == 0) throw Error(ErrorCode::invalid_argument, "empty training set");
  StandardizationParams params;
  params.input_features = train.cols();
  const auto n = static_cast<double>(train.rows());
  std::vector<double> means, sds;
  for (std::size_t j = 0; j < train.cols(); ++j) {
    const auto col = train.X.col(static_cast<Eigen::Index>(j));
    std::vector<double> v(col.begin(), col.end());
    const double mu = detail::ordered_sum(v) / n;
    for (auto& e : v) e = (e - mu) * (e - mu);
    const double sd = std::sqrt(detail::ordered_sum(std::move(v)) / n);
    if (!(sd > 1e-12 * std::max(1.0, std::abs(mu)))) {
      params.dropped_features.push_back(j);
      continue;
    }
    params.kept_features.push_back(j);
    means.push_back(mu);
    sds.push_back(sd);
  }
  params.mean = Eigen::Map<Vector>(means.data(), static_cast<Eigen::Index>(means.size()));
  params.sd = Eigen::Map<Vector>(sds.data(), static_cast<Eigen::Index>(sds.size()));

  std::vector<double> a(train.y.begin(), train.y.end());
  for (auto& e : a) e = std::abs(e);
  params.response_scale = detail::ordered_sum(std::move(a)) / n;
  if (!(params.response_scale > 0.0))
    throw Error(ErrorCode::invalid_argument, "response mean absolute value is zero");
  return params;
}

inline Dataset standardize_apply(const StandardizationParams& params, const Dataset& data) {
  if (data.cols() != params.input_features) throw Error(ErrorCode::invalid_argument, "feature count mismatch");
  Matrix X(data.X.rows(), static_cast<Eigen::Index>(params.kept_features.size()));
  for (std::size_t k = 0; k < params.kept_features.size(); ++k) {
    const auto j = static_cast<Eigen::Index>(params.kept_features[k]);
    const auto kk = static_cast<Eigen::Index>(k);
    X.col(kk) = (data.X.col(j).array() - params.mean(kk)) / params.sd(kk);
  }
  return Dataset(std::move(X), data.y / params.response_scale);
}

/// Maps standardised data back to original units (kept features only).
inline Dataset standardize_invert(const StandardizationParams& params, const Dataset& data) {
  Matrix X(data.X.rows(), data.X.cols());
  for (Eigen::Index k = 0; k < data.X.cols(); ++k)
    X.col(k) = data.X.col(k).array() * params.sd(k) + params.mean(k);
  return Dataset(std::move(X), data.y * params.response_scale);
}

}  // namespace cqr

#endif  // CQR_DATAGEN_HPP
