#ifndef CQR_CONFORMAL_HPP
#define CQR_CONFORMAL_HPP

// Split-conformal calibrators. Each takes predictors fitted on the proper training set
// and the calibration rows, freezes one correction constant (two for the asymmetric
// variant) and returns a band that never looks at calibration data again.
//
//   split      [mu(x) - Q, mu(x) + Q]                 Q from |y - mu(x)|
//   local      mu(x) -/+ (sigma(x) + gamma) * Q       Q from |y - mu(x)| / (sigma(x) + gamma)
//   cqr        [q_lo(x) - Q, q_hi(x) + Q]             Q from max(q_lo - y, y - q_hi)
//   cqr-asym   [q_lo(x) - Q_lo, q_hi(x) + Q_hi]       Q_lo from q_lo - y, Q_hi from y - q_hi

#include <cmath>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "cqr/quantile.hpp"
#include "cqr/regressors/interfaces.hpp"

namespace cqr {

enum class Method { split, local, cqr, cqr_asym };

inline std::string_view method_name(Method m) {
  switch (m) {
    case Method::split: return "split";
    case Method::local: return "local";
    case Method::cqr: return "cqr";
    case Method::cqr_asym: return "cqr-asym";
  }
  return "?";
}

inline Method parse_method(std::string_view s) {
  if (s == "split") return Method::split;
  if (s == "local") return Method::local;
  if (s == "cqr" || s == "cqr-sym" || s == "cqr_sym") return Method::cqr;
  if (s == "cqr-asym" || s == "cqr_asym") return Method::cqr_asym;
  throw Error(ErrorCode::invalid_argument, "unknown method: " + std::string(s));
}

struct Interval {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  bool collapsed = false;  // endpoints crossed after correction and were merged at the midpoint

  double length() const { return hi - lo; }
  bool contains(double y) const { return lo <= y && y <= hi; }
};

/// Disjoint proper-training (i1) and calibration (i2) row indices.
struct DataSplit {
  std::vector<std::size_t> i1;
  std::vector<std::size_t> i2;

  void validate(std::size_t n_rows) const {
    if (i1.empty() || i2.empty()) throw Error(ErrorCode::invalid_argument, "both split halves must be non-empty");
    std::vector<char> seen(n_rows, 0);
    for (auto i : i1) {
      if (i >= n_rows || seen[i]) throw Error(ErrorCode::invalid_argument, "invalid split index");
      seen[i] = 1;
    }
    for (auto i : i2) {
      if (i >= n_rows || seen[i]) throw Error(ErrorCode::invalid_argument, "split halves overlap");
      seen[i] = 1;
    }
  }
};

namespace detail {

inline Interval make_interval(double lo, double hi) {
  if (lo > hi) {
    const double mid = 0.5 * (lo + hi);
    return {mid, mid, true};
  }
  return {lo, hi, false};
}

inline void require_ordered(const QuantilePair& q) {
  if (!(q.lo <= q.hi))
    throw Error(ErrorCode::quantile_crossing, "lower quantile prediction exceeds upper; apply fix_crossing first");
}

}  // namespace detail

/// A calibrated interval predictor. Correction constants are frozen at construction.
class ConformalBand {
 public:
  Method method() const noexcept { return method_; }
  double correction() const noexcept { return q_lo_; }
  double correction_lo() const noexcept { return q_lo_; }
  double correction_hi() const noexcept { return q_hi_; }
  double gamma() const noexcept { return gamma_; }
  std::size_t calibration_size() const noexcept { return n_cal_; }

  Interval predict(Row x) const {
    switch (method_) {
      case Method::split: {
        const double m = mean_->predict(x);
        return detail::make_interval(m - q_lo_, m + q_lo_);
      }
      case Method::local: {
        const double m = mean_->predict(x);
        const double s = scale_->predict(x) + gamma_;
        if (!(s > 0.0)) throw Error(ErrorCode::zero_scale, "zero scale; set γ > 0");
        const double w = std::isinf(q_lo_) ? q_lo_ : s * q_lo_;
        return detail::make_interval(m - w, m + w);
      }
      case Method::cqr:
      case Method::cqr_asym: {
        const auto q = quant_->predict_pair(x);
        detail::require_ordered(q);
        return detail::make_interval(q.lo - q_lo_, q.hi + q_hi_);
      }
    }
    return {};
  }

  std::vector<Interval> predict_all(const Matrix& X) const {
    std::vector<Interval> out;
    out.reserve(static_cast<std::size_t>(X.rows()));
    switch (method_) {
      case Method::split:
      case Method::local: {
        const Vector m = mean_->predict_all(X);
        Vector s;
        if (method_ == Method::local) s = scale_->predict_all(X).array() + gamma_;
        for (Eigen::Index i = 0; i < X.rows(); ++i) {
          double w = q_lo_;
          if (method_ == Method::local) {
            if (!(s(i) > 0.0)) throw Error(ErrorCode::zero_scale, "zero scale; set γ > 0");
            if (!std::isinf(q_lo_)) w = s(i) * q_lo_;
          }
          out.push_back(detail::make_interval(m(i) - w, m(i) + w));
        }
        break;
      }
      case Method::cqr:
      case Method::cqr_asym:
        for (const auto& q : quant_->predict_all(X)) {
          detail::require_ordered(q);
          out.push_back(detail::make_interval(q.lo - q_lo_, q.hi + q_hi_));
        }
        break;
    }
    return out;
  }

  friend ConformalBand split_conformal_calibrate(MeanPtr, const Dataset&, QuantileLevel);
  friend ConformalBand local_conformal_calibrate(MeanPtr, DispersionPtr, const Dataset&, QuantileLevel, double);
  friend ConformalBand cqr_calibrate(QuantilePtr, const Dataset&, QuantileLevel);
  friend ConformalBand cqr_asym_calibrate(QuantilePtr, const Dataset&, QuantileLevel, QuantileLevel);

 private:
  Method method_ = Method::split;
  MeanPtr mean_;
  DispersionPtr scale_;
  QuantilePtr quant_;
  double q_lo_ = 0.0;
  double q_hi_ = 0.0;
  double gamma_ = 0.0;
  std::size_t n_cal_ = 0;
};

/// Absolute residuals |y - mu(x)| on the given rows.
inline std::vector<double> absolute_residuals(const MeanRegressor& mu, const Dataset& data) {
  const Vector pred = mu.predict_all(data.X);
  std::vector<double> r(data.rows());
  for (std::size_t i = 0; i < r.size(); ++i)
    r[i] = std::abs(data.y(static_cast<Eigen::Index>(i)) - pred(static_cast<Eigen::Index>(i)));
  return r;
}

/// CQR conformity score: positive outside the plug-in band, non-positive inside.
inline double cqr_score(const QuantilePair& q, double y) { return std::max(q.lo - y, y - q.hi); }

inline ConformalBand split_conformal_calibrate(MeanPtr mu, const Dataset& cal, QuantileLevel alpha) {
  ConformalBand band;
  band.method_ = Method::split;
  band.q_lo_ = inflated_quantile(SortedSample(absolute_residuals(*mu, cal)), alpha);
  band.q_hi_ = band.q_lo_;
  band.n_cal_ = cal.rows();
  band.mean_ = std::move(mu);
  return band;
}

inline ConformalBand local_conformal_calibrate(MeanPtr mu, DispersionPtr sigma, const Dataset& cal,
                                               QuantileLevel alpha, double gamma) {
  if (!(gamma >= 0.0)) throw Error(ErrorCode::invalid_argument, "gamma must be non-negative");
  auto r = absolute_residuals(*mu, cal);
  const Vector s = sigma->predict_all(cal.X);
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double scale = s(static_cast<Eigen::Index>(i)) + gamma;
    if (!(scale > 0.0)) throw Error(ErrorCode::zero_scale, "zero scale; set γ > 0");
    r[i] /= scale;
  }
  ConformalBand band;
  band.method_ = Method::local;
  band.q_lo_ = inflated_quantile(SortedSample(std::move(r)), alpha);
  band.q_hi_ = band.q_lo_;
  band.gamma_ = gamma;
  band.n_cal_ = cal.rows();
  band.mean_ = std::move(mu);
  band.scale_ = std::move(sigma);
  return band;
}

inline ConformalBand cqr_calibrate(QuantilePtr q, const Dataset& cal, QuantileLevel alpha) {
  const auto pairs = q->predict_all(cal.X);
  std::vector<double> e(pairs.size());
  for (std::size_t i = 0; i < e.size(); ++i) {
    detail::require_ordered(pairs[i]);
    e[i] = cqr_score(pairs[i], cal.y(static_cast<Eigen::Index>(i)));
  }
  ConformalBand band;
  band.method_ = Method::cqr;
  band.q_lo_ = inflated_quantile(SortedSample(std::move(e)), alpha);
  band.q_hi_ = band.q_lo_;
  band.n_cal_ = cal.rows();
  band.quant_ = std::move(q);
  return band;
}

/// Per-tail calibration. Both tails use the inflated quantile so that each tail's
/// miscoverage is at most its own level; the joint miscoverage is at most the sum.
inline ConformalBand cqr_asym_calibrate(QuantilePtr q, const Dataset& cal, QuantileLevel alpha_lo,
                                        QuantileLevel alpha_hi) {
  const auto pairs = q->predict_all(cal.X);
  std::vector<double> e_lo(pairs.size()), e_hi(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    detail::require_ordered(pairs[i]);
    const double y = cal.y(static_cast<Eigen::Index>(i));
    e_lo[i] = pairs[i].lo - y;
    e_hi[i] = y - pairs[i].hi;
  }
  ConformalBand band;
  band.method_ = Method::cqr_asym;
  band.q_lo_ = inflated_quantile(SortedSample(std::move(e_lo)), alpha_lo);
  band.q_hi_ = inflated_quantile(SortedSample(std::move(e_hi)), alpha_hi);
  band.n_cal_ = cal.rows();
  band.quant_ = std::move(q);
  return band;
}

}  // namespace cqr

#endif  // CQR_CONFORMAL_HPP
