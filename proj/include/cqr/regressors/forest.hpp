#ifndef CQR_REGRESSORS_FOREST_HPP
#define CQR_REGRESSORS_FOREST_HPP

// CART regression forests. Every leaf keeps the training responses routed to it, so
// one fitted forest serves three readouts: the conditional mean, a dispersion estimate
// when fitted on absolute residuals, and conditional quantiles via the weighted leaf CDF.

#include <algorithm>
#include <cstdint>
#include <memory>
#include <numeric>
#include <random>
#include <utility>
#include <vector>

#include "cqr/quantile.hpp"
#include "cqr/regressors/interfaces.hpp"

namespace cqr {

struct ForestConfig {
  int n_trees = 1000;
  int min_leaf_size = 5;
  int max_features = 0;  // features tried per split; 0 means all
  bool bootstrap = true;
  // Leaves hold every training row routed to them, not only the bootstrap draws the
  // tree was grown on.
  bool full_sample_leaves = true;
  std::uint64_t seed = 0;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  int leaf = -1;  // index into RegressionTree::leaf_values
};

class RegressionTree {
 public:
  std::vector<TreeNode> nodes;
  std::vector<std::vector<double>> leaf_values;  // ascending
  std::vector<double> leaf_means;
  // Same multisets as leaf_values, as indices into Forest::distinct_responses().
  std::vector<std::vector<std::uint32_t>> leaf_ranks;

  int leaf_index(Row x) const {
    int node = 0;
    while (nodes[static_cast<std::size_t>(node)].feature >= 0) {
      const auto& nd = nodes[static_cast<std::size_t>(node)];
      node = x(nd.feature) <= nd.threshold ? nd.left : nd.right;
    }
    return nodes[static_cast<std::size_t>(node)].leaf;
  }
};

namespace detail {

/// Mean taken relative to the first element, so a constant input returns that constant exactly.
inline double anchored_mean(std::span<const double> v) {
  double acc = 0.0;
  for (double e : v) acc += e - v.front();
  return v.front() + acc / static_cast<double>(v.size());
}

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& X, const Vector& y, const ForestConfig& cfg, std::uint64_t seed)
      : X_(X), y_(y), cfg_(cfg), rng_(seed) {}

  RegressionTree build() {
    const auto n = static_cast<std::size_t>(y_.size());
    idx_.resize(n);
    if (cfg_.bootstrap) {
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      for (auto& i : idx_) i = pick(rng_);
    } else {
      std::iota(idx_.begin(), idx_.end(), std::size_t{0});
    }
    features_.resize(static_cast<std::size_t>(X_.cols()));
    std::iota(features_.begin(), features_.end(), 0);

    tree_.nodes.push_back({});
    grow(0, 0, n);
    if (cfg_.bootstrap && cfg_.full_sample_leaves) refill_leaves();
    return std::move(tree_);
  }

 private:
  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double score = 0.0;
  };

  void make_leaf(int node, std::size_t begin, std::size_t end) {
    std::vector<double> vals;
    vals.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i) vals.push_back(y_(static_cast<Eigen::Index>(idx_[i])));
    std::sort(vals.begin(), vals.end());
    const double mean = anchored_mean(vals);
    auto& nd = tree_.nodes[static_cast<std::size_t>(node)];
    nd.feature = -1;
    nd.leaf = static_cast<int>(tree_.leaf_values.size());
    tree_.leaf_values.push_back(std::move(vals));
    tree_.leaf_means.push_back(mean);
  }

  void refill_leaves() {
    for (auto& v : tree_.leaf_values) v.clear();
    for (Eigen::Index r = 0; r < X_.rows(); ++r)
      tree_.leaf_values[static_cast<std::size_t>(tree_.leaf_index(X_.row(r)))].push_back(y_(r));
    for (std::size_t l = 0; l < tree_.leaf_values.size(); ++l) {
      auto& v = tree_.leaf_values[l];
      std::sort(v.begin(), v.end());
      tree_.leaf_means[l] = anchored_mean(v);
    }
  }

  void grow(int node, std::size_t begin, std::size_t end) {
    const std::size_t size = end - begin;
    const auto min_leaf = static_cast<std::size_t>(cfg_.min_leaf_size);
    if (size < 2 * min_leaf || is_pure(begin, end)) {
      make_leaf(node, begin, end);
      return;
    }
    const Split best = find_split(begin, end);
    if (best.feature < 0) {
      make_leaf(node, begin, end);
      return;
    }
    const auto mid_it = std::stable_partition(
        idx_.begin() + static_cast<std::ptrdiff_t>(begin), idx_.begin() + static_cast<std::ptrdiff_t>(end),
        [&](std::size_t r) { return X_(static_cast<Eigen::Index>(r), best.feature) <= best.threshold; });
    const auto mid = static_cast<std::size_t>(mid_it - idx_.begin());

    const int left = static_cast<int>(tree_.nodes.size());
    tree_.nodes.push_back({});
    const int right = static_cast<int>(tree_.nodes.size());
    tree_.nodes.push_back({});
    auto& nd = tree_.nodes[static_cast<std::size_t>(node)];
    nd.feature = best.feature;
    nd.threshold = best.threshold;
    nd.left = left;
    nd.right = right;
    grow(left, begin, mid);
    grow(right, mid, end);
  }

  bool is_pure(std::size_t begin, std::size_t end) const {
    const double first = y_(static_cast<Eigen::Index>(idx_[begin]));
    for (std::size_t i = begin + 1; i < end; ++i)
      if (y_(static_cast<Eigen::Index>(idx_[i])) != first) return false;
    return true;
  }

  // Maximises (sum_L^2 / n_L + sum_R^2 / n_R) over node-centred responses, which is
  // the largest reduction in within-node squared error.
  Split find_split(std::size_t begin, std::size_t end) {
    const std::size_t size = end - begin;
    const auto min_leaf = static_cast<std::size_t>(cfg_.min_leaf_size);
    const auto p = features_.size();
    std::size_t tries = p;
    if (cfg_.max_features > 0 && static_cast<std::size_t>(cfg_.max_features) < p) {
      tries = static_cast<std::size_t>(cfg_.max_features);
      for (std::size_t j = 0; j < tries; ++j) {
        std::uniform_int_distribution<std::size_t> pick(j, p - 1);
        std::swap(features_[j], features_[pick(rng_)]);
      }
    }

    double mean = 0.0;
    for (std::size_t i = begin; i < end; ++i) mean += y_(static_cast<Eigen::Index>(idx_[i]));
    mean /= static_cast<double>(size);
    double sst = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
      const double d = y_(static_cast<Eigen::Index>(idx_[i])) - mean;
      sst += d * d;
    }

    Split best;
    best.score = 1e-12 * sst;
    std::vector<std::pair<double, double>> col(size);
    for (std::size_t j = 0; j < tries; ++j) {
      const int f = features_[j];
      for (std::size_t i = 0; i < size; ++i) {
        const auto r = static_cast<Eigen::Index>(idx_[begin + i]);
        col[i] = {X_(r, f), y_(r) - mean};
      }
      std::sort(col.begin(), col.end());
      double total = 0.0;
      for (const auto& c : col) total += c.second;
      double left_sum = 0.0;
      for (std::size_t i = 0; i + 1 < size; ++i) {
        left_sum += col[i].second;
        const std::size_t n_left = i + 1;
        if (n_left < min_leaf) continue;
        if (size - n_left < min_leaf) break;
        if (!(col[i].first < col[i + 1].first)) continue;
        const double right_sum = total - left_sum;
        const double score = left_sum * left_sum / static_cast<double>(n_left) +
                             right_sum * right_sum / static_cast<double>(size - n_left);
        if (score > best.score) {
          double thr = col[i].first + 0.5 * (col[i + 1].first - col[i].first);
          if (!(thr < col[i + 1].first)) thr = col[i].first;
          best = {f, thr, score};
        }
      }
    }
    return best;
  }

  const Matrix& X_;
  const Vector& y_;
  const ForestConfig& cfg_;
  std::mt19937_64 rng_;
  std::vector<std::size_t> idx_;
  std::vector<int> features_;
  RegressionTree tree_;
};

}  // namespace detail

/// Cumulative weight must reach the level up to this slack; absorbs round-off in
/// sums of 1/(n_trees * leaf_size) terms at exact boundaries.
inline constexpr double kWeightTolerance = 1e-12;

/// Left quantile of a discrete distribution given as (value, weight) pairs whose
/// weights sum to one. Sorts the pairs in place by (value, weight).
inline double weighted_quantile(std::vector<std::pair<double, double>>& pairs, double level) {
  if (pairs.empty()) throw Error(ErrorCode::empty_sample, "empty sample");
  std::sort(pairs.begin(), pairs.end());
  double cum = 0.0;
  for (const auto& [value, weight] : pairs) {
    cum += weight;
    if (cum >= level - kWeightTolerance) return value;
  }
  return pairs.back().first;
}

class Forest {
 public:
  static Forest fit(const Matrix& X, const Vector& y, const ForestConfig& cfg) {
    if (X.rows() != y.size()) throw Error(ErrorCode::invalid_argument, "row count mismatch");
    if (cfg.n_trees < 1 || cfg.min_leaf_size < 1)
      throw Error(ErrorCode::invalid_argument, "n_trees and min_leaf_size must be positive");
    if (y.size() < 2 * static_cast<Eigen::Index>(cfg.min_leaf_size))
      throw Error(ErrorCode::invalid_argument, "forest needs n >= 2 * min_leaf_size");
    Forest forest;
    forest.distinct_.assign(y.data(), y.data() + y.size());
    std::sort(forest.distinct_.begin(), forest.distinct_.end());
    forest.distinct_.erase(std::unique(forest.distinct_.begin(), forest.distinct_.end()), forest.distinct_.end());
    forest.trees_.reserve(static_cast<std::size_t>(cfg.n_trees));
    for (int t = 0; t < cfg.n_trees; ++t) {
      detail::TreeBuilder builder(X, y, cfg, mix_seed(cfg.seed, static_cast<std::uint64_t>(t)));
      auto tree = builder.build();
      tree.leaf_ranks.reserve(tree.leaf_values.size());
      for (const auto& vals : tree.leaf_values) {
        std::vector<std::uint32_t> ranks;
        ranks.reserve(vals.size());
        for (double v : vals)
          ranks.push_back(static_cast<std::uint32_t>(
              std::lower_bound(forest.distinct_.begin(), forest.distinct_.end(), v) - forest.distinct_.begin()));
        tree.leaf_ranks.push_back(std::move(ranks));
      }
      forest.trees_.push_back(std::move(tree));
    }
    return forest;
  }

  /// Sorted distinct training responses; the support of every leaf distribution.
  const std::vector<double>& distinct_responses() const noexcept { return distinct_; }

  const std::vector<RegressionTree>& trees() const noexcept { return trees_; }

  double predict_mean(Row x) const {
    double anchor = 0.0, acc = 0.0;
    for (std::size_t k = 0; k < trees_.size(); ++k) {
      const double m = trees_[k].leaf_means[static_cast<std::size_t>(trees_[k].leaf_index(x))];
      if (k == 0) anchor = m;
      acc += m - anchor;
    }
    return anchor + acc / static_cast<double>(trees_.size());
  }

  /// Each tree spreads weight 1/n_trees uniformly over the responses in the leaf x falls into.
  std::vector<std::pair<double, double>> leaf_distribution(Row x) const {
    std::vector<std::pair<double, double>> pairs;
    const double tree_weight = 1.0 / static_cast<double>(trees_.size());
    for (const auto& t : trees_) {
      const auto& vals = t.leaf_values[static_cast<std::size_t>(t.leaf_index(x))];
      const double w = tree_weight / static_cast<double>(vals.size());
      for (double v : vals) pairs.emplace_back(v, w);
    }
    return pairs;
  }

  /// Weight of each distinct training response in the leaf distribution at x.
  std::vector<double> response_weights(Row x) const {
    std::vector<double> w(distinct_.size(), 0.0);
    const double tree_weight = 1.0 / static_cast<double>(trees_.size());
    for (const auto& t : trees_) {
      const auto& ranks = t.leaf_ranks[static_cast<std::size_t>(t.leaf_index(x))];
      const double each = tree_weight / static_cast<double>(ranks.size());
      for (auto r : ranks) w[r] += each;
    }
    return w;
  }

  double predict_quantile(Row x, QuantileLevel level) const {
    return predict_quantiles(x, level.value(), level.value()).lo;
  }

  /// Left quantiles of the leaf distribution: the smallest response whose cumulative
  /// weight reaches the level (up to kWeightTolerance).
  QuantilePair predict_quantiles(Row x, double level_lo, double level_hi) const {
    const auto w = response_weights(x);
    QuantilePair out{distinct_.back(), distinct_.back()};
    bool have_lo = false;
    double cum = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
      if (w[k] == 0.0) continue;
      cum += w[k];
      if (!have_lo && cum >= level_lo - kWeightTolerance) {
        out.lo = distinct_[k];
        have_lo = true;
      }
      if (cum >= level_hi - kWeightTolerance) {
        out.hi = distinct_[k];
        break;
      }
    }
    return out;
  }

 private:
  std::vector<RegressionTree> trees_;
  std::vector<double> distinct_;
};

using ForestPtr = std::shared_ptr<const Forest>;

class ForestMeanModel final : public MeanRegressor {
 public:
  explicit ForestMeanModel(ForestPtr forest) : forest_(std::move(forest)) {}
  double predict(Row x) const override { return forest_->predict_mean(x); }

 private:
  ForestPtr forest_;
};

/// Forest fitted on absolute residuals; leaf means of non-negative values stay non-negative.
class ForestDispersionModel final : public DispersionRegressor {
 public:
  explicit ForestDispersionModel(ForestPtr forest) : forest_(std::move(forest)) {}
  double predict(Row x) const override { return forest_->predict_mean(x); }

 private:
  ForestPtr forest_;
};

class ForestQuantileModel final : public QuantileRegressor {
 public:
  ForestQuantileModel(ForestPtr forest, QuantileLevel lo, QuantileLevel hi)
      : forest_(std::move(forest)), lo_(lo.value()), hi_(hi.value()) {
    if (lo_ > hi_) throw Error(ErrorCode::invalid_argument, "lower level above upper level");
  }
  QuantilePair predict_pair(Row x) const override { return forest_->predict_quantiles(x, lo_, hi_); }

  const Forest& forest() const noexcept { return *forest_; }

 private:
  ForestPtr forest_;
  double lo_, hi_;
};

inline ForestQuantileModel qrf_fit(const Matrix& X, const Vector& y, const ForestConfig& cfg,
                                   QuantileLevel level_lo = QuantileLevel(0.05),
                                   QuantileLevel level_hi = QuantileLevel(0.95)) {
  return ForestQuantileModel(std::make_shared<const Forest>(Forest::fit(X, y, cfg)), level_lo, level_hi);
}

}  // namespace cqr

#endif  // CQR_REGRESSORS_FOREST_HPP
