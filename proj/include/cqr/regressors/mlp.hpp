#ifndef CQR_REGRESSORS_MLP_HPP
#define CQR_REGRESSORS_MLP_HPP

// Fully connected ReLU network p -> width -> ... -> width -> {1, 2}, trained by minibatch
// Adam with L2 weight decay and inverted dropout after every hidden layer. Backprop is
// written out by hand over a flat parameter vector so that gradients can be checked
// against finite differences directly.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <utility>
#include <vector>

#include "cqr/losses.hpp"
#include "cqr/regressors/interfaces.hpp"
#include "cqr/regressors/ridge.hpp"

namespace cqr {

struct MlpConfig {
  int hidden_width = 64;
  int n_hidden_layers = 2;
  double learning_rate = 5e-4;
  int batch_size = 64;
  double weight_decay = 1e-6;
  double dropout_keep_prob = 0.1;
  int max_epochs = 1000;
  int cv_folds = 5;           // epoch-count selection; 0 or 1 trains for max_epochs
  int cv_eval_interval = 10;  // validation loss is recorded every this many epochs
  std::uint64_t seed = 0;

  void validate() const {
    if (hidden_width < 1 || n_hidden_layers < 0 || batch_size < 1 || max_epochs < 1 || cv_eval_interval < 1)
      throw Error(ErrorCode::invalid_argument, "invalid MLP configuration");
    if (!(learning_rate > 0.0) || !(weight_decay >= 0.0))
      throw Error(ErrorCode::invalid_argument, "invalid MLP learning rate or weight decay");
    if (!(dropout_keep_prob > 0.0 && dropout_keep_prob <= 1.0))
      throw Error(ErrorCode::invalid_argument, "dropout keep probability must lie in (0, 1]");
  }
};

enum class MlpHead {
  squared_error,  // one output, mean squared error
  pinball_pair,   // two outputs, pinball at level_lo + pinball at level_hi
};

struct MlpObjective {
  MlpHead head = MlpHead::squared_error;
  double level_lo = 0.05;
  double level_hi = 0.95;

  int outputs() const { return head == MlpHead::pinball_pair ? 2 : 1; }
};

class MlpNetwork {
 public:
  using ColMatrix = Eigen::MatrixXd;

  MlpNetwork(int inputs, int width, int hidden_layers, int outputs) {
    sizes_.push_back(inputs);
    for (int l = 0; l < hidden_layers; ++l) sizes_.push_back(width);
    sizes_.push_back(outputs);
    std::size_t total = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      offsets_.push_back(total);
      total += static_cast<std::size_t>(sizes_[l + 1]) * static_cast<std::size_t>(sizes_[l] + 1);
    }
    params_ = Vector::Zero(static_cast<Eigen::Index>(total));
  }

  std::size_t layers() const { return sizes_.size() - 1; }
  int outputs() const { return sizes_.back(); }
  Vector& params() { return params_; }
  const Vector& params() const { return params_; }

  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
  void initialize(std::mt19937_64& rng) {
    for (std::size_t l = 0; l < layers(); ++l) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(sizes_[l]));
      std::uniform_real_distribution<double> u(-bound, bound);
      const auto count = static_cast<std::size_t>(sizes_[l + 1]) * static_cast<std::size_t>(sizes_[l] + 1);
      for (std::size_t i = 0; i < count; ++i) params_(static_cast<Eigen::Index>(offsets_[l] + i)) = u(rng);
    }
  }

  /// Network outputs for every row of X, one column per sample (outputs x rows).
  ColMatrix forward(const Matrix& X) const { return forward_with(params_, X); }

  ColMatrix forward_with(const Vector& params, const Matrix& X) const {
    ColMatrix a = X.transpose();
    for (std::size_t l = 0; l < layers(); ++l) {
      ColMatrix z = weights(params, l) * a;
      z.colwise() += bias(params, l);
      a = (l + 1 < layers()) ? ColMatrix(z.cwiseMax(0.0)) : std::move(z);
    }
    return a;
  }

  /// Mean objective over the rows of X and its gradient with respect to params.
  /// With keep_prob < 1 and an rng, fresh dropout masks are drawn for the hidden layers.
  double loss_and_gradient(const Vector& params, const Matrix& X, const Vector& y, const MlpObjective& obj,
                           Vector& grad, double keep_prob = 1.0, std::mt19937_64* rng = nullptr) const {
    const auto batch = static_cast<double>(X.rows());
    const std::size_t L = layers();
    std::vector<ColMatrix> act(L);  // input to layer l
    std::vector<ColMatrix> pre(L);  // pre-activation of layer l
    std::vector<ColMatrix> mask(L);
    const bool dropout = keep_prob < 1.0 && rng != nullptr;
    std::bernoulli_distribution keep(keep_prob);

    act[0] = X.transpose();
    ColMatrix out;
    for (std::size_t l = 0; l < L; ++l) {
      pre[l] = weights(params, l) * act[l];
      pre[l].colwise() += bias(params, l);
      if (l + 1 == L) {
        out = pre[l];
        break;
      }
      ColMatrix h = pre[l].cwiseMax(0.0);
      if (dropout) {
        mask[l].resize(h.rows(), h.cols());
        for (Eigen::Index j = 0; j < h.cols(); ++j)
          for (Eigen::Index i = 0; i < h.rows(); ++i) mask[l](i, j) = keep(*rng) ? 1.0 / keep_prob : 0.0;
        h = h.cwiseProduct(mask[l]);
      }
      act[l + 1] = std::move(h);
    }

    double loss = 0.0;
    ColMatrix d_out(out.rows(), out.cols());
    if (obj.head == MlpHead::squared_error) {
      for (Eigen::Index j = 0; j < out.cols(); ++j) {
        loss += squared_error(y(j), out(0, j));
        d_out(0, j) = squared_error_gradient(y(j), out(0, j)) / batch;
      }
    } else {
      const PinballLoss lo(obj.level_lo), hi(obj.level_hi);
      for (Eigen::Index j = 0; j < out.cols(); ++j) {
        loss += lo(y(j), out(0, j)) + hi(y(j), out(1, j));
        d_out(0, j) = lo.subgradient(y(j), out(0, j)) / batch;
        d_out(1, j) = hi.subgradient(y(j), out(1, j)) / batch;
      }
    }
    loss /= batch;

    grad.resize(params.size());
    ColMatrix delta = std::move(d_out);
    for (std::size_t l = L; l-- > 0;) {
      weights(grad, l) = delta * act[l].transpose();
      bias(grad, l) = delta.rowwise().sum();
      if (l == 0) break;
      ColMatrix back = weights(params, l).transpose() * delta;
      if (dropout) back = back.cwiseProduct(mask[l - 1]);
      delta = back.cwiseProduct((pre[l - 1].array() > 0.0).cast<double>().matrix());
    }
    return loss;
  }

 private:
  using ConstMap = Eigen::Map<const Eigen::MatrixXd>;
  using MutMap = Eigen::Map<Eigen::MatrixXd>;

  ConstMap weights(const Vector& p, std::size_t l) const {
    return {p.data() + offsets_[l], sizes_[l + 1], sizes_[l]};
  }
  MutMap weights(Vector& p, std::size_t l) const { return {p.data() + offsets_[l], sizes_[l + 1], sizes_[l]}; }
  Eigen::Map<const Vector> bias(const Vector& p, std::size_t l) const {
    return {p.data() + offsets_[l] + static_cast<std::size_t>(sizes_[l + 1] * sizes_[l]), sizes_[l + 1]};
  }
  Eigen::Map<Vector> bias(Vector& p, std::size_t l) const {
    return {p.data() + offsets_[l] + static_cast<std::size_t>(sizes_[l + 1] * sizes_[l]), sizes_[l + 1]};
  }

  std::vector<int> sizes_;
  std::vector<std::size_t> offsets_;
  Vector params_;
};

namespace detail {

inline double evaluate_objective(const MlpNetwork& net, const Matrix& X, const Vector& y, const MlpObjective& obj) {
  const auto out = net.forward(X);
  double loss = 0.0;
  if (obj.head == MlpHead::squared_error) {
    for (Eigen::Index j = 0; j < out.cols(); ++j) loss += squared_error(y(j), out(0, j));
  } else {
    const PinballLoss lo(obj.level_lo), hi(obj.level_hi);
    for (Eigen::Index j = 0; j < out.cols(); ++j) loss += lo(y(j), out(0, j)) + hi(y(j), out(1, j));
  }
  return loss / static_cast<double>(out.cols());
}

/// Trains for `epochs` epochs. When `validation` is given, its loss is recorded every
/// cfg.cv_eval_interval epochs into `curve`.
inline MlpNetwork train_network(const Dataset& train, const MlpObjective& obj, const MlpConfig& cfg, int epochs,
                                std::uint64_t seed, const Dataset* validation = nullptr,
                                std::vector<double>* curve = nullptr) {
  MlpNetwork net(static_cast<int>(train.cols()), cfg.hidden_width, cfg.n_hidden_layers, obj.outputs());
  std::mt19937_64 rng(seed);
  net.initialize(rng);

  const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  Vector m = Vector::Zero(net.params().size());
  Vector v = Vector::Zero(net.params().size());
  Vector grad;
  long step = 0;

  const std::size_t n = train.rows();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto bs = static_cast<std::size_t>(cfg.batch_size);

  for (int epoch = 1; epoch <= epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += bs) {
      const std::size_t end = std::min(n, start + bs);
      const auto batch = train.subset(std::span<const std::size_t>(order).subspan(start, end - start));
      const double loss =
          net.loss_and_gradient(net.params(), batch.X, batch.y, obj, grad, cfg.dropout_keep_prob, &rng);
      if (!std::isfinite(loss) || !grad.allFinite())
        throw Error(ErrorCode::diverged, "diverged; reduce learning rate");
      grad += cfg.weight_decay * net.params();
      ++step;
      m = beta1 * m + (1.0 - beta1) * grad;
      v = beta2 * v + (1.0 - beta2) * grad.cwiseAbs2();
      const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
      net.params().array() -= cfg.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
    }
    if (validation != nullptr && curve != nullptr && epoch % cfg.cv_eval_interval == 0)
      curve->push_back(evaluate_objective(net, validation->X, validation->y, obj));
  }
  return net;
}

/// Early stopping: the epoch count minimising mean validation loss over k folds.
inline int select_epochs(const Dataset& data, const MlpObjective& obj, const MlpConfig& cfg) {
  if (cfg.cv_folds < 2 || data.rows() < static_cast<std::size_t>(cfg.cv_folds) ||
      cfg.max_epochs < cfg.cv_eval_interval)
    return cfg.max_epochs;
  const auto ids = fold_assignment(data.rows(), cfg.cv_folds, mix_seed(cfg.seed, 0xF01D));
  std::vector<double> mean_curve;
  for (int f = 0; f < cfg.cv_folds; ++f) {
    std::vector<std::size_t> tr, va;
    for (std::size_t i = 0; i < data.rows(); ++i) (ids[i] == f ? va : tr).push_back(i);
    const auto dtr = data.subset(tr);
    const auto dva = data.subset(va);
    std::vector<double> curve;
    train_network(dtr, obj, cfg, cfg.max_epochs, mix_seed(cfg.seed, static_cast<std::uint64_t>(f) + 1), &dva,
                  &curve);
    if (mean_curve.empty()) mean_curve.assign(curve.size(), 0.0);
    for (std::size_t i = 0; i < curve.size(); ++i) mean_curve[i] += curve[i];
  }
  const auto best = std::min_element(mean_curve.begin(), mean_curve.end()) - mean_curve.begin();
  return static_cast<int>(best + 1) * cfg.cv_eval_interval;
}

inline MlpNetwork fit_network(const Dataset& data, const MlpObjective& obj, const MlpConfig& cfg) {
  cfg.validate();
  if (data.rows() < 1) throw Error(ErrorCode::invalid_argument, "MLP needs at least one sample");
  if (!data.X.allFinite() || !data.y.allFinite()) throw Error(ErrorCode::invalid_argument, "non-finite data");
  const int epochs = select_epochs(data, obj, cfg);
  return train_network(data, obj, cfg, epochs, cfg.seed);
}

}  // namespace detail

class MlpMeanModel final : public MeanRegressor {
 public:
  explicit MlpMeanModel(MlpNetwork net) : net_(std::move(net)) {}
  double predict(Row x) const override { return net_.forward(Matrix(x))(0, 0); }
  Vector predict_all(const Matrix& X) const override { return net_.forward(X).row(0).transpose(); }
  const MlpNetwork& network() const noexcept { return net_; }

 private:
  MlpNetwork net_;
};

class MlpQuantileModel final : public QuantileRegressor {
 public:
  explicit MlpQuantileModel(MlpNetwork net) : net_(std::move(net)) {}
  QuantilePair predict_pair(Row x) const override {
    const auto out = net_.forward(Matrix(x));
    return {out(0, 0), out(1, 0)};
  }
  std::vector<QuantilePair> predict_all(const Matrix& X) const override {
    const auto out = net_.forward(X);
    std::vector<QuantilePair> pairs(static_cast<std::size_t>(out.cols()));
    for (Eigen::Index j = 0; j < out.cols(); ++j) pairs[static_cast<std::size_t>(j)] = {out(0, j), out(1, j)};
    return pairs;
  }

 private:
  MlpNetwork net_;
};

/// Regression of absolute residuals; negative network outputs are clipped to zero.
class MlpDispersionModel final : public DispersionRegressor {
 public:
  explicit MlpDispersionModel(MlpNetwork net) : net_(std::move(net)) {}
  double predict(Row x) const override { return std::max(0.0, net_.forward(Matrix(x))(0, 0)); }
  Vector predict_all(const Matrix& X) const override {
    return net_.forward(X).row(0).transpose().cwiseMax(0.0);
  }

 private:
  MlpNetwork net_;
};

inline MlpMeanModel mlp_fit_mean(const Matrix& X, const Vector& y, const MlpConfig& cfg) {
  return MlpMeanModel(detail::fit_network(Dataset(X, y), {MlpHead::squared_error}, cfg));
}

inline MlpQuantileModel mlp_fit_quantiles(const Matrix& X, const Vector& y, QuantileLevel level_lo,
                                          QuantileLevel level_hi, const MlpConfig& cfg) {
  const MlpObjective obj{MlpHead::pinball_pair, level_lo.value(), level_hi.value()};
  return MlpQuantileModel(detail::fit_network(Dataset(X, y), obj, cfg));
}

inline MlpDispersionModel mlp_fit_dispersion(const Matrix& X, const Vector& residuals, const MlpConfig& cfg) {
  return MlpDispersionModel(detail::fit_network(Dataset(X, residuals), {MlpHead::squared_error}, cfg));
}

}  // namespace cqr

#endif  // CQR_REGRESSORS_MLP_HPP
