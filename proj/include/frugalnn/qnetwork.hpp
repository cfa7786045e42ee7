#pragma once

#include "frugalnn/types.hpp"

#include <cmath>
#include <random>
#include <span>
#include <vector>

namespace frugalnn {

/// Dueling Q-network: input -> ReLU hidden layers -> {value (1), advantage
/// (A)}, combined as Q = V + A - mean(A).
///
/// All parameters live in one flat vector so that optimizers, target copies
/// and finite-difference checks work on a single buffer. Layout, per dense
/// layer in order (hidden..., value head, advantage head): weights
/// (rows x cols, column-major) then bias (rows).
template <typename Scalar>
class QNetwork {
 public:
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  struct Layer {
    int rows = 0;
    int cols = 0;
    Eigen::Index offset = 0;  // start of the weights; bias follows

    Eigen::Index weight_count() const { return Eigen::Index(rows) * cols; }
    Eigen::Index bias_offset() const { return offset + weight_count(); }
    Eigen::Index end() const { return bias_offset() + rows; }
  };

  /// Per-layer activations kept for back-propagation.
  struct Cache {
    std::vector<Mat> pre;   // hidden pre-activations
    std::vector<Mat> post;  // input followed by hidden activations
    Mat value;              // 1 x B
    Mat advantage;          // A x B
  };

  QNetwork() = default;

  QNetwork(int input_dim, std::vector<int> hidden, int n_actions)
      : input_dim_(input_dim), n_actions_(n_actions), hidden_(std::move(hidden)) {
    if (input_dim < 1 || n_actions < 1) throw UsageError("network dimensions must be positive");
    Eigen::Index offset = 0;
    int prev = input_dim;
    auto add = [&](int rows) {
      layers_.push_back(Layer{rows, prev, offset});
      offset = layers_.back().end();
    };
    for (int h : hidden_) {
      if (h < 1) throw UsageError("hidden layer sizes must be positive");
      add(h);
      prev = h;
    }
    add(1);
    add(n_actions);
    params_ = Vec::Zero(offset);
  }

  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
  template <typename Rng>
  void init_uniform(Rng& rng) {
    for (const Layer& l : layers_) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(l.cols));
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (Eigen::Index i = l.offset; i < l.end(); ++i) params_(i) = static_cast<Scalar>(dist(rng));
    }
  }

  int input_dim() const { return input_dim_; }
  int n_actions() const { return n_actions_; }
  const std::vector<int>& hidden() const { return hidden_; }
  const std::vector<Layer>& layers() const { return layers_; }
  Eigen::Index parameter_count() const { return params_.size(); }
  Vec& parameters() { return params_; }
  const Vec& parameters() const { return params_; }

  Eigen::Map<const Mat> weight(std::size_t layer) const {
    const Layer& l = layers_[layer];
    return Eigen::Map<const Mat>(params_.data() + l.offset, l.rows, l.cols);
  }
  Eigen::Map<const Vec> bias(std::size_t layer) const {
    const Layer& l = layers_[layer];
    return Eigen::Map<const Vec>(params_.data() + l.bias_offset(), l.rows);
  }

  /// Q-values for a batch of inputs stored as columns (input_dim x B).
  Mat forward(const Eigen::Ref<const Mat>& inputs, Cache* cache = nullptr) const {
    const std::size_t n_hidden = hidden_.size();
    Mat h = inputs;
    if (cache) {
      cache->pre.clear();
      cache->post.clear();
      cache->post.push_back(h);
    }
    for (std::size_t i = 0; i < n_hidden; ++i) {
      Mat z = (weight(i) * h).colwise() + bias(i);
      h = z.cwiseMax(Scalar(0));
      if (cache) {
        cache->pre.push_back(std::move(z));
        cache->post.push_back(h);
      }
    }
    Mat value = (weight(n_hidden) * h).colwise() + bias(n_hidden);
    Mat adv = (weight(n_hidden + 1) * h).colwise() + bias(n_hidden + 1);
    Mat q = adv.rowwise() - adv.colwise().mean();
    q.rowwise() += value.row(0);
    if (cache) {
      cache->value = std::move(value);
      cache->advantage = std::move(adv);
    }
    return q;
  }

  Vec forward_one(const Eigen::Ref<const Vec>& x) const { return forward(x).col(0); }

  /// State value V(s) for a batch (1 x B).
  Mat value(const Eigen::Ref<const Mat>& inputs) const {
    Cache c;
    forward(inputs, &c);
    return c.value;
  }

  /// Mean over the batch of (Q(s_i, a_i) - y_i)^2, and optionally its
  /// gradient with respect to every parameter.
  Scalar loss(const Eigen::Ref<const Mat>& inputs, std::span<const int> actions, const Eigen::Ref<const Vec>& targets,
              Vec* gradient = nullptr) const {
    const Eigen::Index batch = inputs.cols();
    Cache cache;
    const Mat q = forward(inputs, gradient ? &cache : nullptr);
    Vec err(batch);
    for (Eigen::Index i = 0; i < batch; ++i) err(i) = q(actions[static_cast<std::size_t>(i)], i) - targets(i);
    const Scalar l = err.squaredNorm() / Scalar(batch);
    if (!gradient) return l;

    gradient->setZero(params_.size());
    Mat dq = Mat::Zero(n_actions_, batch);
    for (Eigen::Index i = 0; i < batch; ++i)
      dq(actions[static_cast<std::size_t>(i)], i) = Scalar(2) * err(i) / Scalar(batch);

    // Dueling combination: dV = sum_a dQ, dA = dQ - mean_a dQ.
    const Mat dvalue = dq.colwise().sum();
    const Mat dadv = dq.rowwise() - dq.colwise().mean();

    const std::size_t n_hidden = hidden_.size();
    const Mat& top = cache.post.back();
    accumulate(*gradient, n_hidden, dvalue, top);
    accumulate(*gradient, n_hidden + 1, dadv, top);
    Mat dh = weight(n_hidden).transpose() * dvalue + weight(n_hidden + 1).transpose() * dadv;
    for (std::size_t i = n_hidden; i-- > 0;) {
      const Mat dz = dh.cwiseProduct((cache.pre[i].array() > Scalar(0)).template cast<Scalar>().matrix());
      accumulate(*gradient, i, dz, cache.post[i]);
      if (i > 0) dh = weight(i).transpose() * dz;
    }
    return l;
  }

  template <typename Other>
  QNetwork<Other> cast() const {
    QNetwork<Other> out(input_dim_, hidden_, n_actions_);
    out.parameters() = params_.template cast<Other>();
    return out;
  }

 private:
  void accumulate(Vec& gradient, std::size_t layer, const Mat& delta, const Mat& input) const {
    const Layer& l = layers_[layer];
    Eigen::Map<Mat>(gradient.data() + l.offset, l.rows, l.cols).noalias() += delta * input.transpose();
    Eigen::Map<Vec>(gradient.data() + l.bias_offset(), l.rows) += delta.rowwise().sum();
  }

  int input_dim_ = 0;
  int n_actions_ = 0;
  std::vector<int> hidden_;
  std::vector<Layer> layers_;
  Vec params_;
};

/// Index of the largest entry among the allowed ones; lowest index on ties.
template <typename Derived>
int masked_argmax(const Eigen::DenseBase<Derived>& q, const ActionMask& mask) {
  int best = -1;
  for (Eigen::Index a = 0; a < q.size(); ++a) {
    if (!mask(a)) continue;
    if (best < 0 || q(a) > q(best)) best = static_cast<int>(a);
  }
  if (best < 0) throw UsageError("mask allows no action");
  return best;
}

}  // namespace frugalnn
