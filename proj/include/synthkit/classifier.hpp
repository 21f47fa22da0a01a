#pragma once

#include <Eigen/Core>
#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "synthkit/dataset.hpp"
#include "synthkit/mlp.hpp"
#include "synthkit/train_config.hpp"

namespace synthkit {

/// Small fully connected softmax classifier. Serves two roles: the feature
/// extractor whose penultimate activations define the metric space, and the
/// downstream classifier. Evaluation is deterministic; an instance is
/// immutable once training finishes.
class MlpClassifier {
 public:
  MlpClassifier() = default;

  explicit MlpClassifier(MlpShape shape) : shape_(std::move(shape)) {
    if (shape_.in < 1 || shape_.out < 2 || shape_.hidden.empty())
      throw std::invalid_argument("MlpClassifier: need in >= 1, out >= 2, one hidden layer");
    params_ = Eigen::VectorXd::Zero(shape_.param_count());
  }

  static MlpClassifier init(int in_dim, std::vector<int> hidden, int n_classes, Rng& rng) {
    MlpClassifier c(MlpShape{in_dim, n_classes, std::move(hidden)});
    mlp_init_glorot(c.shape_, c.params_, rng);
    return c;
  }

  const MlpShape& shape() const { return shape_; }
  int in_dim() const { return shape_.in; }
  int n_classes() const { return shape_.out; }
  int feature_dim() const { return shape_.hidden.back(); }
  Eigen::VectorXd& params() { return params_; }
  const Eigen::VectorXd& params() const { return params_; }

  Eigen::VectorXd logits(const Eigen::VectorXd& x) const {
    return mlp_forward(shape_, params_, x);
  }

  /// Softmax probabilities (log-sum-exp stabilized).
  Eigen::VectorXd probabilities(const Eigen::VectorXd& x) const {
    Eigen::VectorXd z = logits(x);
    const double m = z.maxCoeff();
    Eigen::VectorXd p = (z.array() - m).exp();
    return p / p.sum();
  }

  /// Penultimate-layer activations (post-tanh).
  Eigen::VectorXd features(const Eigen::VectorXd& x) const {
    MlpTrace trace;
    mlp_forward(shape_, params_, x, nullptr, &trace);
    return trace.acts.back();
  }

  /// Argmax label; ties resolve to the higher index, so the binary case
  /// matches thresholding the class-1 probability at 0.5.
  int predict(const Eigen::VectorXd& x) const {
    const Eigen::VectorXd z = logits(x);
    int best = 0;
    for (int c = 1; c < z.size(); ++c)
      if (z[c] >= z[best]) best = c;
    return best;
  }

 private:
  MlpShape shape_;
  Eigen::VectorXd params_;
};

/// Mean cross-entropy over the index set, plus its gradient.
inline Real ce_loss_and_grad(const MlpClassifier& model, const Eigen::MatrixXd& X,
                             const Eigen::VectorXi& y, const std::vector<int>& idx,
                             Eigen::VectorXd& grad) {
  grad.setZero(model.params().size());
  const double inv_b = 1.0 / static_cast<double>(idx.size());
  Real loss = 0;
  MlpTrace trace;
  for (int i : idx) {
    const Eigen::VectorXd x = X.row(i).transpose();
    const Eigen::VectorXd z = mlp_forward(model.shape(), model.params(), x, nullptr, &trace);
    const double m = z.maxCoeff();
    const double lse = m + std::log((z.array() - m).exp().sum());
    loss += lse - z[y[i]];
    Eigen::VectorXd g = (z.array() - lse).exp();
    g[y[i]] -= 1.0;
    g *= inv_b;
    mlp_backward(model.shape(), model.params(), x, trace, g, grad);
  }
  return loss * inv_b;
}

struct TrainerOptions {
  const MlpClassifier* init = nullptr;
  // Applied to a fresh copy of the inputs at the start of every epoch.
  std::function<void(Eigen::MatrixXd&, Rng&)> augment;
  // When set, the returned model is the epoch snapshot maximizing this score
  // (ties keep the earlier epoch).
  std::function<Real(const MlpClassifier&)> selection_score;
};

struct ClassifierTrainResult {
  MlpClassifier model;
  std::vector<Real> epoch_loss;
  std::vector<Real> selection_trace;
  int best_epoch = -1;
};

/// Mini-batch gradient descent with momentum on cross-entropy. Deterministic
/// per seed. Requires at least two classes, each with at least one sample.
inline ClassifierTrainResult train_mlp_classifier(const LabeledDataset& train,
                                                  const TrainConfig& cfg,
                                                  const TrainerOptions& opts = {}) {
  cfg.validate();
  if (train.size() == 0) throw std::invalid_argument("train_mlp_classifier: empty dataset");
  if (train.n_classes < 2)
    throw std::invalid_argument("train_mlp_classifier: need at least two classes");
  for (int c = 0; c < train.n_classes; ++c)
    if (train.class_counts()[c] == 0)
      throw std::invalid_argument("train_mlp_classifier: class " + std::to_string(c) +
                                  " has no samples");

  Rng rng(cfg.seed);
  const std::vector<int> hidden = cfg.hidden.empty() ? std::vector<int>{64} : cfg.hidden;
  MlpClassifier model;
  if (opts.init) {
    if (opts.init->in_dim() != train.dim() || opts.init->n_classes() != train.n_classes)
      throw std::invalid_argument("train_mlp_classifier: init model dimensions mismatch");
    model = *opts.init;
  } else {
    model = MlpClassifier::init(static_cast<int>(train.dim()), hidden, train.n_classes, rng);
  }

  ClassifierTrainResult result;
  Eigen::VectorXd velocity = Eigen::VectorXd::Zero(model.params().size());
  Eigen::VectorXd grad(model.params().size());
  Eigen::VectorXd best_params;
  Real best_score = 0;

  const int n = static_cast<int>(train.size());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const Real lr = cfg.epoch_learning_rate(epoch);
    Eigen::MatrixXd X = train.X;
    if (opts.augment) opts.augment(X, rng);

    const std::vector<int> perm = rng.permutation(n);
    Real epoch_loss = 0;
    for (int start = 0; start < n; start += cfg.batch_size) {
      const int stop = std::min(n, start + cfg.batch_size);
      const std::vector<int> idx(perm.begin() + start, perm.begin() + stop);
      const Real loss = ce_loss_and_grad(model, X, train.labels, idx, grad);
      if (!std::isfinite(loss))
        throw NumericalError("train_mlp_classifier: non-finite loss (reduce learning rate)");
      velocity = cfg.momentum * velocity - lr * grad;
      model.params() += velocity;
      epoch_loss += loss * static_cast<Real>(idx.size());
    }
    result.epoch_loss.push_back(epoch_loss / n);

    if (opts.selection_score) {
      const Real score = opts.selection_score(model);
      result.selection_trace.push_back(score);
      if (result.best_epoch < 0 || score > best_score) {
        best_score = score;
        best_params = model.params();
        result.best_epoch = epoch;
      }
    }
  }

  if (opts.selection_score && result.best_epoch >= 0) model.params() = best_params;
  result.model = std::move(model);
  return result;
}

}  // namespace synthkit
