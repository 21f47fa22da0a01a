#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "synthkit/classifier.hpp"
#include "synthkit/dataset.hpp"
#include "synthkit/rng.hpp"
#include "synthkit/selection.hpp"

namespace synthkit {

using Classifier = MlpClassifier;

enum class RegimeKind { baseline, traditional_aug, synthetic_aug, transfer };

/// Training regime for the downstream classifier. Synthetic regimes require
/// a SyntheticDataset whose size equals the real training size unless
/// require_equal_counts is cleared.
struct Regime {
  RegimeKind kind = RegimeKind::baseline;
  Real aug_noise_scale = 0.05;  // traditional_aug: jitter as a fraction of per-feature std
  bool require_equal_counts = true;
};

struct ClassifierMetrics {
  Real accuracy = 0;
  Real auc = 0;
  Real sensitivity = 0;
  Real specificity = 0;
};

/// Stratified disjoint subsets: each holds round(fraction * class_count)
/// samples of every class, drawn without replacement from a seeded per-class
/// shuffle. Same seed, same partition.
inline std::vector<LabeledDataset> split_subsets(const LabeledDataset& dataset, int n_subsets,
                                                 Real fraction, std::uint64_t seed) {
  if (n_subsets < 1) throw std::invalid_argument("split_subsets: n_subsets must be >= 1");
  if (!(fraction > 0 && fraction <= 1))
    throw std::invalid_argument("split_subsets: fraction must lie in (0, 1]");
  if (static_cast<Real>(n_subsets) * fraction > 1 + 1e-12)
    throw std::invalid_argument("split_subsets: n_subsets * fraction exceeds 1");

  std::vector<std::vector<int>> by_class(dataset.n_classes);
  for (Eigen::Index i = 0; i < dataset.size(); ++i)
    by_class[dataset.labels[i]].push_back(static_cast<int>(i));

  std::vector<long> take(dataset.n_classes);
  for (int c = 0; c < dataset.n_classes; ++c) {
    take[c] = std::llround(fraction * static_cast<Real>(by_class[c].size()));
    if (take[c] < 1)
      throw std::invalid_argument("split_subsets: fraction rounds to zero samples for class " +
                                  std::to_string(c));
    if (take[c] * n_subsets > static_cast<long>(by_class[c].size()))
      throw std::invalid_argument("split_subsets: infeasible fraction for class " +
                                  std::to_string(c));
  }

  Rng rng(seed);
  for (auto& idx : by_class) {
    const std::vector<int> perm = rng.permutation(static_cast<int>(idx.size()));
    std::vector<int> shuffled(idx.size());
    for (std::size_t j = 0; j < idx.size(); ++j) shuffled[j] = idx[perm[j]];
    idx = std::move(shuffled);
  }

  std::vector<LabeledDataset> subsets;
  subsets.reserve(n_subsets);
  for (int s = 0; s < n_subsets; ++s) {
    std::vector<int> rows;
    for (int c = 0; c < dataset.n_classes; ++c)
      for (long j = s * take[c]; j < (s + 1) * take[c]; ++j)
        rows.push_back(by_class[c][static_cast<std::size_t>(j)]);
    subsets.push_back(dataset.subset(rows));
  }
  return subsets;
}

/// Cross-entropy gradient-descent training; when init is given, optimization
/// starts from its parameters with everything trainable.
inline Classifier train_classifier(const LabeledDataset& train, const TrainConfig& cfg,
                                   const Classifier* init = nullptr) {
  TrainerOptions opts;
  opts.init = init;
  return train_mlp_classifier(train, cfg, opts).model;
}

/// Probability that a uniformly random positive outscores a uniformly random
/// negative, ties counting one half. Computed by average ranks, which agrees
/// exactly with the all-pairs count.
inline Real auc(const std::vector<Real>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("auc: size mismatch");
  const std::size_t n = scores.size();
  long n_pos = 0, n_neg = 0;
  for (int y : labels) {
    if (y == 1)
      ++n_pos;
    else if (y == 0)
      ++n_neg;
    else
      throw std::invalid_argument("auc: labels must be 0 or 1");
  }
  if (n_pos == 0 || n_neg == 0)
    throw std::invalid_argument("auc: both classes must be present");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Average ranks within tie groups, 1-based.
  Real rank_sum_pos = 0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const Real avg_rank = 0.5 * static_cast<Real>(i + 1 + j);  // mean of ranks i+1 .. j
    for (std::size_t m = i; m < j; ++m)
      if (labels[order[m]] == 1) rank_sum_pos += avg_rank;
    i = j;
  }
  const Real u = rank_sum_pos - 0.5 * static_cast<Real>(n_pos) * static_cast<Real>(n_pos + 1);
  return u / (static_cast<Real>(n_pos) * static_cast<Real>(n_neg));
}

/// Test metrics at threshold 0.5 on the class-1 probability (class 1 is the
/// positive class). Accuracy is argmax-based and defined for any class
/// count; AUC, sensitivity and specificity require a binary task.
inline ClassifierMetrics evaluate(const Classifier& classifier, const LabeledDataset& test) {
  if (test.size() == 0) throw std::invalid_argument("evaluate: empty test set");
  if (test.dim() != classifier.in_dim())
    throw std::invalid_argument("evaluate: data dimension mismatch");

  ClassifierMetrics m;
  long correct = 0;
  long tp = 0, fn = 0, tn = 0, fp = 0;
  std::vector<Real> scores;
  std::vector<int> labels;
  const bool binary = classifier.n_classes() == 2;
  if (binary) {
    scores.reserve(test.size());
    labels.reserve(test.size());
  }

  for (Eigen::Index i = 0; i < test.size(); ++i) {
    const Eigen::VectorXd x = test.X.row(i).transpose();
    const int truth = test.labels[i];
    const int pred = classifier.predict(x);
    if (pred == truth) ++correct;
    if (binary) {
      const Real p1 = classifier.probabilities(x)[1];
      scores.push_back(p1);
      labels.push_back(truth);
      const int thresholded = p1 >= 0.5 ? 1 : 0;
      if (truth == 1)
        (thresholded == 1 ? tp : fn)++;
      else
        (thresholded == 0 ? tn : fp)++;
    }
  }

  m.accuracy = static_cast<Real>(correct) / static_cast<Real>(test.size());
  if (binary) {
    m.sensitivity = tp + fn > 0 ? static_cast<Real>(tp) / static_cast<Real>(tp + fn)
                                : std::numeric_limits<Real>::quiet_NaN();
    m.specificity = tn + fp > 0 ? static_cast<Real>(tn) / static_cast<Real>(tn + fp)
                                : std::numeric_limits<Real>::quiet_NaN();
    m.auc = auc(scores, labels);
  } else {
    m.auc = m.sensitivity = m.specificity = std::numeric_limits<Real>::quiet_NaN();
  }
  return m;
}

namespace detail {

inline LabeledDataset concat_datasets(const LabeledDataset& a, const LabeledDataset& b) {
  if (a.dim() != b.dim()) throw std::invalid_argument("concat_datasets: dimension mismatch");
  LabeledDataset out;
  out.X.resize(a.size() + b.size(), a.dim());
  out.X.topRows(a.size()) = a.X;
  out.X.bottomRows(b.size()) = b.X;
  out.labels.resize(a.size() + b.size());
  out.labels.head(a.size()) = a.labels;
  out.labels.tail(b.size()) = b.labels;
  out.n_classes = std::max(a.n_classes, b.n_classes);
  return out;
}

inline std::function<Real(const Classifier&)> valid_auc_score(const LabeledDataset& valid) {
  return [&valid](const Classifier& c) { return evaluate(c, valid).auc; };
}

}  // namespace detail

/// Runs one training regime and reports test metrics. All regimes select the
/// epoch snapshot with the best validation AUC. baseline: real only.
/// traditional_aug: real with per-epoch Gaussian jitter scaled per feature.
/// synthetic_aug: shuffled union of real and synthetic. transfer: synthetic
/// pretraining, then fine-tuning on real from those weights (selection
/// applies to the fine-tuning phase).
inline ClassifierMetrics run_regime(const Regime& regime, const LabeledDataset& real_train,
                                    const SyntheticDataset* synth, const LabeledDataset& valid,
                                    const LabeledDataset& test, const TrainConfig& cfg) {
  const bool needs_synth =
      regime.kind == RegimeKind::synthetic_aug || regime.kind == RegimeKind::transfer;
  if (needs_synth && !synth)
    throw std::invalid_argument("run_regime: regime requires a synthetic dataset");
  if (needs_synth && regime.require_equal_counts && synth->data.size() != real_train.size())
    throw std::invalid_argument(
        "run_regime: synthetic size must equal real training size (got " +
        std::to_string(synth->data.size()) + " vs " + std::to_string(real_train.size()) + ")");

  TrainerOptions opts;
  opts.selection_score = detail::valid_auc_score(valid);

  switch (regime.kind) {
    case RegimeKind::baseline:
      return evaluate(train_mlp_classifier(real_train, cfg, opts).model, test);

    case RegimeKind::traditional_aug: {
      const Eigen::VectorXd mean = real_train.X.colwise().mean().transpose();
      const Eigen::MatrixXd centered = real_train.X.rowwise() - mean.transpose();
      const Eigen::VectorXd feature_std =
          (centered.colwise().squaredNorm() / std::max<Real>(1, real_train.size() - 1))
              .cwiseSqrt()
              .transpose();
      const Eigen::VectorXd jitter = regime.aug_noise_scale * feature_std;
      opts.augment = [jitter](Eigen::MatrixXd& X, Rng& rng) {
        for (Eigen::Index i = 0; i < X.rows(); ++i)
          for (Eigen::Index j = 0; j < X.cols(); ++j) X(i, j) += jitter[j] * rng.normal();
      };
      return evaluate(train_mlp_classifier(real_train, cfg, opts).model, test);
    }

    case RegimeKind::synthetic_aug: {
      const LabeledDataset merged = detail::concat_datasets(real_train, synth->data);
      return evaluate(train_mlp_classifier(merged, cfg, opts).model, test);
    }

    case RegimeKind::transfer: {
      TrainConfig pretrain_cfg = cfg;
      pretrain_cfg.seed = derive_seed(cfg.seed, fnv1a64("transfer-pretrain"));
      const Classifier pretrained = train_mlp_classifier(synth->data, pretrain_cfg).model;
      opts.init = &pretrained;
      return evaluate(train_mlp_classifier(real_train, cfg, opts).model, test);
    }
  }
  throw std::logic_error("run_regime: unknown regime kind");
}

}  // namespace synthkit
