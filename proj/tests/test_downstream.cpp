#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "synthkit/downstream.hpp"
#include "synthkit/rng.hpp"

using namespace synthkit;

namespace {

LabeledDataset two_gaussians(int n, double separation, double noise, Rng& rng) {
  Eigen::MatrixXd X(n, 2);
  Eigen::VectorXi y(n);
  for (int i = 0; i < n; ++i) {
    const int label = i % 2;
    const double cx = label == 0 ? -separation / 2 : separation / 2;
    X(i, 0) = cx + noise * rng.normal();
    X(i, 1) = noise * rng.normal();
    y[i] = label;
  }
  return make_dataset(X, y, 2);
}

// all-pairs oracle with half credit for ties
Real brute_force_auc(const std::vector<Real>& scores, const std::vector<int>& labels) {
  Real won = 0;
  long pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      ++pairs;
      if (scores[i] > scores[j])
        won += 1.0;
      else if (scores[i] == scores[j])
        won += 0.5;
    }
  }
  return won / static_cast<Real>(pairs);
}

// monotone 1-D scorer: logits (0, v*tanh(w*x)), so predict 1 iff x >= 0
Classifier sign_classifier() {
  MlpClassifier model(MlpShape{1, 2, {1}});
  Eigen::VectorXd p(6);
  // W0 = [2], b0 = 0, W1 = [0; 4], b1 = 0
  p << 2.0, 0.0, 0.0, 4.0, 0.0, 0.0;
  model.params() = p;
  return model;
}

Classifier constant_class0_classifier() {
  MlpClassifier model(MlpShape{1, 2, {1}});
  Eigen::VectorXd p = Eigen::VectorXd::Zero(6);
  p[4] = 3.0;  // bias logit for class 0
  model.params() = p;
  return model;
}

LabeledDataset dataset_1d(std::initializer_list<std::pair<double, int>> rows) {
  Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()), 1);
  Eigen::VectorXi y(static_cast<Eigen::Index>(rows.size()));
  Eigen::Index i = 0;
  for (const auto& [x, label] : rows) {
    X(i, 0) = x;
    y[i] = label;
    ++i;
  }
  return make_dataset(X, y, 2);
}

}  // namespace

TEST_CASE("split_subsets produces disjoint stratified subsets") {
  Rng rng(50);
  const LabeledDataset data = two_gaussians(100, 4.0, 0.5, rng);

  const auto subsets = split_subsets(data, 5, 0.1, 123);
  REQUIRE(subsets.size() == 5);
  std::set<std::pair<double, double>> seen;
  for (const auto& s : subsets) {
    CHECK(s.size() == 10);
    const auto counts = s.class_counts();
    CHECK(counts[0] == 5);
    CHECK(counts[1] == 5);
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      const auto key = std::make_pair(s.X(i, 0), s.X(i, 1));
      CHECK(!seen.count(key));
      seen.insert(key);
    }
  }

  const auto again = split_subsets(data, 5, 0.1, 123);
  for (int i = 0; i < 5; ++i) {
    CHECK(again[i].X == subsets[i].X);
    CHECK(again[i].labels == subsets[i].labels);
  }

  CHECK_THROWS_AS(split_subsets(data, 5, 0.3, 1), std::invalid_argument);
  CHECK_THROWS_AS(split_subsets(data, 0, 0.1, 1), std::invalid_argument);
  // 5 * 0.2 must be accepted despite floating-point rounding
  CHECK_NOTHROW(split_subsets(data, 5, 0.2, 1));
}

TEST_CASE("auc matches hand values and the all-pairs oracle") {
  CHECK(auc({0.9, 0.8, 0.3, 0.2}, {1, 1, 0, 0}) == 1.0);
  CHECK(auc({0.9, 0.2, 0.8, 0.3}, {1, 1, 0, 0}) == 0.5);
  CHECK(auc({0.4, 0.4, 0.4, 0.4}, {1, 1, 0, 0}) == 0.5);
  CHECK(auc({0.2, 0.8, 0.9}, {0, 1, 1}) == 1.0);
  CHECK_THROWS_AS(auc({0.1, 0.2}, {1, 1}), std::invalid_argument);
  CHECK_THROWS_AS(auc({0.1, 0.2}, {0, 2}), std::invalid_argument);

  Rng rng(2024);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = 2 + rng.uniform_int(499);
    std::vector<Real> scores(n);
    std::vector<int> labels(n);
    bool has_pos = false, has_neg = false;
    for (int i = 0; i < n; ++i) {
      // quantized scores inject plenty of ties
      scores[i] = std::round(rng.uniform() * 8.0) / 8.0;
      labels[i] = rng.uniform() < 0.4 ? 1 : 0;
      has_pos |= labels[i] == 1;
      has_neg |= labels[i] == 0;
    }
    if (!has_pos) labels[0] = 1;
    if (!has_neg) labels[n - 1] = 0;
    CHECK(auc(scores, labels) == brute_force_auc(scores, labels));
  }
}

TEST_CASE("auc is exactly invariant under strictly increasing transforms") {
  Rng rng(8);
  std::vector<Real> scores(200);
  std::vector<int> labels(200);
  for (int i = 0; i < 200; ++i) {
    scores[i] = std::round(rng.normal() * 4.0) / 4.0;
    labels[i] = i % 2;
  }
  const Real base = auc(scores, labels);
  std::vector<Real> transformed = scores;
  for (Real& s : transformed) s = std::exp(0.5 * s) - 3.0;
  CHECK(auc(transformed, labels) == base);
}

TEST_CASE("evaluate reports the confusion-matrix metrics at threshold 0.5") {
  SUBCASE("perfect separation") {
    const LabeledDataset test = dataset_1d({{1.0, 1}, {2.0, 1}, {-1.0, 0}, {-2.0, 0}});
    const ClassifierMetrics m = evaluate(sign_classifier(), test);
    CHECK(m.accuracy == 1.0);
    CHECK(m.auc == 1.0);
    CHECK(m.sensitivity == 1.0);
    CHECK(m.specificity == 1.0);
  }

  SUBCASE("constant class-0 predictor on a balanced set") {
    const LabeledDataset test = dataset_1d({{1.0, 1}, {-1.0, 1}, {0.5, 0}, {-0.5, 0}});
    const ClassifierMetrics m = evaluate(constant_class0_classifier(), test);
    CHECK(m.accuracy == 0.5);
    CHECK(m.sensitivity == 0.0);
    CHECK(m.specificity == 1.0);
    CHECK(m.auc == 0.5);
  }

  SUBCASE("hand-built confusion TP=1 FN=1 TN=2 FP=0") {
    const LabeledDataset test = dataset_1d({{1.0, 1}, {-1.0, 1}, {-0.5, 0}, {-2.0, 0}});
    const ClassifierMetrics m = evaluate(sign_classifier(), test);
    CHECK(m.sensitivity == 0.5);
    CHECK(m.specificity == 1.0);
    CHECK(m.accuracy == 0.75);
  }

  SUBCASE("empty test set is rejected") {
    LabeledDataset empty;
    empty.X.resize(0, 1);
    empty.labels.resize(0);
    empty.n_classes = 2;
    CHECK_THROWS_AS(evaluate(sign_classifier(), empty), std::invalid_argument);
  }
}

TEST_CASE("balanced accuracy identity at threshold 0.5") {
  Rng rng(64);
  const LabeledDataset test = two_gaussians(120, 1.5, 1.0, rng);
  TrainConfig cfg;
  cfg.epochs = 15;
  cfg.hidden = {8};
  cfg.seed = 4;
  const Classifier clf = train_classifier(two_gaussians(120, 1.5, 1.0, rng), cfg);
  const ClassifierMetrics m = evaluate(clf, test);
  CHECK(m.accuracy == doctest::Approx((m.sensitivity + m.specificity) / 2).epsilon(1e-12));
}

TEST_CASE("train_classifier warm start and reproducibility") {
  Rng rng(90);
  const LabeledDataset data = two_gaussians(160, 3.0, 0.6, rng);

  TrainConfig long_cfg;
  long_cfg.epochs = 80;
  long_cfg.batch_size = 32;
  long_cfg.learning_rate = 0.05;
  long_cfg.seed = 11;
  long_cfg.hidden = {16};

  const ClassifierTrainResult converged = train_mlp_classifier(data, long_cfg);

  TrainConfig short_cfg = long_cfg;
  short_cfg.epochs = 5;
  TrainerOptions warm;
  warm.init = &converged.model;
  const ClassifierTrainResult resumed = train_mlp_classifier(data, short_cfg, warm);
  // warm start must beat the first epoch of cold training
  CHECK(resumed.epoch_loss.back() <= converged.epoch_loss.front());

  const Classifier c1 = train_classifier(data, long_cfg);
  const Classifier c2 = train_classifier(data, long_cfg);
  CHECK(c1.params() == c2.params());

  Eigen::MatrixXd X(4, 2);
  X.setZero();
  CHECK_THROWS_AS(train_classifier(make_dataset(X, Eigen::VectorXi::Zero(4), 1), long_cfg),
                  std::invalid_argument);

  const Classifier wrong_shape = sign_classifier();
  CHECK_THROWS_AS(train_classifier(data, long_cfg, &wrong_shape), std::invalid_argument);
}

TEST_CASE("run_regime oracles over five seeds") {
  Rng rng(7777);
  const LabeledDataset train = two_gaussians(160, 2.5, 0.8, rng);
  const LabeledDataset valid = two_gaussians(80, 2.5, 0.8, rng);
  const LabeledDataset test = two_gaussians(80, 2.5, 0.8, rng);

  SyntheticDataset copy;
  copy.data = train;
  copy.scores = Eigen::VectorXd::Ones(train.size());
  copy.attempts = Eigen::VectorXi::Ones(train.size());

  TrainConfig cfg;
  cfg.epochs = 40;
  cfg.batch_size = 32;
  cfg.learning_rate = 0.05;
  cfg.hidden = {16};

  Real base_sum = 0, aug_sum = 0, transfer_sum = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    cfg.seed = seed;
    base_sum += run_regime({RegimeKind::baseline}, train, nullptr, valid, test, cfg).auc;
    aug_sum += run_regime({RegimeKind::synthetic_aug}, train, &copy, valid, test, cfg).auc;
    transfer_sum += run_regime({RegimeKind::transfer}, train, &copy, valid, test, cfg).auc;
  }
  const Real base = base_sum / 5, aug = aug_sum / 5, transfer = transfer_sum / 5;
  // synthetic data duplicating the real set must not change the picture
  CHECK(std::abs(aug - base) < 0.02);
  CHECK(transfer >= base - 0.02);
}

TEST_CASE("run_regime validates synthetic-data preconditions") {
  Rng rng(3);
  const LabeledDataset train = two_gaussians(40, 3.0, 0.5, rng);
  const LabeledDataset valid = two_gaussians(20, 3.0, 0.5, rng);
  const LabeledDataset test = two_gaussians(20, 3.0, 0.5, rng);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.hidden = {4};

  CHECK_THROWS_AS(run_regime({RegimeKind::synthetic_aug}, train, nullptr, valid, test, cfg),
                  std::invalid_argument);
  CHECK_THROWS_AS(run_regime({RegimeKind::transfer}, train, nullptr, valid, test, cfg),
                  std::invalid_argument);

  SyntheticDataset short_synth;
  short_synth.data = two_gaussians(20, 3.0, 0.5, rng);
  CHECK_THROWS_AS(run_regime({RegimeKind::synthetic_aug}, train, &short_synth, valid, test, cfg),
                  std::invalid_argument);

  Regime relaxed{RegimeKind::synthetic_aug};
  relaxed.require_equal_counts = false;
  CHECK_NOTHROW(run_regime(relaxed, train, &short_synth, valid, test, cfg));
}

TEST_CASE("traditional augmentation trains and evaluates cleanly") {
  Rng rng(21);
  const LabeledDataset train = two_gaussians(120, 2.5, 0.7, rng);
  const LabeledDataset valid = two_gaussians(60, 2.5, 0.7, rng);
  const LabeledDataset test = two_gaussians(60, 2.5, 0.7, rng);
  TrainConfig cfg;
  cfg.epochs = 30;
  cfg.batch_size = 32;
  cfg.learning_rate = 0.05;
  cfg.hidden = {16};
  cfg.seed = 5;

  const ClassifierMetrics m =
      run_regime({RegimeKind::traditional_aug}, train, nullptr, valid, test, cfg);
  CHECK(m.accuracy > 0.8);
  CHECK(m.auc > 0.85);
}
