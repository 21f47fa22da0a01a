#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "synthkit/features.hpp"
#include "synthkit/rng.hpp"

using namespace synthkit;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
  const std::string path = std::filesystem::temp_directory_path() / name;
  std::ofstream out(path);
  out << content;
  return path;
}

LabeledDataset separable_two_class(int n, Rng& rng) {
  Eigen::MatrixXd X(n, 2);
  Eigen::VectorXi y(n);
  for (int i = 0; i < n; ++i) {
    const int label = i % 2;
    const double cx = label == 0 ? -2.0 : 2.0;
    X(i, 0) = cx + 0.3 * rng.normal();
    X(i, 1) = 0.3 * rng.normal();
    y[i] = label;
  }
  return make_dataset(X, y, 2);
}

}  // namespace

TEST_CASE("load_dataset parses the labeled CSV format") {
  const std::string path =
      write_temp("synthkit_ds_ok.csv", "label,f0,f1\n0,1.0,2.0\n1,3.0,4.0\n");
  const LabeledDataset ds = load_dataset(path);
  CHECK(ds.size() == 2);
  CHECK(ds.dim() == 2);
  CHECK(ds.n_classes == 2);
  CHECK(ds.X(0, 0) == 1.0);
  CHECK(ds.X(1, 1) == 4.0);
  CHECK(ds.labels[0] == 0);
  CHECK(ds.labels[1] == 1);
  CHECK(ds.class_counts() == std::vector<long>{1, 1});
  std::filesystem::remove(path);
}

TEST_CASE("load_dataset rejects malformed input with line numbers") {
  SUBCASE("empty file") {
    const std::string path = write_temp("synthkit_ds_empty.csv", "");
    CHECK_THROWS_AS(load_dataset(path), DataError);
    std::filesystem::remove(path);
  }

  SUBCASE("header only") {
    const std::string path = write_temp("synthkit_ds_header.csv", "label,f0\n");
    CHECK_THROWS_AS(load_dataset(path), DataError);
    std::filesystem::remove(path);
  }

  SUBCASE("short row names the line") {
    const std::string path =
        write_temp("synthkit_ds_short.csv", "label,f0,f1\n0,1.0,2.0\n1,3.0\n");
    try {
      load_dataset(path);
      FAIL("expected DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find(":3") != std::string::npos);
    }
    std::filesystem::remove(path);
  }

  SUBCASE("non-integer label") {
    const std::string path = write_temp("synthkit_ds_label.csv", "label,f0\n1.5,2.0\n");
    CHECK_THROWS_AS(load_dataset(path), DataError);
    std::filesystem::remove(path);
  }

  SUBCASE("negative label") {
    const std::string path = write_temp("synthkit_ds_neg.csv", "label,f0\n-1,2.0\n");
    CHECK_THROWS_AS(load_dataset(path), DataError);
    std::filesystem::remove(path);
  }

  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_dataset("/nonexistent/synthkit.csv"), DataError);
  }
}

TEST_CASE("dataset save/load round trip is bitwise lossless") {
  Rng rng(17);
  Eigen::MatrixXd X(25, 3);
  Eigen::VectorXi y(25);
  for (int i = 0; i < 25; ++i) {
    X.row(i) = (rng.normal_vector(3) * std::exp(10.0 * rng.uniform() - 5.0)).transpose();
    y[i] = rng.uniform_int(4);
  }
  // force every class to appear so C survives the round trip
  y[0] = 3;
  const LabeledDataset ds = make_dataset(X, y, 4);

  const std::string path = std::filesystem::temp_directory_path() / "synthkit_ds_rt.csv";
  save_dataset(ds, path);
  const LabeledDataset back = load_dataset(path);
  CHECK(back.X == ds.X);
  CHECK(back.labels == ds.labels);
  CHECK(back.n_classes == ds.n_classes);

  FeatureSet fs{ds.X, ds.labels};
  save_feature_set(fs, path);
  const FeatureSet fs_back = load_feature_set(path);
  CHECK(fs_back.F == fs.F);
  CHECK(fs_back.labels == fs.labels);
  std::filesystem::remove(path);
}

TEST_CASE("extractor training reaches high accuracy on separable data") {
  Rng rng(23);
  const LabeledDataset data = separable_two_class(200, rng);

  TrainConfig cfg;
  cfg.epochs = 60;
  cfg.batch_size = 32;
  cfg.learning_rate = 0.05;
  cfg.seed = 5;
  cfg.hidden = {16};

  const FeatureExtractor ext = train_feature_extractor(data, cfg);
  long correct = 0;
  for (Eigen::Index i = 0; i < data.size(); ++i)
    if (ext.predict(data.X.row(i).transpose()) == data.labels[i]) ++correct;
  CHECK(static_cast<double>(correct) / data.size() >= 0.95);

  const FeatureExtractor again = train_feature_extractor(data, cfg);
  CHECK(again.params() == ext.params());
}

TEST_CASE("extractor training rejects degenerate class structure") {
  TrainConfig cfg;
  cfg.epochs = 1;

  Eigen::MatrixXd X(4, 2);
  X.setZero();
  CHECK_THROWS_AS(train_feature_extractor(make_dataset(X, Eigen::VectorXi::Zero(4), 1), cfg),
                  std::invalid_argument);
  // label space says two classes, class 1 never occurs
  CHECK_THROWS_AS(train_feature_extractor(make_dataset(X, Eigen::VectorXi::Zero(4), 2), cfg),
                  std::invalid_argument);
}

TEST_CASE("embed carries shape, labels, and determinism") {
  Rng rng(31);
  const LabeledDataset data = separable_two_class(40, rng);
  TrainConfig cfg;
  cfg.epochs = 10;
  cfg.hidden = {8};
  cfg.seed = 2;
  const FeatureExtractor ext = train_feature_extractor(data, cfg);

  const FeatureSet fs = embed(ext, data);
  CHECK(fs.size() == data.size());
  CHECK(fs.dim() == ext.feature_dim());
  CHECK(fs.labels == data.labels);
  const FeatureSet fs2 = embed(ext, data);
  CHECK(fs.F == fs2.F);

  Eigen::MatrixXd wrong(3, 5);
  wrong.setZero();
  CHECK_THROWS_AS(embed(ext, make_dataset(wrong, Eigen::VectorXi::Zero(3), 1)),
                  std::invalid_argument);
}

TEST_CASE("embed matches a hand-computed forward pass on d=1") {
  // one hidden layer of width 2: params = [W0 (2x1), b0 (2), W1 (2x2), b1 (2)]
  MlpClassifier model(MlpShape{1, 2, {2}});
  Eigen::VectorXd p(10);
  p << 0.8, -0.6, 0.1, -0.2, 0.3, -0.7, 0.4, 0.9, 0.0, 0.0;
  model.params() = p;

  const double x = 0.85;
  const auto act = [](double v) { return v / (1.0 + std::exp(-v)); };
  const double h0 = act(0.8 * x + 0.1);
  const double h1 = act(-0.6 * x - 0.2);

  Eigen::MatrixXd X(1, 1);
  X(0, 0) = x;
  const FeatureSet fs = embed(model, make_dataset(X, Eigen::VectorXi::Zero(1), 2));
  REQUIRE(fs.dim() == 2);
  CHECK(fs.F(0, 0) == doctest::Approx(h0).epsilon(1e-15));
  CHECK(fs.F(0, 1) == doctest::Approx(h1).epsilon(1e-15));

  // logits use the second weight block: W1 column-major [0.3, -0.7, 0.4, 0.9]
  const Eigen::VectorXd z = model.logits(Eigen::VectorXd::Constant(1, x));
  CHECK(z[0] == doctest::Approx(0.3 * h0 + 0.4 * h1).epsilon(1e-15));
  CHECK(z[1] == doctest::Approx(-0.7 * h0 + 0.9 * h1).epsilon(1e-15));
}

TEST_CASE("cross-entropy gradient matches central finite differences") {
  Rng rng(77);
  const LabeledDataset data = separable_two_class(12, rng);
  MlpClassifier model = MlpClassifier::init(2, {6}, 2, rng);

  std::vector<int> idx(static_cast<std::size_t>(data.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);

  Eigen::VectorXd grad(model.params().size());
  const Real loss = ce_loss_and_grad(model, data.X, data.labels, idx, grad);
  CHECK(std::isfinite(loss));

  Eigen::VectorXd probe_grad(model.params().size());
  for (int probe = 0; probe < 15; ++probe) {
    const Eigen::Index i = rng.uniform_int(static_cast<int>(model.params().size()));
    const double h = 1e-5;
    const double saved = model.params()[i];
    model.params()[i] = saved + h;
    const Real up = ce_loss_and_grad(model, data.X, data.labels, idx, probe_grad);
    model.params()[i] = saved - h;
    const Real down = ce_loss_and_grad(model, data.X, data.labels, idx, probe_grad);
    model.params()[i] = saved;
    const double fd = (up - down) / (2.0 * h);
    CHECK(std::abs(fd - grad[i]) / std::max({std::abs(fd), std::abs(grad[i]), 1e-10}) < 1e-4);
  }
}
