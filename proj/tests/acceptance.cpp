// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Criteria 1-6 check the numeric kernels against independent
// oracles and closed forms; criterion 7 runs the end-to-end toy experiment;
// criterion 8 reruns it and demands byte-identical reports.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "synthkit/experiment.hpp"

using namespace synthkit;
namespace fs = std::filesystem;

namespace {

struct Checker {
  bool ok = true;
  std::string first_failure;

  void expect(bool condition, const std::string& what) {
    if (!condition && ok) {
      ok = false;
      first_failure = what;
    }
  }
};

LabeledDataset gaussian_mixture(int n, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd X(n, 2);
  Eigen::VectorXi y(n);
  for (int i = 0; i < n; ++i) {
    const int label = i % 2;
    X(i, 0) = (label == 0 ? -2.0 : 2.0) + 0.5 * rng.normal();
    X(i, 1) = 0.5 * rng.normal();
    y[i] = label;
  }
  return make_dataset(X, y, 2);
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof(buf), format, args);
  va_end(args);
  return buf;
}

// ---------------------------------------------------------------- criterion 1

Checker criterion1_schedule() {
  Checker c;
  const int T = 200;
  const auto sched = make_cosine_schedule<double>(T, 0.008);
  c.expect(sched.timesteps() == T, "timestep count");
  c.expect(std::abs(sched.alpha_bars[0] - (1.0 - sched.betas[0])) <= 1e-12 * sched.alpha_bars[0],
           "alpha_bar_0 consistency");
  double running = 1.0;
  for (int t = 0; t < T; ++t) {
    if (t > 0)
      c.expect(sched.alpha_bars[t] < sched.alpha_bars[t - 1],
               fmt("monotonicity at t=%d", t));
    running *= 1.0 - sched.betas[t];
    c.expect(std::abs(sched.alpha_bars[t] - running) / sched.alpha_bars[t] < 1e-10,
             fmt("product consistency at t=%d", t));
  }
  c.expect(sched.alpha_bars[T - 1] < 0.01,
           fmt("terminal alpha_bar %.3e >= 0.01", sched.alpha_bars[T - 1]));
  return c;
}

// ---------------------------------------------------------------- criterion 2

Checker criterion2_forward_stats() {
  Checker c;
  const auto sched = make_cosine_schedule<double>(200, 0.008);
  Eigen::VectorXd x0(2);
  x0 << 1.0, -1.0;
  const int draws = 100000;
  Rng rng(20240229);
  for (const int t : {50, 100, 150}) {
    const double ab = sched.alpha_bars[t];
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(2);
    Eigen::VectorXd sumsq = Eigen::VectorXd::Zero(2);
    for (int i = 0; i < draws; ++i) {
      const Eigen::VectorXd xt = forward_sample(x0, t, rng.normal_vector(2), sched);
      sum += xt;
      sumsq += xt.cwiseProduct(xt);
    }
    const double mean_tol = 3.0 * std::sqrt((1.0 - ab) / draws);
    for (int j = 0; j < 2; ++j) {
      const double mean = sum[j] / draws;
      const double var = sumsq[j] / draws - mean * mean;
      c.expect(std::abs(mean - std::sqrt(ab) * x0[j]) < mean_tol,
               fmt("mean at t=%d coord %d off by %.2e (tol %.2e)", t, j,
                   std::abs(mean - std::sqrt(ab) * x0[j]), mean_tol));
      c.expect(std::abs(var - (1.0 - ab)) < 0.05 * (1.0 - ab),
               fmt("variance at t=%d coord %d: %.4f vs %.4f", t, j, var, 1.0 - ab));
    }
  }
  return c;
}

// ---------------------------------------------------------------- criterion 3

Checker criterion3_gradient() {
  Checker c;
  const auto sched = make_cosine_schedule<double>(100, 0.008);
  Rng rng(97);
  Denoiser den = Denoiser::init(
      {.data_dim = 2, .n_classes = 2, .hidden = {32, 24}, .embedding_dim = 32}, rng);

  Eigen::MatrixXd X(6, 2);
  Eigen::VectorXi y(6);
  for (int i = 0; i < 6; ++i) {
    X.row(i) = rng.normal_vector(2).transpose();
    y[i] = i % 2;
  }
  const LabeledDataset batch = make_dataset(X, y, 2);
  const std::uint64_t seed = 31337;
  const Eigen::VectorXd grad = simple_loss(den, batch, sched, seed).second;

  for (int probe = 0; probe < 20; ++probe) {
    const Eigen::Index i = rng.uniform_int(static_cast<int>(den.param_count()));
    const double h = 1e-5 * std::max(1.0, std::abs(den.params()[i]));
    const double saved = den.params()[i];
    den.params()[i] = saved + h;
    const double up = simple_loss(den, batch, sched, seed).first;
    den.params()[i] = saved - h;
    const double down = simple_loss(den, batch, sched, seed).first;
    den.params()[i] = saved;
    const double fd = (up - down) / (2.0 * h);
    const double rel =
        std::abs(fd - grad[i]) / std::max({std::abs(fd), std::abs(grad[i]), 1e-10});
    c.expect(rel < 1e-4, fmt("probe %d at param %ld: rel err %.2e", probe, long(i), rel));
  }
  return c;
}

// ---------------------------------------------------------------- criterion 4

Checker criterion4_degenerate() {
  Checker c;
  Eigen::VectorXd x_star(2);
  x_star << 1.0, -0.5;
  Eigen::MatrixXd X(256, 2);
  for (int i = 0; i < 256; ++i) X.row(i) = x_star.transpose();
  const LabeledDataset data = make_dataset(X, Eigen::VectorXi::Zero(256), 1);
  const double tol = 0.1 * x_star.norm() + 0.1;

  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    TrainConfig cfg;
    cfg.epochs = 800;
    cfg.batch_size = 64;
    cfg.learning_rate = 0.01;
    cfg.lr_floor = 0.05;
    cfg.momentum = 0.9;
    cfg.seed = seed;
    cfg.hidden = {128, 128};
    cfg.schedule.T = 200;

    const DenoiserTrainResult result = train_denoiser(data, cfg);
    const NoiseSchedule sched = build_schedule(cfg.schedule);
    const Eigen::MatrixXd draws = sample(result.model, 0, sched, seed * 7919, 1000);
    const Eigen::VectorXd mean = draws.colwise().mean().transpose();
    const double err = (mean - x_star).norm();
    c.expect(err < tol, fmt("seed %llu: mean error %.4f (tol %.4f)",
                            static_cast<unsigned long long>(seed), err, tol));
  }
  return c;
}

// ---------------------------------------------------------------- criterion 5

Checker criterion5_metric_oracles() {
  Checker c;
  Rng rng(5050);

  // exact brute-force match for k-NN radii
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Index n = 5 + rng.uniform_int(196);
    const Eigen::Index d = 1 + rng.uniform_int(8);
    const int k = 1 + rng.uniform_int(static_cast<int>(n) - 1);
    FeatureSet pts;
    pts.F.resize(n, d);
    pts.labels = Eigen::VectorXi::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) pts.F.row(i) = rng.normal_vector(d).transpose();

    const ManifoldModel m = build_manifold(pts, k);
    bool exact = true;
    for (Eigen::Index i = 0; i < n && exact; ++i) {
      std::vector<std::pair<double, Eigen::Index>> dists;
      for (Eigen::Index j = 0; j < n; ++j)
        if (j != i) dists.emplace_back((pts.F.row(i) - pts.F.row(j)).norm(), j);
      std::sort(dists.begin(), dists.end());
      exact = m.radii[i] == dists[static_cast<std::size_t>(k - 1)].first;
    }
    c.expect(exact, fmt("manifold trial %d (n=%ld, k=%d) not exact", trial, long(n), k));
  }

  // exact all-pairs match for auc
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + rng.uniform_int(499);
    std::vector<Real> scores(n);
    std::vector<int> labels(n);
    for (int i = 0; i < n; ++i) {
      scores[i] = std::round(rng.uniform() * 16.0) / 16.0;
      labels[i] = rng.uniform() < 0.5 ? 1 : 0;
    }
    labels[0] = 1;
    labels[n - 1] = 0;
    Real won = 0;
    long pairs = 0;
    for (int i = 0; i < n; ++i) {
      if (labels[i] != 1) continue;
      for (int j = 0; j < n; ++j) {
        if (labels[j] != 0) continue;
        ++pairs;
        if (scores[i] > scores[j])
          won += 1.0;
        else if (scores[i] == scores[j])
          won += 0.5;
      }
    }
    c.expect(auc(scores, labels) == won / static_cast<Real>(pairs),
             fmt("auc trial %d (n=%d) not exact", trial, n));
  }

  // 1-D FID closed form
  GaussianStats a, b;
  a.mu = Eigen::VectorXd::Constant(1, 0.0);
  a.sigma = Eigen::MatrixXd::Constant(1, 1, 1.0);
  b.mu = Eigen::VectorXd::Constant(1, 2.0);
  b.sigma = Eigen::MatrixXd::Constant(1, 1, 4.0);
  c.expect(std::abs(fid(a, b) - 5.0) < 1e-8, fmt("1-D FID %.12f != 5", fid(a, b)));

  // Improved F1 on the published precision/recall pair
  const Real f1 = improved_f1(0.4517, 0.1117);
  c.expect(std::abs(f1 - 0.1791) <= 0.0005, fmt("improved F1 %.6f vs 0.1791 +/- 0.0005", f1));
  return c;
}

// ---------------------------------------------------------------- criterion 6

Checker criterion6_realism() {
  Checker c;
  FeatureSet real;
  real.F.resize(3, 1);
  real.F << 0.0, 1.0, 3.0;
  real.labels = Eigen::VectorXi::Zero(3);
  const ManifoldModel manifold = build_manifold(real, 1);

  c.expect(realism_score(Eigen::VectorXd::Constant(1, 2.0), manifold) == 2.0,
           "R(2) != 2.0 exactly");
  const Real r6 = realism_score(Eigen::VectorXd::Constant(1, 6.0), manifold);
  c.expect(r6 == 2.0 / 3.0, fmt("R(6) %.17g != 2/3 exactly", r6));
  c.expect(r6 < 1.0, "R(6) not discarded");

  // filtered outputs carry stored scores >= 1
  MlpClassifier extractor(MlpShape{1, 2, {1}});
  {
    Eigen::VectorXd p = Eigen::VectorXd::Zero(extractor.params().size());
    p[0] = 1e-3;  // features are a smooth monotone warp of the coordinate
    extractor.params() = p;
  }
  const Compressor compressor = identity_compressor(1);
  Eigen::MatrixXd pool(3, 1);
  pool << 0.0, 1.0, 3.0;
  const LabeledDataset pool_data = make_dataset(pool, Eigen::VectorXi::Zero(3), 1);
  const RealismContext ctx = build_realism_context(embed(extractor, pool_data), 1, false);
  const Generator gen = [&pool](int, std::uint64_t seed) {
    return pool.row(static_cast<Eigen::Index>(seed % 3)).transpose().eval();
  };
  FilterPolicy policy;
  policy.kind = FilterPolicy::Kind::realism;
  policy.k = 1;
  const SyntheticDataset synth =
      filter_generate(gen, compressor, extractor, policy, {{0, 10}}, 404, ctx);
  c.expect(synth.data.size() == 10, "filtered quota not met");
  for (Eigen::Index i = 0; i < synth.scores.size(); ++i)
    c.expect(synth.scores[i] >= 1.0, fmt("stored score %.3f < 1", synth.scores[i]));

  // scale invariance of the score
  Rng rng(66);
  FeatureSet cloud;
  cloud.F.resize(25, 3);
  cloud.labels = Eigen::VectorXi::Zero(25);
  for (Eigen::Index i = 0; i < 25; ++i) cloud.F.row(i) = rng.normal_vector(3).transpose();
  const Eigen::VectorXd phi = rng.normal_vector(3);
  const Real base = realism_score(phi, build_manifold(cloud, 3));
  for (const double scale : {3.7, 0.013, 256.0}) {
    FeatureSet scaled = cloud;
    scaled.F *= scale;
    const Real score = realism_score((scale * phi).eval(), build_manifold(scaled, 3));
    c.expect(std::abs(score - base) / base < 1e-10,
             fmt("scale %.3f changes R by %.2e relative", scale, std::abs(score - base) / base));
  }
  return c;
}

// ------------------------------------------------------------ criteria 7 & 8

struct ToyExperiment {
  RunConfig cfg;
  ExperimentReport report;
  std::vector<fs::path> report_files;
};

RunConfig toy_experiment_config(const fs::path& base) {
  RunConfig cfg;
  cfg.train_csv = base / "train.csv";
  cfg.valid_csv = base / "valid.csv";
  cfg.test_csv = base / "test.csv";
  cfg.out_dir = base / "out";
  cfg.seed = 2718281828;
  cfg.schedule.T = 200;
  cfg.denoiser_cfg = default_denoiser_config();
  cfg.extractor_cfg = default_extractor_config();
  cfg.classifier_cfg = default_classifier_config();
  cfg.policies = {"none", "rs"};
  cfg.regimes = {"baseline", "synthetic_aug", "transfer"};
  cfg.n_subsets = 5;
  cfg.subset_fraction = 0.2;
  return cfg;
}

Checker criterion7_toy_experiment(ToyExperiment& toy) {
  Checker c;
  const fs::path base = fs::current_path() / "acceptance_out";
  fs::remove_all(base);
  fs::create_directories(base);
  save_dataset(gaussian_mixture(2000, 101), base / "train.csv");
  save_dataset(gaussian_mixture(500, 102), base / "valid.csv");
  save_dataset(gaussian_mixture(500, 103), base / "test.csv");

  toy.cfg = toy_experiment_config(base);
  toy.report = run_experiment(toy.cfg);
  toy.report_files = {fs::path(toy.cfg.out_dir) / "report.json",
                      fs::path(toy.cfg.out_dir) / "quality_cells.csv",
                      fs::path(toy.cfg.out_dir) / "classifier_cells.csv",
                      fs::path(toy.cfg.out_dir) / "summary.txt"};
  for (int s = 0; s < toy.cfg.n_subsets; ++s)
    for (const auto& policy : toy.cfg.policies)
      toy.report_files.push_back(fs::path(toy.cfg.out_dir) / ("subset_" + std::to_string(s)) /
                                 policy / "synthetic.csv");

  for (const auto& cell : toy.report.quality_cells)
    c.expect(cell.status == "ok", fmt("quality cell s=%d %s failed: %s", cell.subset,
                                      cell.policy.c_str(), cell.status.c_str()));
  for (const auto& cell : toy.report.classifier_cells)
    c.expect(cell.status == "ok", fmt("classifier cell s=%d %s/%s failed: %s", cell.subset,
                                      cell.policy.c_str(), cell.regime.c_str(),
                                      cell.status.c_str()));
  if (!c.ok) return c;

  // (a) generated samples sit far closer to the real features than noise does
  double fid_gen_sum = 0, fid_noise_sum = 0;
  double cond_acc_sum = 0;
  for (int s = 0; s < toy.cfg.n_subsets; ++s) {
    const fs::path sdir = fs::path(toy.cfg.out_dir) / ("subset_" + std::to_string(s));
    const FeatureExtractor extractor = load_classifier(sdir / "extractor.json");
    const LabeledDataset real = load_dataset(sdir / "real_train.csv");
    const FeatureSet real_features = embed(extractor, real);

    Rng noise_rng(derive_seed(987654321, static_cast<std::uint64_t>(s)));
    Eigen::MatrixXd noise(real.size(), 2);
    for (Eigen::Index i = 0; i < noise.rows(); ++i)
      noise.row(i) = noise_rng.normal_vector(2).transpose();
    const FeatureSet noise_features =
        embed(extractor, make_dataset(noise, Eigen::VectorXi::Zero(noise.rows()), 1));
    fid_noise_sum += fid(gaussian_stats(real_features), gaussian_stats(noise_features));

    // (c) conditional samples classify back to their conditioning label
    const LabeledDataset synth = load_dataset(sdir / "none" / "synthetic.csv");
    long correct = 0;
    for (Eigen::Index i = 0; i < synth.size(); ++i)
      if (extractor.predict(synth.X.row(i).transpose()) == synth.labels[i]) ++correct;
    cond_acc_sum += static_cast<double>(correct) / static_cast<double>(synth.size());
  }
  for (const auto& cell : toy.report.quality_cells)
    if (cell.policy == "none") fid_gen_sum += cell.quality.fid;
  const double fid_gen = fid_gen_sum / toy.cfg.n_subsets;
  const double fid_noise = fid_noise_sum / toy.cfg.n_subsets;
  c.expect(fid_gen < fid_noise,
           fmt("(a) mean FID(gen) %.4f not below mean FID(noise) %.4f", fid_gen, fid_noise));

  // (b) realism filtering does not lower improved precision
  const double p_none =
      toy.report.quality_aggregates.at("none/all").at("improved_precision").mean;
  const double p_rs = toy.report.quality_aggregates.at("rs/all").at("improved_precision").mean;
  c.expect(p_rs >= p_none, fmt("(b) precision rs %.4f < none %.4f", p_rs, p_none));

  // (c)
  const double cond_acc = cond_acc_sum / toy.cfg.n_subsets;
  c.expect(cond_acc >= 0.80, fmt("(c) conditional accuracy %.4f < 0.80", cond_acc));

  // (d) synthetic expansion does not hurt downstream AUC
  for (const auto& policy : toy.cfg.policies) {
    const double base_auc = toy.report.classifier_aggregates.at(policy + "/baseline").at("auc").mean;
    const double aug_auc =
        toy.report.classifier_aggregates.at(policy + "/synthetic_aug").at("auc").mean;
    const double transfer_auc =
        toy.report.classifier_aggregates.at(policy + "/transfer").at("auc").mean;
    c.expect(aug_auc >= base_auc - 0.02,
             fmt("(d) %s synthetic_aug auc %.4f vs baseline %.4f", policy.c_str(), aug_auc,
                 base_auc));
    c.expect(transfer_auc >= base_auc - 0.02,
             fmt("(d) %s transfer auc %.4f vs baseline %.4f", policy.c_str(), transfer_auc,
                 base_auc));
  }
  return c;
}

Checker criterion8_determinism(const ToyExperiment& toy) {
  Checker c;
  if (toy.report_files.empty()) {
    c.expect(false, "criterion 7 did not run");
    return c;
  }
  std::vector<std::string> before;
  before.reserve(toy.report_files.size());
  for (const auto& path : toy.report_files) before.push_back(slurp(path));

  run_experiment(toy.cfg);
  for (std::size_t i = 0; i < toy.report_files.size(); ++i)
    c.expect(slurp(toy.report_files[i]) == before[i],
             "byte mismatch in " + toy.report_files[i].string());
  return c;
}

}  // namespace

int main() {
  struct Entry {
    int id;
    const char* name;
    double time_limit;  // seconds; 0 = no stated limit
    std::function<Checker()> run;
  };

  ToyExperiment toy;
  const std::vector<Entry> entries = {
      {1, "cosine schedule suite (T=200, s=0.008)", 1.0, criterion1_schedule},
      {2, "forward-process statistics (3 timesteps x 1e5 draws)", 10.0, criterion2_forward_stats},
      {3, "analytic gradient vs central finite differences", 30.0, criterion3_gradient},
      {4, "degenerate-dataset sampling (5 seeds)", 300.0, criterion4_degenerate},
      {5, "metric oracles (k-NN, AUC, FID, improved F1)", 30.0, criterion5_metric_oracles},
      {6, "realism scoring and filtering", 5.0, criterion6_realism},
      {7, "end-to-end toy experiment (5 subsets at 20%)", 1200.0,
       [&toy] { return criterion7_toy_experiment(toy); }},
      {8, "byte-identical experiment rerun", 0.0, [&toy] { return criterion8_determinism(toy); }},
  };

  int failures = 0;
  for (const auto& entry : entries) {
    const auto t0 = std::chrono::steady_clock::now();
    Checker result;
    try {
      result = entry.run();
    } catch (const std::exception& e) {
      result.ok = false;
      result.first_failure = std::string("exception: ") + e.what();
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (entry.time_limit > 0 && seconds > entry.time_limit && result.ok) {
      result.ok = false;
      result.first_failure = fmt("runtime %.1f s exceeds %.0f s", seconds, entry.time_limit);
    }
    if (result.ok) {
      std::printf("[PASS] criterion %d: %s (%.1f s)\n", entry.id, entry.name, seconds);
    } else {
      std::printf("[FAIL] criterion %d: %s (%.1f s): %s\n", entry.id, entry.name, seconds,
                  result.first_failure.c_str());
      ++failures;
    }
    std::fflush(stdout);
  }
  if (failures > 0) std::printf("%d criterion(s) failed\n", failures);
  return failures == 0 ? 0 : 1;
}
