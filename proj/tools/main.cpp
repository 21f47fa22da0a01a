// synthkit command-line front end: trains the generative stack, samples and
// filters synthetic data, scores quality, and runs the downstream experiment
// matrix from a single JSON config.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "synthkit/experiment.hpp"

namespace {

using namespace synthkit;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitMaxAttempts = 4;
constexpr int kExitNumerical = 5;

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
};

void add_common_flags(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "run configuration file (JSON)")
      ->required();
  cmd->add_option("--seed", flags.seed, "override the config master seed");
  cmd->add_option("--out", flags.out_dir, "override the config output directory");
}

RunConfig load_config(const CommonFlags& flags) {
  RunConfig cfg = load_run_config(flags.config_path);
  if (flags.seed) cfg.seed = *flags.seed;
  if (flags.out_dir) cfg.out_dir = *flags.out_dir;
  return cfg;
}

std::map<int, long> parse_quota(const std::string& text, int n_classes) {
  std::map<int, long> quota;
  if (text.find(':') == std::string::npos) {
    const long per_class = std::stol(text);
    for (int c = 0; c < n_classes; ++c) quota[c] = per_class;
    return quota;
  }
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t comma = text.find(',', pos);
    const std::string item = text.substr(pos, comma == std::string::npos ? std::string::npos
                                                                         : comma - pos);
    const std::size_t colon = item.find(':');
    if (colon == std::string::npos)
      throw ConfigError("quota item '" + item + "' must look like label:count");
    quota[std::stoi(item.substr(0, colon))] = std::stol(item.substr(colon + 1));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return quota;
}

void write_loss_trace(const std::vector<Real>& loss, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << "epoch,loss\n";
  for (std::size_t e = 0; e < loss.size(); ++e) out << e << ',' << format_real(loss[e]) << "\n";
}

int cmd_train_ddpm(const CommonFlags& flags) {
  const RunConfig cfg = load_config(flags);
  std::filesystem::create_directories(cfg.out_dir);
  const LabeledDataset train = load_dataset(cfg.train_csv);

  const Compressor compressor = cfg.latent.kind == Compressor::Kind::identity
                                    ? identity_compressor(static_cast<int>(train.dim()))
                                    : fit_linear_compressor(train, cfg.latent.latent_dim);
  save_compressor(compressor, cfg.out_dir + "/compressor.json");
  const LabeledDataset encoded = cfg.latent.kind == Compressor::Kind::identity
                                     ? train
                                     : encode_dataset(compressor, train);

  TrainConfig den_cfg = cfg.denoiser_cfg;
  den_cfg.schedule = cfg.schedule;
  den_cfg.seed = cfg.seed;
  const DenoiserTrainResult result = train_denoiser(encoded, den_cfg);
  save_denoiser(result.model, cfg.schedule, cfg.seed, cfg.out_dir + "/denoiser.json");
  write_loss_trace(result.epoch_loss, cfg.out_dir + "/ddpm_loss.csv");
  std::cout << "trained denoiser on " << encoded.size() << " samples ("
            << result.epoch_loss.size() << " epochs, final loss "
            << format_real(result.epoch_loss.back()) << ")\n"
            << "wrote " << cfg.out_dir << "/denoiser.json\n";
  return kExitOk;
}

int cmd_train_extractor(const CommonFlags& flags) {
  const RunConfig cfg = load_config(flags);
  std::filesystem::create_directories(cfg.out_dir);
  const LabeledDataset train = load_dataset(cfg.train_csv);
  TrainConfig ext_cfg = cfg.extractor_cfg;
  ext_cfg.seed = cfg.seed;
  const ClassifierTrainResult result = train_mlp_classifier(train, ext_cfg);
  save_classifier(result.model, cfg.seed, cfg.out_dir + "/extractor.json");
  write_loss_trace(result.epoch_loss, cfg.out_dir + "/extractor_loss.csv");
  std::cout << "trained extractor on " << train.size() << " samples (final loss "
            << format_real(result.epoch_loss.back()) << ")\n"
            << "wrote " << cfg.out_dir << "/extractor.json\n";
  return kExitOk;
}

int cmd_sample(const CommonFlags& flags, const std::string& model_path,
               const std::string& extractor_path, const std::string& compressor_path,
               const std::string& policy_name, const std::string& quota_text) {
  const RunConfig cfg = load_config(flags);
  std::filesystem::create_directories(cfg.out_dir);

  const std::string model_file = model_path.empty() ? cfg.out_dir + "/denoiser.json" : model_path;
  const std::string extractor_file =
      extractor_path.empty() ? cfg.out_dir + "/extractor.json" : extractor_path;
  const std::string compressor_file =
      compressor_path.empty() ? cfg.out_dir + "/compressor.json" : compressor_path;

  const LoadedDenoiser den = load_denoiser(model_file);
  const FeatureExtractor extractor = load_classifier(extractor_file);
  const Compressor compressor = load_compressor(compressor_file);
  const NoiseSchedule sched = build_schedule(den.schedule);

  const LabeledDataset real = load_dataset(cfg.train_csv);
  const FeatureSet real_features = embed(extractor, real);

  FilterPolicy policy;
  policy.kind = policy_from_name(policy_name);
  policy.k = cfg.k;
  policy.epsilon = cfg.filter_epsilon;
  policy.max_attempts_factor = cfg.max_attempts_factor;
  policy.prune_fraction = cfg.filter_prune_fraction;
  const RealismContext ctx = build_realism_context(
      real_features, cfg.k, policy.kind == FilterPolicy::Kind::class_realism);

  std::map<int, long> quota;
  if (!quota_text.empty()) {
    quota = parse_quota(quota_text, den.model.dims().n_classes);
  } else if (cfg.quota_rule == RunConfig::QuotaRule::fixed) {
    quota = cfg.quota_counts;
  } else {
    const auto counts = real.class_counts();
    for (int c = 0; c < real.n_classes; ++c) quota[c] = counts[static_cast<std::size_t>(c)];
  }

  const Generator generator = [&den, &sched](int label, std::uint64_t seed) {
    return sample(den.model, label, sched, seed, 1).row(0).transpose().eval();
  };
  const SyntheticDataset synth =
      filter_generate(generator, compressor, extractor, policy, quota, cfg.seed, ctx);

  save_dataset(synth.data, cfg.out_dir + "/synthetic.csv");
  std::ofstream scores(cfg.out_dir + "/synthetic_scores.csv");
  if (!scores) throw DataError("cannot write synthetic_scores.csv");
  scores << "index,score,attempts\n";
  for (Eigen::Index i = 0; i < synth.scores.size(); ++i)
    scores << i << ',' << format_real(synth.scores[i]) << ',' << synth.attempts[i] << "\n";
  std::cout << "generated " << synth.data.size() << " samples under policy '" << policy_name
            << "'\nwrote " << cfg.out_dir << "/synthetic.csv\n";
  return kExitOk;
}

int cmd_eval_quality(const CommonFlags& flags, const std::string& real_path,
                     const std::string& synth_path, const std::string& extractor_path) {
  const RunConfig cfg = load_config(flags);
  std::filesystem::create_directories(cfg.out_dir);
  const std::string extractor_file =
      extractor_path.empty() ? cfg.out_dir + "/extractor.json" : extractor_path;
  const FeatureExtractor extractor = load_classifier(extractor_file);

  const LabeledDataset real = load_dataset(real_path.empty() ? cfg.train_csv : real_path);
  const LabeledDataset synth = load_dataset(synth_path);
  const QualityReport q = evaluate_quality(embed(extractor, real), embed(extractor, synth), cfg.k);

  nlohmann::json j;
  j["fid"] = q.fid;
  j["improved_precision"] = q.improved_precision;
  j["improved_recall"] = q.improved_recall;
  j["improved_f1"] = q.improved_f1;
  j["k"] = cfg.k;
  detail::write_json_file(j, cfg.out_dir + "/quality.json");
  std::cout << "fid                " << format_real(q.fid) << "\n"
            << "improved_precision " << format_real(q.improved_precision) << "\n"
            << "improved_recall    " << format_real(q.improved_recall) << "\n"
            << "improved_f1        " << format_real(q.improved_f1) << "\n"
            << "wrote " << cfg.out_dir << "/quality.json\n";
  return kExitOk;
}

int cmd_run_downstream(const CommonFlags& flags, const std::string& regime_name,
                       const std::string& synth_path, bool allow_unequal) {
  const RunConfig cfg = load_config(flags);
  std::filesystem::create_directories(cfg.out_dir);
  const LabeledDataset train = load_dataset(cfg.train_csv);
  const LabeledDataset valid = load_dataset(cfg.valid_csv);
  const LabeledDataset test = load_dataset(cfg.test_csv);

  Regime regime;
  regime.kind = regime_from_name(regime_name);
  regime.aug_noise_scale = cfg.traditional_aug_scale;
  regime.require_equal_counts = !allow_unequal;

  SyntheticDataset synth;
  const bool needs_synth =
      regime.kind == RegimeKind::synthetic_aug || regime.kind == RegimeKind::transfer;
  if (needs_synth) {
    if (synth_path.empty())
      throw ConfigError("regime '" + regime_name + "' requires --synth <csv>");
    synth.data = load_dataset(synth_path);
    synth.scores = Eigen::VectorXd::Zero(synth.data.size());
    synth.attempts = Eigen::VectorXi::Zero(synth.data.size());
  }

  TrainConfig clf_cfg = cfg.classifier_cfg;
  clf_cfg.seed = cfg.seed;
  const ClassifierMetrics m =
      run_regime(regime, train, needs_synth ? &synth : nullptr, valid, test, clf_cfg);

  nlohmann::json j;
  j["regime"] = regime_name;
  j["accuracy"] = m.accuracy;
  j["auc"] = m.auc;
  j["sensitivity"] = m.sensitivity;
  j["specificity"] = m.specificity;
  detail::write_json_file(j, cfg.out_dir + "/downstream.json");
  std::cout << "regime      " << regime_name << "\n"
            << "accuracy    " << format_real(m.accuracy) << "\n"
            << "auc         " << format_real(m.auc) << "\n"
            << "sensitivity " << format_real(m.sensitivity) << "\n"
            << "specificity " << format_real(m.specificity) << "\n"
            << "wrote " << cfg.out_dir << "/downstream.json\n";
  return kExitOk;
}

int cmd_experiment(const CommonFlags& flags) {
  const RunConfig cfg = load_config(flags);
  const ExperimentReport report = run_experiment(cfg);
  long quality_errors = 0, classifier_errors = 0;
  for (const auto& cell : report.quality_cells)
    if (cell.status != "ok") ++quality_errors;
  for (const auto& cell : report.classifier_cells)
    if (cell.status != "ok") ++classifier_errors;
  std::cout << "experiment complete: " << report.quality_cells.size() << " quality cells ("
            << quality_errors << " failed), " << report.classifier_cells.size()
            << " classifier cells (" << classifier_errors << " failed)\n"
            << "report written to " << cfg.out_dir << "/report.json\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "synthkit: class-conditional diffusion on labeled vector data with realism-score "
      "filtering, generative quality metrics, and downstream classifier evaluation"};
  app.require_subcommand(1);

  CommonFlags train_ddpm_flags, train_ext_flags, sample_flags, quality_flags, downstream_flags,
      experiment_flags;

  auto* train_ddpm = app.add_subcommand("train-ddpm", "train compressor + denoiser");
  add_common_flags(train_ddpm, train_ddpm_flags);

  auto* train_ext = app.add_subcommand("train-extractor", "train the feature extractor");
  add_common_flags(train_ext, train_ext_flags);

  std::string model_path, extractor_path, compressor_path, policy_name = "none", quota_text;
  auto* sample_cmd =
      app.add_subcommand("sample", "generate a filtered synthetic dataset with a score sidecar");
  add_common_flags(sample_cmd, sample_flags);
  sample_cmd->add_option("--model", model_path, "denoiser file (default <out>/denoiser.json)");
  sample_cmd->add_option("--extractor", extractor_path,
                         "extractor file (default <out>/extractor.json)");
  sample_cmd->add_option("--compressor", compressor_path,
                         "compressor file (default <out>/compressor.json)");
  sample_cmd->add_option("--policy", policy_name, "selection policy: none | rs | class-rs");
  sample_cmd->add_option("--quota", quota_text,
                         "per-class counts, e.g. '200' or '0:100,1:150' (default: match real)");

  std::string real_path, synth_path, quality_extractor_path;
  auto* quality_cmd = app.add_subcommand("eval-quality", "FID and improved precision/recall/F1");
  add_common_flags(quality_cmd, quality_flags);
  quality_cmd->add_option("--real", real_path, "real CSV (default: config train path)");
  quality_cmd->add_option("--synth", synth_path, "synthetic CSV")->required();
  quality_cmd->add_option("--extractor", quality_extractor_path,
                          "extractor file (default <out>/extractor.json)");

  std::string regime_name, downstream_synth_path;
  bool allow_unequal = false;
  auto* downstream_cmd =
      app.add_subcommand("run-downstream", "train and evaluate one classifier regime");
  add_common_flags(downstream_cmd, downstream_flags);
  downstream_cmd
      ->add_option("--regime", regime_name,
                   "baseline | traditional_aug | synthetic_aug | transfer")
      ->required();
  downstream_cmd->add_option("--synth", downstream_synth_path,
                             "synthetic CSV (synthetic_aug and transfer)");
  downstream_cmd->add_flag("--allow-unequal", allow_unequal,
                           "skip the synthetic-size == real-size check");

  auto* experiment_cmd =
      app.add_subcommand("experiment", "run the subsets x policies x regimes matrix");
  add_common_flags(experiment_cmd, experiment_flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (train_ddpm->parsed()) return cmd_train_ddpm(train_ddpm_flags);
    if (train_ext->parsed()) return cmd_train_extractor(train_ext_flags);
    if (sample_cmd->parsed())
      return cmd_sample(sample_flags, model_path, extractor_path, compressor_path, policy_name,
                        quota_text);
    if (quality_cmd->parsed())
      return cmd_eval_quality(quality_flags, real_path, synth_path, quality_extractor_path);
    if (downstream_cmd->parsed())
      return cmd_run_downstream(downstream_flags, regime_name, downstream_synth_path,
                                allow_unequal);
    if (experiment_cmd->parsed()) return cmd_experiment(experiment_flags);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const MaxAttemptsExceeded& e) {
    std::cerr << "filter failure: " << e.what() << "\n";
    return kExitMaxAttempts;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitConfig;
}
