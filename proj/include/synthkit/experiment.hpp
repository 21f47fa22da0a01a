#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "synthkit/common.hpp"
#include "synthkit/dataset.hpp"
#include "synthkit/diffusion.hpp"
#include "synthkit/downstream.hpp"
#include "synthkit/features.hpp"
#include "synthkit/latent.hpp"
#include "synthkit/metrics.hpp"
#include "synthkit/persist.hpp"
#include "synthkit/selection.hpp"

namespace synthkit {

struct LatentConfig {
  Compressor::Kind kind = Compressor::Kind::identity;
  int latent_dim = 0;  // linear kind only
};

/// One structured config file drives one experiment; the master seed fully
/// determines every stochastic choice downstream of it.
struct RunConfig {
  std::string train_csv;
  std::string valid_csv;
  std::string test_csv;
  std::string out_dir = "out";
  std::uint64_t seed = 0;

  ScheduleConfig schedule;
  LatentConfig latent;
  TrainConfig denoiser_cfg;
  TrainConfig extractor_cfg;
  TrainConfig classifier_cfg;

  int k = 3;
  Real filter_epsilon = 1e-12;
  int max_attempts_factor = 50;
  Real filter_prune_fraction = 0.0;
  Real traditional_aug_scale = 0.05;
  bool per_class_quality = false;

  enum class QuotaRule { match_real, fixed };
  QuotaRule quota_rule = QuotaRule::match_real;
  std::map<int, long> quota_counts;  // fixed rule only

  std::vector<std::string> policies{"none", "rs", "class-rs"};
  std::vector<std::string> regimes{"baseline", "traditional_aug", "synthetic_aug", "transfer"};
  int n_subsets = 5;
  Real subset_fraction = 0.1;
};

inline FilterPolicy::Kind policy_from_name(const std::string& name) {
  if (name == "none") return FilterPolicy::Kind::none;
  if (name == "rs") return FilterPolicy::Kind::realism;
  if (name == "class-rs") return FilterPolicy::Kind::class_realism;
  throw ConfigError("unknown policy '" + name + "' (expected none | rs | class-rs)");
}

inline RegimeKind regime_from_name(const std::string& name) {
  if (name == "baseline") return RegimeKind::baseline;
  if (name == "traditional_aug") return RegimeKind::traditional_aug;
  if (name == "synthetic_aug") return RegimeKind::synthetic_aug;
  if (name == "transfer") return RegimeKind::transfer;
  throw ConfigError("unknown regime '" + name + "'");
}

namespace detail {

inline TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig defaults) {
  if (j.contains("epochs")) defaults.epochs = j.at("epochs").get<int>();
  if (j.contains("batch_size")) defaults.batch_size = j.at("batch_size").get<int>();
  if (j.contains("learning_rate")) defaults.learning_rate = j.at("learning_rate").get<Real>();
  if (j.contains("momentum")) defaults.momentum = j.at("momentum").get<Real>();
  if (j.contains("lr_floor")) defaults.lr_floor = j.at("lr_floor").get<Real>();
  if (j.contains("hidden")) defaults.hidden = j.at("hidden").get<std::vector<int>>();
  if (j.contains("embedding_dim")) defaults.embedding_dim = j.at("embedding_dim").get<int>();
  return defaults;
}

inline nlohmann::json train_config_to_json(const TrainConfig& cfg, bool with_embedding) {
  nlohmann::json j;
  j["epochs"] = cfg.epochs;
  j["batch_size"] = cfg.batch_size;
  j["learning_rate"] = cfg.learning_rate;
  j["momentum"] = cfg.momentum;
  j["lr_floor"] = cfg.lr_floor;
  j["hidden"] = cfg.hidden;
  if (with_embedding) j["embedding_dim"] = cfg.embedding_dim;
  return j;
}

}  // namespace detail

inline TrainConfig default_denoiser_config() {
  TrainConfig cfg;
  cfg.epochs = 800;
  cfg.batch_size = 64;
  cfg.learning_rate = 0.01;
  cfg.lr_floor = 0.05;  // constant-rate denoiser training is unstable late in the run
  cfg.momentum = 0.9;
  cfg.hidden = {128, 128};
  return cfg;
}

inline TrainConfig default_extractor_config() {
  TrainConfig cfg;
  cfg.epochs = 150;
  cfg.batch_size = 32;
  cfg.learning_rate = 0.05;
  cfg.momentum = 0.9;
  cfg.hidden = {64};
  return cfg;
}

inline TrainConfig default_classifier_config() {
  TrainConfig cfg = default_extractor_config();
  cfg.epochs = 100;
  return cfg;
}

inline RunConfig parse_run_config(const nlohmann::json& j) {
  static const std::vector<std::string> known{
      "paths",        "seed",     "schedule",          "latent",
      "denoiser",     "extractor", "classifier",       "metrics",
      "filter",       "quota",    "policies",          "regimes",
      "n_subsets",    "subset_fraction", "traditional_aug_scale", "per_class_quality"};
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw ConfigError("unknown config key '" + key + "'");
  }

  RunConfig cfg;
  cfg.denoiser_cfg = default_denoiser_config();
  cfg.extractor_cfg = default_extractor_config();
  cfg.classifier_cfg = default_classifier_config();

  try {
    if (j.contains("paths")) {
      const auto& p = j.at("paths");
      if (p.contains("train")) cfg.train_csv = p.at("train").get<std::string>();
      if (p.contains("valid")) cfg.valid_csv = p.at("valid").get<std::string>();
      if (p.contains("test")) cfg.test_csv = p.at("test").get<std::string>();
      if (p.contains("out")) cfg.out_dir = p.at("out").get<std::string>();
    }
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("schedule")) cfg.schedule = detail::schedule_from_json(j.at("schedule"));
    if (j.contains("latent")) {
      const auto& l = j.at("latent");
      const std::string kind = l.value("kind", "identity");
      if (kind == "identity") {
        cfg.latent.kind = Compressor::Kind::identity;
      } else if (kind == "linear") {
        cfg.latent.kind = Compressor::Kind::linear;
        cfg.latent.latent_dim = l.at("latent_dim").get<int>();
      } else {
        throw ConfigError("unknown latent kind '" + kind + "'");
      }
    }
    if (j.contains("denoiser"))
      cfg.denoiser_cfg = detail::train_config_from_json(j.at("denoiser"), cfg.denoiser_cfg);
    if (j.contains("extractor"))
      cfg.extractor_cfg = detail::train_config_from_json(j.at("extractor"), cfg.extractor_cfg);
    if (j.contains("classifier"))
      cfg.classifier_cfg = detail::train_config_from_json(j.at("classifier"), cfg.classifier_cfg);
    if (j.contains("metrics")) cfg.k = j.at("metrics").value("k", 3);
    if (j.contains("filter")) {
      const auto& f = j.at("filter");
      cfg.filter_epsilon = f.value("epsilon", 1e-12);
      cfg.max_attempts_factor = f.value("max_attempts_factor", 50);
      cfg.filter_prune_fraction = f.value("prune_fraction", 0.0);
    }
    if (j.contains("quota")) {
      const auto& q = j.at("quota");
      const std::string rule = q.value("rule", "match-real");
      if (rule == "match-real") {
        cfg.quota_rule = RunConfig::QuotaRule::match_real;
      } else if (rule == "fixed") {
        cfg.quota_rule = RunConfig::QuotaRule::fixed;
        for (const auto& [label, count] : q.at("counts").items())
          cfg.quota_counts[std::stoi(label)] = count.get<long>();
      } else {
        throw ConfigError("unknown quota rule '" + rule + "'");
      }
    }
    if (j.contains("policies")) cfg.policies = j.at("policies").get<std::vector<std::string>>();
    if (j.contains("regimes")) cfg.regimes = j.at("regimes").get<std::vector<std::string>>();
    if (j.contains("n_subsets")) cfg.n_subsets = j.at("n_subsets").get<int>();
    if (j.contains("subset_fraction")) cfg.subset_fraction = j.at("subset_fraction").get<Real>();
    if (j.contains("traditional_aug_scale"))
      cfg.traditional_aug_scale = j.at("traditional_aug_scale").get<Real>();
    if (j.contains("per_class_quality"))
      cfg.per_class_quality = j.at("per_class_quality").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }

  for (const auto& name : cfg.policies) policy_from_name(name);
  for (const auto& name : cfg.regimes) regime_from_name(name);
  if (cfg.k < 1) throw ConfigError("metrics.k must be >= 1");
  if (cfg.n_subsets < 1) throw ConfigError("n_subsets must be >= 1");
  if (!(cfg.subset_fraction > 0 && cfg.subset_fraction <= 1))
    throw ConfigError("subset_fraction must lie in (0, 1]");
  return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": invalid JSON: " + e.what());
  }
  return parse_run_config(j);
}

inline nlohmann::json run_config_to_json(const RunConfig& cfg) {
  nlohmann::json j;
  j["paths"] = {{"train", cfg.train_csv},
                {"valid", cfg.valid_csv},
                {"test", cfg.test_csv},
                {"out", cfg.out_dir}};
  j["seed"] = cfg.seed;
  j["schedule"] = detail::schedule_to_json(cfg.schedule);
  j["latent"]["kind"] = cfg.latent.kind == Compressor::Kind::identity ? "identity" : "linear";
  if (cfg.latent.kind == Compressor::Kind::linear)
    j["latent"]["latent_dim"] = cfg.latent.latent_dim;
  j["denoiser"] = detail::train_config_to_json(cfg.denoiser_cfg, true);
  j["extractor"] = detail::train_config_to_json(cfg.extractor_cfg, false);
  j["classifier"] = detail::train_config_to_json(cfg.classifier_cfg, false);
  j["metrics"]["k"] = cfg.k;
  j["filter"] = {{"epsilon", cfg.filter_epsilon},
                 {"max_attempts_factor", cfg.max_attempts_factor},
                 {"prune_fraction", cfg.filter_prune_fraction}};
  if (cfg.quota_rule == RunConfig::QuotaRule::match_real) {
    j["quota"]["rule"] = "match-real";
  } else {
    j["quota"]["rule"] = "fixed";
    nlohmann::json counts;
    for (const auto& [label, count] : cfg.quota_counts) counts[std::to_string(label)] = count;
    j["quota"]["counts"] = counts;
  }
  j["policies"] = cfg.policies;
  j["regimes"] = cfg.regimes;
  j["n_subsets"] = cfg.n_subsets;
  j["subset_fraction"] = cfg.subset_fraction;
  j["traditional_aug_scale"] = cfg.traditional_aug_scale;
  j["per_class_quality"] = cfg.per_class_quality;
  return j;
}

/// Hash of the canonical config serialization; stamped on every report row.
inline std::uint64_t config_hash(const RunConfig& cfg) {
  return fnv1a64(run_config_to_json(cfg).dump());
}

struct QualityCell {
  int subset = 0;
  std::string policy;
  std::string scope = "all";  // "all" or "class-<c>"
  QualityReport quality;
  std::uint64_t seed = 0;
  std::string status = "ok";
};

struct ClassifierCell {
  int subset = 0;
  std::string policy;
  std::string regime;
  ClassifierMetrics metrics;
  std::uint64_t seed = 0;
  std::string status = "ok";
};

struct Aggregate {
  Real mean = 0;
  Real stddev = 0;  // sample standard deviation (n-1); 0 for a single value
  long count = 0;
};

inline Aggregate aggregate_values(const std::vector<Real>& values) {
  Aggregate a;
  a.count = static_cast<long>(values.size());
  if (a.count == 0) return a;
  Real sum = 0;
  for (Real v : values) sum += v;
  a.mean = sum / static_cast<Real>(a.count);
  if (a.count > 1) {
    Real sq = 0;
    for (Real v : values) sq += (v - a.mean) * (v - a.mean);
    a.stddev = std::sqrt(sq / static_cast<Real>(a.count - 1));
  }
  return a;
}

struct ExperimentReport {
  std::uint64_t master_seed = 0;
  std::uint64_t hash = 0;
  std::vector<QualityCell> quality_cells;
  std::vector<ClassifierCell> classifier_cells;
  // key: policy "/" scope -> metric name -> aggregate over subsets
  std::map<std::string, std::map<std::string, Aggregate>> quality_aggregates;
  // key: policy "/" regime -> metric name -> aggregate over subsets
  std::map<std::string, std::map<std::string, Aggregate>> classifier_aggregates;
};

namespace detail {

inline std::string sanitize_status(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  return s;
}

inline void compute_aggregates(ExperimentReport& report) {
  std::map<std::string, std::map<std::string, std::vector<Real>>> q, c;
  for (const auto& cell : report.quality_cells) {
    if (cell.status != "ok") continue;
    auto& slot = q[cell.policy + "/" + cell.scope];
    slot["fid"].push_back(cell.quality.fid);
    slot["improved_precision"].push_back(cell.quality.improved_precision);
    slot["improved_recall"].push_back(cell.quality.improved_recall);
    slot["improved_f1"].push_back(cell.quality.improved_f1);
  }
  for (const auto& cell : report.classifier_cells) {
    if (cell.status != "ok") continue;
    auto& slot = c[cell.policy + "/" + cell.regime];
    slot["accuracy"].push_back(cell.metrics.accuracy);
    slot["auc"].push_back(cell.metrics.auc);
    slot["sensitivity"].push_back(cell.metrics.sensitivity);
    slot["specificity"].push_back(cell.metrics.specificity);
  }
  for (const auto& [key, metrics] : q)
    for (const auto& [name, values] : metrics)
      report.quality_aggregates[key][name] = aggregate_values(values);
  for (const auto& [key, metrics] : c)
    for (const auto& [name, values] : metrics)
      report.classifier_aggregates[key][name] = aggregate_values(values);
}

}  // namespace detail

/// Writes the raw-cell CSVs, the machine-readable report, and a text summary
/// mirroring the quality/downstream table layout. Deterministic bytes for a
/// given report.
inline void write_experiment_report(const ExperimentReport& report, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const std::string hash_hex = to_hex(report.hash);

  {
    std::ofstream out(out_dir + "/quality_cells.csv");
    if (!out) throw DataError("cannot write quality_cells.csv");
    out << "subset,policy,scope,fid,improved_precision,improved_recall,improved_f1,seed,"
           "config_hash,status\n";
    for (const auto& cell : report.quality_cells) {
      out << cell.subset << ',' << cell.policy << ',' << cell.scope << ',';
      if (cell.status == "ok")
        out << format_real(cell.quality.fid) << ',' << format_real(cell.quality.improved_precision)
            << ',' << format_real(cell.quality.improved_recall) << ','
            << format_real(cell.quality.improved_f1) << ',';
      else
        out << ",,,,";
      out << cell.seed << ',' << hash_hex << ',' << detail::sanitize_status(cell.status) << "\n";
    }
  }
  {
    std::ofstream out(out_dir + "/classifier_cells.csv");
    if (!out) throw DataError("cannot write classifier_cells.csv");
    out << "subset,policy,regime,accuracy,auc,sensitivity,specificity,seed,config_hash,status\n";
    for (const auto& cell : report.classifier_cells) {
      out << cell.subset << ',' << cell.policy << ',' << cell.regime << ',';
      if (cell.status == "ok")
        out << format_real(cell.metrics.accuracy) << ',' << format_real(cell.metrics.auc) << ','
            << format_real(cell.metrics.sensitivity) << ','
            << format_real(cell.metrics.specificity) << ',';
      else
        out << ",,,,";
      out << cell.seed << ',' << hash_hex << ',' << detail::sanitize_status(cell.status) << "\n";
    }
  }
  {
    nlohmann::json j;
    j["master_seed"] = report.master_seed;
    j["config_hash"] = hash_hex;
    nlohmann::json qcells = nlohmann::json::array();
    for (const auto& cell : report.quality_cells) {
      nlohmann::json c;
      c["subset"] = cell.subset;
      c["policy"] = cell.policy;
      c["scope"] = cell.scope;
      c["seed"] = cell.seed;
      c["status"] = cell.status;
      if (cell.status == "ok")
        c["quality"] = {{"fid", cell.quality.fid},
                        {"improved_precision", cell.quality.improved_precision},
                        {"improved_recall", cell.quality.improved_recall},
                        {"improved_f1", cell.quality.improved_f1}};
      qcells.push_back(c);
    }
    j["quality_cells"] = qcells;
    nlohmann::json ccells = nlohmann::json::array();
    for (const auto& cell : report.classifier_cells) {
      nlohmann::json c;
      c["subset"] = cell.subset;
      c["policy"] = cell.policy;
      c["regime"] = cell.regime;
      c["seed"] = cell.seed;
      c["status"] = cell.status;
      if (cell.status == "ok")
        c["metrics"] = {{"accuracy", cell.metrics.accuracy},
                        {"auc", cell.metrics.auc},
                        {"sensitivity", cell.metrics.sensitivity},
                        {"specificity", cell.metrics.specificity}};
      ccells.push_back(c);
    }
    j["classifier_cells"] = ccells;
    auto aggregates_to_json = [](const std::map<std::string, std::map<std::string, Aggregate>>& m) {
      nlohmann::json out;
      for (const auto& [key, metrics] : m)
        for (const auto& [name, agg] : metrics)
          out[key][name] = {{"mean", agg.mean}, {"std", agg.stddev}, {"count", agg.count}};
      return out;
    };
    j["quality_aggregates"] = aggregates_to_json(report.quality_aggregates);
    j["classifier_aggregates"] = aggregates_to_json(report.classifier_aggregates);
    detail::write_json_file(j, out_dir + "/report.json");
  }
  {
    std::ofstream out(out_dir + "/summary.txt");
    if (!out) throw DataError("cannot write summary.txt");
    char line[256];
    out << "experiment summary\n";
    out << "config hash " << hash_hex << ", master seed " << report.master_seed << "\n\n";
    out << "quality (mean +/- std over subsets)\n";
    std::snprintf(line, sizeof(line), "%-18s %-12s %-22s %-22s %-22s %-22s\n", "policy", "scope",
                  "fid", "improved_precision", "improved_recall", "improved_f1");
    out << line;
    for (const auto& [key, metrics] : report.quality_aggregates) {
      const auto slash = key.find('/');
      const std::string policy = key.substr(0, slash);
      const std::string scope = key.substr(slash + 1);
      std::snprintf(line, sizeof(line),
                    "%-18s %-12s %10.4f +/- %-8.4f %8.4f +/- %-8.4f %8.4f +/- %-8.4f %8.4f +/- "
                    "%-8.4f\n",
                    policy.c_str(), scope.c_str(), metrics.at("fid").mean,
                    metrics.at("fid").stddev, metrics.at("improved_precision").mean,
                    metrics.at("improved_precision").stddev, metrics.at("improved_recall").mean,
                    metrics.at("improved_recall").stddev, metrics.at("improved_f1").mean,
                    metrics.at("improved_f1").stddev);
      out << line;
    }
    out << "\ndownstream classification (mean +/- std over subsets)\n";
    std::snprintf(line, sizeof(line), "%-18s %-16s %-22s %-22s %-22s %-22s\n", "policy", "regime",
                  "accuracy", "auc", "sensitivity", "specificity");
    out << line;
    for (const auto& [key, metrics] : report.classifier_aggregates) {
      const auto slash = key.find('/');
      const std::string policy = key.substr(0, slash);
      const std::string regime = key.substr(slash + 1);
      std::snprintf(line, sizeof(line),
                    "%-18s %-16s %8.4f +/- %-8.4f %8.4f +/- %-8.4f %8.4f +/- %-8.4f %8.4f +/- "
                    "%-8.4f\n",
                    policy.c_str(), regime.c_str(), metrics.at("accuracy").mean,
                    metrics.at("accuracy").stddev, metrics.at("auc").mean,
                    metrics.at("auc").stddev, metrics.at("sensitivity").mean,
                    metrics.at("sensitivity").stddev, metrics.at("specificity").mean,
                    metrics.at("specificity").stddev);
      out << line;
    }
  }
}

/// Runs the full experiment matrix: per subset, trains the compressor (if
/// configured), denoiser, and feature extractor; per policy, generates a
/// quota-matched synthetic set and scores its quality; per regime, trains and
/// evaluates the downstream classifier. A failing stage marks its cell and
/// the run continues. Artifacts land under cfg.out_dir. The report is a pure
/// function of (input files, config).
inline ExperimentReport run_experiment(const RunConfig& cfg) {
  namespace fs = std::filesystem;
  const LabeledDataset train = load_dataset(cfg.train_csv);
  const LabeledDataset valid = load_dataset(cfg.valid_csv);
  const LabeledDataset test = load_dataset(cfg.test_csv);
  if (valid.dim() != train.dim() || test.dim() != train.dim())
    throw DataError("train/valid/test dimension mismatch");

  fs::create_directories(cfg.out_dir);
  detail::write_json_file(run_config_to_json(cfg), cfg.out_dir + "/config_resolved.json");

  ExperimentReport report;
  report.master_seed = cfg.seed;
  report.hash = config_hash(cfg);

  bool need_class_manifolds = cfg.per_class_quality;
  for (const auto& name : cfg.policies)
    if (policy_from_name(name) == FilterPolicy::Kind::class_realism) need_class_manifolds = true;

  const std::vector<LabeledDataset> subsets =
      split_subsets(train, cfg.n_subsets, cfg.subset_fraction, derive_seed(cfg.seed, fnv1a64("split")));

  for (int s = 0; s < cfg.n_subsets; ++s) {
    const LabeledDataset& subset = subsets[static_cast<std::size_t>(s)];
    const std::string subset_dir = cfg.out_dir + "/subset_" + std::to_string(s);
    fs::create_directories(subset_dir);
    save_dataset(subset, subset_dir + "/real_train.csv");

    // generative stack for this subset
    const Compressor compressor =
        cfg.latent.kind == Compressor::Kind::identity
            ? identity_compressor(static_cast<int>(subset.dim()))
            : fit_linear_compressor(subset, cfg.latent.latent_dim);
    save_compressor(compressor, subset_dir + "/compressor.json");
    const LabeledDataset encoded = cfg.latent.kind == Compressor::Kind::identity
                                       ? subset
                                       : encode_dataset(compressor, subset);

    TrainConfig den_cfg = cfg.denoiser_cfg;
    den_cfg.schedule = cfg.schedule;
    den_cfg.seed = derive_seed(cfg.seed, fnv1a64("ddpm"), static_cast<std::uint64_t>(s));
    const DenoiserTrainResult den = train_denoiser(encoded, den_cfg);
    save_denoiser(den.model, cfg.schedule, den_cfg.seed, subset_dir + "/denoiser.json");
    {
      std::ofstream out(subset_dir + "/ddpm_loss.csv");
      out << "epoch,loss\n";
      for (std::size_t e = 0; e < den.epoch_loss.size(); ++e)
        out << e << ',' << format_real(den.epoch_loss[e]) << "\n";
    }

    TrainConfig ext_cfg = cfg.extractor_cfg;
    ext_cfg.seed = derive_seed(cfg.seed, fnv1a64("extractor"), static_cast<std::uint64_t>(s));
    const FeatureExtractor extractor = train_feature_extractor(subset, ext_cfg);
    save_classifier(extractor, ext_cfg.seed, subset_dir + "/extractor.json");

    const FeatureSet real_features = embed(extractor, subset);
    const RealismContext ctx = build_realism_context(real_features, cfg.k, need_class_manifolds);
    const NoiseSchedule sched = build_schedule(cfg.schedule);

    std::map<int, long> quota;
    if (cfg.quota_rule == RunConfig::QuotaRule::match_real) {
      const auto counts = subset.class_counts();
      for (int c = 0; c < subset.n_classes; ++c) quota[c] = counts[static_cast<std::size_t>(c)];
    } else {
      quota = cfg.quota_counts;
    }

    const Generator generator = [&den, &sched](int label, std::uint64_t seed) {
      return sample(den.model, label, sched, seed, 1).row(0).transpose().eval();
    };

    for (const auto& policy_name : cfg.policies) {
      const std::uint64_t gen_seed =
          derive_seed(cfg.seed, fnv1a64("generate"), static_cast<std::uint64_t>(s),
                      fnv1a64(policy_name));
      FilterPolicy policy;
      policy.kind = policy_from_name(policy_name);
      policy.k = cfg.k;
      policy.epsilon = cfg.filter_epsilon;
      policy.max_attempts_factor = cfg.max_attempts_factor;
      policy.prune_fraction = cfg.filter_prune_fraction;

      std::string generation_error;
      SyntheticDataset synth;
      try {
        synth = filter_generate(generator, compressor, extractor, policy, quota, gen_seed, ctx);
        const std::string policy_dir = subset_dir + "/" + policy_name;
        fs::create_directories(policy_dir);
        save_dataset(synth.data, policy_dir + "/synthetic.csv");
        std::ofstream scores(policy_dir + "/synthetic_scores.csv");
        scores << "index,score,attempts\n";
        for (Eigen::Index i = 0; i < synth.scores.size(); ++i)
          scores << i << ',' << format_real(synth.scores[i]) << ',' << synth.attempts[i] << "\n";
      } catch (const std::exception& e) {
        generation_error = e.what();
      }

      {
        QualityCell cell;
        cell.subset = s;
        cell.policy = policy_name;
        cell.seed = gen_seed;
        if (generation_error.empty()) {
          try {
            const FeatureSet synth_features = embed(extractor, synth.data);
            cell.quality = evaluate_quality(real_features, synth_features, cfg.k);
          } catch (const std::exception& e) {
            cell.status = e.what();
          }
        } else {
          cell.status = generation_error;
        }
        report.quality_cells.push_back(cell);

        if (cfg.per_class_quality && generation_error.empty()) {
          const FeatureSet synth_features = embed(extractor, synth.data);
          for (int c = 0; c < subset.n_classes; ++c) {
            QualityCell class_cell;
            class_cell.subset = s;
            class_cell.policy = policy_name;
            class_cell.scope = "class-" + std::to_string(c);
            class_cell.seed = gen_seed;
            try {
              auto select = [c](const FeatureSet& fs) {
                std::vector<int> idx;
                for (Eigen::Index i = 0; i < fs.size(); ++i)
                  if (fs.labels[i] == c) idx.push_back(static_cast<int>(i));
                FeatureSet out;
                out.F.resize(static_cast<Eigen::Index>(idx.size()), fs.dim());
                out.labels.resize(static_cast<Eigen::Index>(idx.size()));
                for (std::size_t i = 0; i < idx.size(); ++i) {
                  out.F.row(static_cast<Eigen::Index>(i)) = fs.F.row(idx[i]);
                  out.labels[static_cast<Eigen::Index>(i)] = c;
                }
                return out;
              };
              class_cell.quality =
                  evaluate_quality(select(real_features), select(synth_features), cfg.k);
            } catch (const std::exception& e) {
              class_cell.status = e.what();
            }
            report.quality_cells.push_back(class_cell);
          }
        }
      }

      for (const auto& regime_name : cfg.regimes) {
        ClassifierCell cell;
        cell.subset = s;
        cell.policy = policy_name;
        cell.regime = regime_name;
        cell.seed = derive_seed(derive_seed(cfg.seed, fnv1a64("classifier"),
                                            static_cast<std::uint64_t>(s)),
                                fnv1a64(policy_name), fnv1a64(regime_name));
        Regime regime;
        regime.kind = regime_from_name(regime_name);
        regime.aug_noise_scale = cfg.traditional_aug_scale;
        const bool needs_synth =
            regime.kind == RegimeKind::synthetic_aug || regime.kind == RegimeKind::transfer;
        if (needs_synth && !generation_error.empty()) {
          cell.status = generation_error;
        } else {
          TrainConfig clf_cfg = cfg.classifier_cfg;
          clf_cfg.seed = cell.seed;
          try {
            cell.metrics = run_regime(regime, subset, needs_synth ? &synth : nullptr, valid, test,
                                      clf_cfg);
          } catch (const std::exception& e) {
            cell.status = e.what();
          }
        }
        report.classifier_cells.push_back(cell);
      }
    }
  }

  detail::compute_aggregates(report);
  write_experiment_report(report, cfg.out_dir);
  return report;
}

}  // namespace synthkit
