#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "synthkit/classifier.hpp"
#include "synthkit/common.hpp"
#include "synthkit/diffusion.hpp"
#include "synthkit/latent.hpp"
#include "synthkit/train_config.hpp"

// Structured-text persistence for trained models: a metadata header plus
// parameter arrays, as JSON. nlohmann emits shortest-round-trip doubles, so a
// save/load cycle is bitwise lossless.

namespace synthkit {

namespace detail {

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "' for reading");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": invalid JSON: " + e.what());
  }
  return j;
}

inline void write_json_file(const nlohmann::json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out << j.dump(2) << "\n";
  if (!out) throw DataError("failed writing '" + path + "'");
}

inline std::vector<double> to_std(const Eigen::VectorXd& v) {
  return {v.data(), v.data() + v.size()};
}

inline Eigen::VectorXd from_std(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline nlohmann::json schedule_to_json(const ScheduleConfig& s) {
  nlohmann::json j;
  j["kind"] = s.kind == ScheduleConfig::Kind::cosine ? "cosine" : "linear";
  j["T"] = s.T;
  j["s"] = s.s;
  j["beta_start"] = s.beta_start;
  j["beta_end"] = s.beta_end;
  return j;
}

inline ScheduleConfig schedule_from_json(const nlohmann::json& j) {
  ScheduleConfig s;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "cosine")
    s.kind = ScheduleConfig::Kind::cosine;
  else if (kind == "linear")
    s.kind = ScheduleConfig::Kind::linear;
  else
    throw DataError("unknown schedule kind '" + kind + "'");
  s.T = j.at("T").get<int>();
  if (j.contains("s")) s.s = j.at("s").get<Real>();
  if (j.contains("beta_start")) s.beta_start = j.at("beta_start").get<Real>();
  if (j.contains("beta_end")) s.beta_end = j.at("beta_end").get<Real>();
  return s;
}

}  // namespace detail

inline void save_denoiser(const Denoiser& model, const ScheduleConfig& schedule,
                          std::uint64_t seed, const std::string& path) {
  nlohmann::json j;
  j["format"] = "synthkit-denoiser-v1";
  j["data_dim"] = model.dims().data_dim;
  j["n_classes"] = model.dims().n_classes;
  j["hidden"] = model.dims().hidden;
  j["embedding_dim"] = model.dims().embedding_dim;
  j["schedule"] = detail::schedule_to_json(schedule);
  j["seed"] = seed;
  j["params"] = detail::to_std(model.params());
  detail::write_json_file(j, path);
}

struct LoadedDenoiser {
  Denoiser model;
  ScheduleConfig schedule;
  std::uint64_t seed = 0;
};

inline LoadedDenoiser load_denoiser(const std::string& path) {
  const nlohmann::json j = detail::read_json_file(path);
  if (j.value("format", "") != "synthkit-denoiser-v1")
    throw DataError(path + ": not a denoiser file");
  DenoiserDims dims;
  dims.data_dim = j.at("data_dim").get<int>();
  dims.n_classes = j.at("n_classes").get<int>();
  dims.hidden = j.at("hidden").get<std::vector<int>>();
  dims.embedding_dim = j.at("embedding_dim").get<int>();
  LoadedDenoiser loaded{Denoiser(dims), detail::schedule_from_json(j.at("schedule")),
                        j.value("seed", std::uint64_t{0})};
  const Eigen::VectorXd params = detail::from_std(j.at("params").get<std::vector<double>>());
  if (params.size() != loaded.model.param_count())
    throw DataError(path + ": parameter count does not match the declared dimensions");
  loaded.model.params() = params;
  return loaded;
}

inline void save_classifier(const MlpClassifier& model, std::uint64_t seed,
                            const std::string& path) {
  nlohmann::json j;
  j["format"] = "synthkit-classifier-v1";
  j["in_dim"] = model.in_dim();
  j["n_classes"] = model.n_classes();
  j["hidden"] = model.shape().hidden;
  j["seed"] = seed;
  j["params"] = detail::to_std(model.params());
  detail::write_json_file(j, path);
}

inline MlpClassifier load_classifier(const std::string& path) {
  const nlohmann::json j = detail::read_json_file(path);
  if (j.value("format", "") != "synthkit-classifier-v1")
    throw DataError(path + ": not a classifier file");
  MlpShape shape{j.at("in_dim").get<int>(), j.at("n_classes").get<int>(),
                 j.at("hidden").get<std::vector<int>>()};
  MlpClassifier model(shape);
  const Eigen::VectorXd params = detail::from_std(j.at("params").get<std::vector<double>>());
  if (params.size() != model.params().size())
    throw DataError(path + ": parameter count does not match the declared shape");
  model.params() = params;
  return model;
}

inline void save_compressor(const Compressor& c, const std::string& path) {
  nlohmann::json j;
  j["format"] = "synthkit-compressor-v1";
  j["kind"] = c.kind == Compressor::Kind::identity ? "identity" : "linear";
  j["data_dim"] = c.data_dim;
  j["latent_dim"] = c.latent_dim;
  if (c.kind == Compressor::Kind::linear) {
    j["mean"] = detail::to_std(c.mean);
    // row-major flattening
    std::vector<double> enc, dec;
    for (Eigen::Index r = 0; r < c.encode_matrix.rows(); ++r)
      for (Eigen::Index col = 0; col < c.encode_matrix.cols(); ++col)
        enc.push_back(c.encode_matrix(r, col));
    for (Eigen::Index r = 0; r < c.decode_matrix.rows(); ++r)
      for (Eigen::Index col = 0; col < c.decode_matrix.cols(); ++col)
        dec.push_back(c.decode_matrix(r, col));
    j["encode"] = enc;
    j["decode"] = dec;
  }
  detail::write_json_file(j, path);
}

inline Compressor load_compressor(const std::string& path) {
  const nlohmann::json j = detail::read_json_file(path);
  if (j.value("format", "") != "synthkit-compressor-v1")
    throw DataError(path + ": not a compressor file");
  const int d = j.at("data_dim").get<int>();
  const int latent = j.at("latent_dim").get<int>();
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "identity") {
    if (latent != d) throw DataError(path + ": identity compressor with latent_dim != data_dim");
    return identity_compressor(d);
  }
  if (kind != "linear") throw DataError(path + ": unknown compressor kind '" + kind + "'");
  const auto enc = j.at("encode").get<std::vector<double>>();
  const auto dec = j.at("decode").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(enc.size()) != static_cast<Eigen::Index>(latent) * d ||
      static_cast<Eigen::Index>(dec.size()) != static_cast<Eigen::Index>(latent) * d)
    throw DataError(path + ": matrix size does not match declared dimensions");
  Eigen::MatrixXd encode(latent, d), decode(d, latent);
  for (int r = 0; r < latent; ++r)
    for (int col = 0; col < d; ++col) encode(r, col) = enc[static_cast<std::size_t>(r) * d + col];
  for (int r = 0; r < d; ++r)
    for (int col = 0; col < latent; ++col)
      decode(r, col) = dec[static_cast<std::size_t>(r) * latent + col];
  return linear_compressor(std::move(encode), std::move(decode),
                           detail::from_std(j.at("mean").get<std::vector<double>>()));
}

}  // namespace synthkit
