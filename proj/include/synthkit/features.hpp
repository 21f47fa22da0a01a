#pragma once

#include "synthkit/classifier.hpp"
#include "synthkit/dataset.hpp"

namespace synthkit {

/// The feature space for all quality metrics: penultimate activations of a
/// small classifier trained on real data.
using FeatureExtractor = MlpClassifier;

/// Cross-entropy training of the extractor on real data (hidden width 64 by
/// default). Deterministic per config seed.
inline FeatureExtractor train_feature_extractor(const LabeledDataset& real_data,
                                                const TrainConfig& cfg) {
  return train_mlp_classifier(real_data, cfg).model;
}

/// Embeds every sample; labels are carried through unchanged.
inline FeatureSet embed(const FeatureExtractor& extractor, const LabeledDataset& data) {
  if (data.dim() != extractor.in_dim())
    throw std::invalid_argument("embed: data dimension does not match extractor input");
  FeatureSet fs;
  fs.F.resize(data.size(), extractor.feature_dim());
  for (Eigen::Index i = 0; i < data.size(); ++i)
    fs.F.row(i) = extractor.features(data.X.row(i).transpose()).transpose();
  fs.labels = data.labels;
  return fs;
}

}  // namespace synthkit
