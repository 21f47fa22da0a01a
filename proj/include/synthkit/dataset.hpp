#pragma once

#include <Eigen/Core>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "synthkit/common.hpp"

namespace synthkit {

struct LabeledSample {
  Eigen::VectorXd x;
  int label = 0;
};

/// Labeled vector data, one sample per row. n_classes is the label-space
/// size C; every label must lie in [0, C).
struct LabeledDataset {
  Eigen::MatrixXd X;
  Eigen::VectorXi labels;
  int n_classes = 0;

  Eigen::Index size() const { return X.rows(); }
  Eigen::Index dim() const { return X.cols(); }

  std::vector<long> class_counts() const {
    std::vector<long> counts(n_classes, 0);
    for (Eigen::Index i = 0; i < labels.size(); ++i) ++counts[labels[i]];
    return counts;
  }

  LabeledSample sample(Eigen::Index i) const { return {X.row(i).transpose(), labels[i]}; }

  LabeledDataset subset(const std::vector<int>& idx) const {
    LabeledDataset out;
    out.X.resize(static_cast<Eigen::Index>(idx.size()), X.cols());
    out.labels.resize(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) {
      out.X.row(static_cast<Eigen::Index>(i)) = X.row(idx[i]);
      out.labels[static_cast<Eigen::Index>(i)] = labels[idx[i]];
    }
    out.n_classes = n_classes;
    return out;
  }
};

/// Feature-space twin of LabeledDataset (embeddings plus carried labels).
struct FeatureSet {
  Eigen::MatrixXd F;
  Eigen::VectorXi labels;

  Eigen::Index size() const { return F.rows(); }
  Eigen::Index dim() const { return F.cols(); }
};

inline LabeledDataset make_dataset(Eigen::MatrixXd X, Eigen::VectorXi labels, int n_classes = 0) {
  if (X.rows() != labels.size())
    throw std::invalid_argument("make_dataset: row/label count mismatch");
  int max_label = -1;
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0) throw std::invalid_argument("make_dataset: negative label");
    max_label = std::max(max_label, labels[i]);
  }
  if (n_classes == 0) n_classes = max_label + 1;
  if (max_label >= n_classes) throw std::invalid_argument("make_dataset: label out of range");
  return {std::move(X), std::move(labels), n_classes};
}

namespace detail {

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

inline double parse_real_field(std::string_view field, const std::string& path, long line_no) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc{} || ptr != field.data() + field.size())
    throw DataError(path + ":" + std::to_string(line_no) + ": malformed real value '" +
                    std::string(field) + "'");
  return v;
}

inline int parse_label_field(std::string_view field, const std::string& path, long line_no) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc{} || ptr != field.data() + field.size() || v < 0)
    throw DataError(path + ":" + std::to_string(line_no) +
                    ": label must be a non-negative integer, got '" + std::string(field) + "'");
  return v;
}

struct CsvTable {
  Eigen::MatrixXd values;
  Eigen::VectorXi labels;
};

// Shared reader for the `label,f0,...,f{d-1}` format.
inline CsvTable load_labeled_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "' for reading");
  std::string line;
  long line_no = 0;

  if (!std::getline(in, line)) throw DataError(path + ": empty file");
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_csv_line(line);
  if (header.size() < 2 || header[0] != "label")
    throw DataError(path + ":1: expected header 'label,f0,...'");
  const Eigen::Index d = static_cast<Eigen::Index>(header.size()) - 1;

  std::vector<double> values;
  std::vector<int> labels;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (static_cast<Eigen::Index>(fields.size()) != d + 1)
      throw DataError(path + ":" + std::to_string(line_no) + ": expected " +
                      std::to_string(d + 1) + " fields, got " + std::to_string(fields.size()));
    labels.push_back(parse_label_field(fields[0], path, line_no));
    for (Eigen::Index j = 0; j < d; ++j) {
      const double v = parse_real_field(fields[1 + j], path, line_no);
      if (!std::isfinite(v))
        throw DataError(path + ":" + std::to_string(line_no) + ": non-finite value");
      values.push_back(v);
    }
  }
  if (labels.empty()) throw DataError(path + ": no data rows");

  CsvTable table;
  const Eigen::Index n = static_cast<Eigen::Index>(labels.size());
  table.values.resize(n, d);
  table.labels.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    table.labels[i] = labels[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < d; ++j)
      table.values(i, j) = values[static_cast<std::size_t>(i * d + j)];
  }
  return table;
}

inline void save_labeled_csv(const Eigen::MatrixXd& values, const Eigen::VectorXi& labels,
                             const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out << "label";
  for (Eigen::Index j = 0; j < values.cols(); ++j) out << ",f" << j;
  out << "\n";
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    out << labels[i];
    for (Eigen::Index j = 0; j < values.cols(); ++j) out << ',' << format_real(values(i, j));
    out << "\n";
  }
  if (!out) throw DataError("failed writing '" + path + "'");
}

}  // namespace detail

/// Loads a dataset CSV. d is inferred from the header, C = 1 + max label.
inline LabeledDataset load_dataset(const std::string& path) {
  auto table = detail::load_labeled_csv(path);
  return make_dataset(std::move(table.values), std::move(table.labels));
}

inline void save_dataset(const LabeledDataset& ds, const std::string& path) {
  detail::save_labeled_csv(ds.X, ds.labels, path);
}

inline FeatureSet load_feature_set(const std::string& path) {
  auto table = detail::load_labeled_csv(path);
  return {std::move(table.values), std::move(table.labels)};
}

inline void save_feature_set(const FeatureSet& fs, const std::string& path) {
  detail::save_labeled_csv(fs.F, fs.labels, path);
}

}  // namespace synthkit
