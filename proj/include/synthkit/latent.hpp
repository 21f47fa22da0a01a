#pragma once

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <stdexcept>

#include "synthkit/dataset.hpp"

namespace synthkit {

/// Bidirectional map between data space and a compact latent space. The
/// identity kind round-trips bitwise; the linear kind projects onto the
/// leading principal directions of the fitting data. Immutable after
/// construction.
struct Compressor {
  enum class Kind { identity, linear };

  Kind kind = Kind::identity;
  int data_dim = 0;
  int latent_dim = 0;
  Eigen::MatrixXd encode_matrix;  // latent_dim x data_dim
  Eigen::MatrixXd decode_matrix;  // data_dim x latent_dim
  Eigen::VectorXd mean;           // data_dim; zero for hand-built maps
};

inline Compressor identity_compressor(int data_dim) {
  if (data_dim < 1) throw std::invalid_argument("identity_compressor: dimension must be positive");
  Compressor c;
  c.kind = Compressor::Kind::identity;
  c.data_dim = data_dim;
  c.latent_dim = data_dim;
  return c;
}

inline Compressor linear_compressor(Eigen::MatrixXd encode, Eigen::MatrixXd decode,
                                    Eigen::VectorXd mean) {
  if (encode.rows() != decode.cols() || encode.cols() != decode.rows() ||
      mean.size() != decode.rows())
    throw std::invalid_argument("linear_compressor: inconsistent matrix dimensions");
  Compressor c;
  c.kind = Compressor::Kind::linear;
  c.data_dim = static_cast<int>(encode.cols());
  c.latent_dim = static_cast<int>(encode.rows());
  c.encode_matrix = std::move(encode);
  c.decode_matrix = std::move(decode);
  c.mean = std::move(mean);
  return c;
}

inline Eigen::VectorXd encode(const Compressor& c, const Eigen::VectorXd& x) {
  if (x.size() != c.data_dim) throw std::invalid_argument("encode: input dimension mismatch");
  if (c.kind == Compressor::Kind::identity) return x;
  return c.encode_matrix * (x - c.mean);
}

inline Eigen::VectorXd decode(const Compressor& c, const Eigen::VectorXd& z) {
  if (z.size() != c.latent_dim) throw std::invalid_argument("decode: latent dimension mismatch");
  if (c.kind == Compressor::Kind::identity) return z;
  return c.decode_matrix * z + c.mean;
}

inline LabeledDataset encode_dataset(const Compressor& c, const LabeledDataset& ds) {
  LabeledDataset out;
  out.X.resize(ds.size(), c.latent_dim);
  for (Eigen::Index i = 0; i < ds.size(); ++i)
    out.X.row(i) = encode(c, ds.X.row(i).transpose()).transpose();
  out.labels = ds.labels;
  out.n_classes = ds.n_classes;
  return out;
}

/// Principal-subspace fit: encode projects centered data onto the top
/// latent_dim eigenvectors of the scatter matrix, decode reconstructs and
/// re-adds the mean. Reconstruction error is minimal among rank-latent_dim
/// linear maps.
inline Compressor fit_linear_compressor(const LabeledDataset& dataset, int latent_dim) {
  const Eigen::Index d = dataset.dim();
  const Eigen::Index n = dataset.size();
  if (latent_dim < 1) throw std::invalid_argument("fit_linear_compressor: latent_dim must be positive");
  if (latent_dim > d)
    throw std::invalid_argument("fit_linear_compressor: latent_dim exceeds data dimension");
  if (n < latent_dim)
    throw std::invalid_argument("fit_linear_compressor: need at least latent_dim samples");

  const Eigen::VectorXd mean = dataset.X.colwise().mean().transpose();
  const Eigen::MatrixXd centered = dataset.X.rowwise() - mean.transpose();
  Eigen::MatrixXd scatter = centered.transpose() * centered;
  scatter = 0.5 * (scatter + scatter.transpose());

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(scatter);
  if (solver.info() != Eigen::Success)
    throw NumericalError("fit_linear_compressor: eigendecomposition failed");

  // Eigenvalues come back ascending; take the trailing columns.
  Eigen::MatrixXd basis(d, latent_dim);
  for (int j = 0; j < latent_dim; ++j)
    basis.col(j) = solver.eigenvectors().col(d - 1 - j);

  return linear_compressor(basis.transpose(), basis, mean);
}

}  // namespace synthkit
