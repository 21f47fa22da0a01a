#pragma once

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "synthkit/dataset.hpp"

namespace synthkit {

/// Feature points with per-point k-NN radii (distance to the k-th nearest
/// other point, ties broken toward the smaller index). The union of the
/// resulting hyperspheres is the estimated manifold. Immutable; membership
/// tests share it read-only.
struct ManifoldModel {
  Eigen::MatrixXd points;
  Eigen::VectorXi labels;
  int k = 0;
  Eigen::VectorXd radii;

  Eigen::Index size() const { return points.rows(); }

  /// True when p lies inside at least one hypersphere.
  bool contains(const Eigen::VectorXd& p) const {
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
      const double dist = (p - points.row(i).transpose()).norm();
      if (dist <= radii[i]) return true;
    }
    return false;
  }
};

/// Exact brute-force k-NN radii over the feature set. Needs k >= 1 and at
/// least k+1 points.
inline ManifoldModel build_manifold(const FeatureSet& points, int k) {
  const Eigen::Index n = points.size();
  if (k < 1) throw std::invalid_argument("build_manifold: k must be >= 1");
  if (n < k + 1)
    throw std::invalid_argument("build_manifold: need at least k+1 points, got " +
                                std::to_string(n));
  ManifoldModel m;
  m.points = points.F;
  m.labels = points.labels;
  m.k = k;
  m.radii.resize(n);

  std::vector<std::pair<double, Eigen::Index>> neighbors;
  neighbors.reserve(n - 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    neighbors.clear();
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      neighbors.emplace_back((points.F.row(i) - points.F.row(j)).norm(), j);
    }
    std::nth_element(neighbors.begin(), neighbors.begin() + (k - 1), neighbors.end());
    m.radii[i] = neighbors[k - 1].first;
  }
  return m;
}

/// Fraction of generated features lying inside the real manifold (fidelity).
inline Real improved_precision(const ManifoldModel& real_manifold, const FeatureSet& gen) {
  if (gen.size() == 0) throw std::invalid_argument("improved_precision: empty generated set");
  if (gen.dim() != real_manifold.points.cols())
    throw std::invalid_argument("improved_precision: feature dimension mismatch");
  Eigen::Index inside = 0;
  for (Eigen::Index i = 0; i < gen.size(); ++i)
    if (real_manifold.contains(gen.F.row(i).transpose())) ++inside;
  return static_cast<Real>(inside) / static_cast<Real>(gen.size());
}

/// Fraction of real features lying inside the generated manifold (diversity).
inline Real improved_recall(const ManifoldModel& gen_manifold, const FeatureSet& real) {
  if (real.size() == 0) throw std::invalid_argument("improved_recall: empty real set");
  if (real.dim() != gen_manifold.points.cols())
    throw std::invalid_argument("improved_recall: feature dimension mismatch");
  Eigen::Index inside = 0;
  for (Eigen::Index i = 0; i < real.size(); ++i)
    if (gen_manifold.contains(real.F.row(i).transpose())) ++inside;
  return static_cast<Real>(inside) / static_cast<Real>(real.size());
}

/// Harmonic mean of precision and recall; 0 when both vanish.
inline Real improved_f1(Real p, Real r) {
  if (p + r == 0) return 0;
  return 2 * p * r / (p + r);
}

template <typename Scalar = Real>
struct GaussianStatsT {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> mu;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> sigma;
};

using GaussianStats = GaussianStatsT<Real>;

/// Sample mean and unbiased covariance (divisor n-1) of a feature set.
inline GaussianStats gaussian_stats(const FeatureSet& features) {
  const Eigen::Index n = features.size();
  if (n < 2) throw std::invalid_argument("gaussian_stats: need at least two points");
  GaussianStats stats;
  stats.mu = features.F.colwise().mean().transpose();
  const Eigen::MatrixXd centered = features.F.rowwise() - stats.mu.transpose();
  stats.sigma = (centered.transpose() * centered) / static_cast<Real>(n - 1);
  stats.sigma = 0.5 * (stats.sigma + stats.sigma.transpose()).eval();
  return stats;
}

/// Symmetric square root of a symmetric PSD matrix via eigendecomposition.
/// Eigenvalues slightly negative from rounding are clamped to zero; inputs
/// asymmetric or indefinite beyond tolerance are rejected.
template <typename Scalar = Real>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> matrix_sqrt_spd(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& A) {
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (A.rows() != A.cols()) throw std::invalid_argument("matrix_sqrt_spd: matrix must be square");
  const Scalar scale = std::max(Scalar(1), A.template lpNorm<Eigen::Infinity>());
  if ((A - A.transpose()).template lpNorm<Eigen::Infinity>() > Scalar(1e-10) * scale)
    throw std::invalid_argument("matrix_sqrt_spd: input is not symmetric within tolerance");

  Eigen::SelfAdjointEigenSolver<Mat> solver(Scalar(0.5) * (A + A.transpose()));
  if (solver.info() != Eigen::Success)
    throw NumericalError("matrix_sqrt_spd: eigendecomposition failed");
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> evals = solver.eigenvalues();
  const Scalar lam_max = std::max(Scalar(1), evals.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < evals.size(); ++i) {
    if (evals[i] < Scalar(-1e-10) * lam_max)
      throw std::invalid_argument("matrix_sqrt_spd: input is indefinite beyond tolerance");
    evals[i] = std::sqrt(std::max(evals[i], Scalar(0)));
  }
  return solver.eigenvectors() * evals.asDiagonal() * solver.eigenvectors().transpose();
}

/// Frechet distance between two Gaussians:
/// ||mu_r - mu_g||^2 + Tr(Sigma_r + Sigma_g - 2 (Sigma_r Sigma_g)^{1/2}).
/// The cross term is evaluated trace-equivalently as
/// Tr((Sigma_r^{1/2} Sigma_g Sigma_r^{1/2})^{1/2}); rounding below zero is
/// clamped.
template <typename Scalar = Real>
Scalar fid(const GaussianStatsT<Scalar>& real_stats, const GaussianStatsT<Scalar>& gen_stats) {
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (real_stats.mu.size() != gen_stats.mu.size())
    throw std::invalid_argument("fid: dimension mismatch");

  const Mat root_r = matrix_sqrt_spd<Scalar>(real_stats.sigma);
  Mat inner = root_r * gen_stats.sigma * root_r;
  inner = Scalar(0.5) * (inner + inner.transpose()).eval();

  Eigen::SelfAdjointEigenSolver<Mat> solver(inner);
  if (solver.info() != Eigen::Success) throw NumericalError("fid: eigendecomposition failed");
  Scalar cross_trace = 0;
  for (Eigen::Index i = 0; i < solver.eigenvalues().size(); ++i)
    cross_trace += std::sqrt(std::max(solver.eigenvalues()[i], Scalar(0)));

  const Scalar value = (real_stats.mu - gen_stats.mu).squaredNorm() + real_stats.sigma.trace() +
                       gen_stats.sigma.trace() - 2 * cross_trace;
  return std::max(value, Scalar(0));
}

/// Quality-metric record for one generated set against one real set.
struct QualityReport {
  Real fid = 0;
  Real improved_precision = 0;
  Real improved_recall = 0;
  Real improved_f1 = 0;
};

/// Full Table-1-style evaluation: FID plus Improved Precision/Recall/F1 over
/// whole feature sets, with both manifolds built at the same k.
inline QualityReport evaluate_quality(const FeatureSet& real, const FeatureSet& gen, int k) {
  QualityReport report;
  const ManifoldModel real_manifold = build_manifold(real, k);
  const ManifoldModel gen_manifold = build_manifold(gen, k);
  report.improved_precision = improved_precision(real_manifold, gen);
  report.improved_recall = improved_recall(gen_manifold, real);
  report.improved_f1 = improved_f1(report.improved_precision, report.improved_recall);
  report.fid = fid(gaussian_stats(real), gaussian_stats(gen));
  return report;
}

}  // namespace synthkit
