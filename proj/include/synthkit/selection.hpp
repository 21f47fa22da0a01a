#pragma once

#include <Eigen/Core>
#include <functional>
#include <map>
#include <stdexcept>
#include <vector>

#include "synthkit/common.hpp"
#include "synthkit/dataset.hpp"
#include "synthkit/features.hpp"
#include "synthkit/latent.hpp"
#include "synthkit/metrics.hpp"

namespace synthkit {

/// Sample-selection policy applied while generating.
struct FilterPolicy {
  enum class Kind { none, realism, class_realism };

  Kind kind = Kind::none;
  int k = 3;
  Real epsilon = 1e-12;        // zero-distance guard in the score denominator
  int max_attempts_factor = 50;
  // off by default: drop this fraction of the widest hyperspheres from every
  // manifold before scoring
  Real prune_fraction = 0.0;

  void validate() const {
    if (k < 1) throw std::invalid_argument("FilterPolicy: k must be >= 1");
    if (!(epsilon > 0)) throw std::invalid_argument("FilterPolicy: epsilon must be positive");
    if (max_attempts_factor < 1)
      throw std::invalid_argument("FilterPolicy: max_attempts_factor must be >= 1");
    if (!(prune_fraction >= 0 && prune_fraction < 1))
      throw std::invalid_argument("FilterPolicy: prune_fraction must lie in [0, 1)");
  }
};

/// Realism score of a candidate feature vector against the real manifold:
/// max over real points of radius / distance, the distance floored at
/// epsilon so coincidence with a real point counts as maximally realistic.
/// R >= 1 means the candidate lies inside some real hypersphere.
inline Real realism_score(const Eigen::VectorXd& phi_g, const ManifoldModel& manifold,
                          Real epsilon = 1e-12) {
  if (manifold.size() == 0) throw std::invalid_argument("realism_score: empty manifold");
  if (phi_g.size() != manifold.points.cols())
    throw std::invalid_argument("realism_score: feature dimension mismatch");
  Real best = 0;
  for (Eigen::Index i = 0; i < manifold.size(); ++i) {
    const Real dist = (phi_g - manifold.points.row(i).transpose()).norm();
    best = std::max(best, manifold.radii[i] / std::max(dist, epsilon));
  }
  return best;
}

/// Realism score against the manifold of the sample's own claimed class.
inline Real class_realism_score(const Eigen::VectorXd& phi_g, int label,
                                const std::map<int, ManifoldModel>& class_manifolds,
                                Real epsilon = 1e-12) {
  const auto it = class_manifolds.find(label);
  if (it == class_manifolds.end())
    throw std::invalid_argument("class_realism_score: no manifold for label " +
                                std::to_string(label));
  return realism_score(phi_g, it->second, epsilon);
}

/// Drops the ceil(fraction * n) points with the largest radii; the remaining
/// radii are kept as-is. At least one point always survives.
inline ManifoldModel prune_widest_hyperspheres(const ManifoldModel& manifold, Real fraction) {
  if (!(fraction >= 0 && fraction < 1))
    throw std::invalid_argument("prune_widest_hyperspheres: fraction must lie in [0, 1)");
  const Eigen::Index n = manifold.size();
  Eigen::Index drop = static_cast<Eigen::Index>(std::ceil(fraction * static_cast<Real>(n)));
  drop = std::min(drop, n - 1);
  if (drop <= 0) return manifold;

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  // widest first; ties resolved toward the smaller index
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    if (manifold.radii[a] != manifold.radii[b]) return manifold.radii[a] > manifold.radii[b];
    return a < b;
  });
  std::vector<bool> dropped(static_cast<std::size_t>(n), false);
  for (Eigen::Index i = 0; i < drop; ++i) dropped[static_cast<std::size_t>(order[i])] = true;

  ManifoldModel pruned;
  pruned.k = manifold.k;
  pruned.points.resize(n - drop, manifold.points.cols());
  pruned.labels.resize(n - drop);
  pruned.radii.resize(n - drop);
  Eigen::Index w = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (dropped[static_cast<std::size_t>(i)]) continue;
    pruned.points.row(w) = manifold.points.row(i);
    pruned.labels[w] = manifold.labels.size() == n ? manifold.labels[i] : 0;
    pruned.radii[w] = manifold.radii[i];
    ++w;
  }
  return pruned;
}

/// Manifolds the filter scores against, prebuilt from real training features.
struct RealismContext {
  ManifoldModel global;
  std::map<int, ManifoldModel> per_class;

  RealismContext pruned(Real fraction) const {
    if (fraction <= 0) return *this;
    RealismContext out;
    out.global = prune_widest_hyperspheres(global, fraction);
    for (const auto& [label, manifold] : per_class)
      out.per_class.emplace(label, prune_widest_hyperspheres(manifold, fraction));
    return out;
  }
};

/// Builds the global manifold and, when requested, one manifold per class
/// from that class's features only. Every class must have at least k+1
/// members.
inline RealismContext build_realism_context(const FeatureSet& real_features, int k,
                                            bool per_class) {
  RealismContext ctx;
  ctx.global = build_manifold(real_features, k);
  if (per_class) {
    std::map<int, std::vector<int>> by_class;
    for (Eigen::Index i = 0; i < real_features.size(); ++i)
      by_class[real_features.labels[i]].push_back(static_cast<int>(i));
    for (const auto& [label, idx] : by_class) {
      FeatureSet fs;
      fs.F.resize(static_cast<Eigen::Index>(idx.size()), real_features.dim());
      fs.labels.resize(static_cast<Eigen::Index>(idx.size()));
      for (std::size_t j = 0; j < idx.size(); ++j) {
        fs.F.row(static_cast<Eigen::Index>(j)) = real_features.F.row(idx[j]);
        fs.labels[static_cast<Eigen::Index>(j)] = label;
      }
      ctx.per_class.emplace(label, build_manifold(fs, k));
    }
  }
  return ctx;
}

/// Generated samples plus the acceptance metadata the filter recorded.
/// Under realism policies every retained sample has score >= 1.
struct SyntheticDataset {
  LabeledDataset data;
  Eigen::VectorXd scores;    // realism score under the active policy
  Eigen::VectorXi attempts;  // 1-based draw ordinal within the sample's class
  FilterPolicy policy;
};

/// Draws one raw (pre-decode) sample for the given class; must be a pure
/// function of (label, seed).
using Generator = std::function<Eigen::VectorXd(int label, std::uint64_t seed)>;

/// Generate-filter-top-up loop. For each class in the quota (ascending
/// label), repeatedly draws candidates, decodes them through the
/// compressor, embeds them with the extractor, and scores them under the
/// policy until the quota is met. Candidates are drawn in batches of the
/// remaining shortfall and kept in draw order. Total attempts per class are
/// bounded by max_attempts_factor * quota; exhaustion raises
/// MaxAttemptsExceeded with acceptance diagnostics.
inline SyntheticDataset filter_generate(const Generator& generator, const Compressor& compressor,
                                        const FeatureExtractor& extractor,
                                        const FilterPolicy& policy,
                                        const std::map<int, long>& quota, std::uint64_t seed,
                                        const RealismContext& ctx) {
  policy.validate();
  if (quota.empty()) throw std::invalid_argument("filter_generate: empty quota");
  long total = 0;
  for (const auto& [label, count] : quota) {
    if (count < 1)
      throw std::invalid_argument("filter_generate: quota for class " + std::to_string(label) +
                                  " must be positive");
    if (policy.kind == FilterPolicy::Kind::class_realism && !ctx.per_class.count(label))
      throw std::invalid_argument("filter_generate: no class manifold for label " +
                                  std::to_string(label));
    total += count;
  }

  const RealismContext pruned_ctx =
      policy.prune_fraction > 0 ? ctx.pruned(policy.prune_fraction) : RealismContext{};
  const RealismContext& active = policy.prune_fraction > 0 ? pruned_ctx : ctx;

  std::vector<Eigen::VectorXd> rows;
  std::vector<int> labels;
  std::vector<Real> scores;
  std::vector<int> attempts_used;
  rows.reserve(total);

  for (const auto& [label, count] : quota) {
    const long budget = static_cast<long>(policy.max_attempts_factor) * count;
    long accepted = 0;
    long attempts = 0;
    while (accepted < count) {
      // batch of the remaining shortfall, clipped to the attempt budget
      const long batch = std::min(count - accepted, budget - attempts);
      if (batch <= 0) throw MaxAttemptsExceeded(label, attempts, accepted, count - accepted);
      for (long j = 0; j < batch; ++j) {
        const std::uint64_t candidate_seed =
            derive_seed(seed, static_cast<std::uint64_t>(label), static_cast<std::uint64_t>(attempts));
        ++attempts;
        const Eigen::VectorXd raw = generator(label, candidate_seed);
        const Eigen::VectorXd x = decode(compressor, raw);
        const Eigen::VectorXd phi = extractor.features(x);
        Real score = 0;
        bool keep = false;
        switch (policy.kind) {
          case FilterPolicy::Kind::none:
            score = realism_score(phi, active.global, policy.epsilon);
            keep = true;
            break;
          case FilterPolicy::Kind::realism:
            score = realism_score(phi, active.global, policy.epsilon);
            keep = score >= 1.0;
            break;
          case FilterPolicy::Kind::class_realism:
            score = class_realism_score(phi, label, active.per_class, policy.epsilon);
            keep = score >= 1.0;
            break;
        }
        if (keep) {
          rows.push_back(x);
          labels.push_back(label);
          scores.push_back(score);
          attempts_used.push_back(static_cast<int>(attempts));
          ++accepted;
        }
      }
    }
  }

  SyntheticDataset out;
  const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  out.data.X.resize(n, extractor.in_dim());
  out.data.labels.resize(n);
  out.scores.resize(n);
  out.attempts.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out.data.X.row(i) = rows[static_cast<std::size_t>(i)].transpose();
    out.data.labels[i] = labels[static_cast<std::size_t>(i)];
    out.scores[i] = scores[static_cast<std::size_t>(i)];
    out.attempts[i] = attempts_used[static_cast<std::size_t>(i)];
  }
  out.data.n_classes = std::max(extractor.n_classes(), quota.rbegin()->first + 1);
  out.policy = policy;
  return out;
}

}  // namespace synthkit
