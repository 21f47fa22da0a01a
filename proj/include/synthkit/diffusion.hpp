#pragma once

#include <Eigen/Core>
#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "synthkit/dataset.hpp"
#include "synthkit/mlp.hpp"
#include "synthkit/rng.hpp"
#include "synthkit/schedule.hpp"
#include "synthkit/train_config.hpp"

namespace synthkit {

struct DenoiserDims {
  int data_dim = 0;
  int n_classes = 0;
  std::vector<int> hidden{128, 128};
  int embedding_dim = 0;  // 0 -> hidden.front()

  void resolve_and_validate() {
    if (data_dim < 1) throw std::invalid_argument("Denoiser: data_dim must be positive");
    if (n_classes < 1) throw std::invalid_argument("Denoiser: n_classes must be positive");
    if (hidden.empty()) throw std::invalid_argument("Denoiser: need at least one hidden layer");
    for (int h : hidden)
      if (h < 1) throw std::invalid_argument("Denoiser: hidden widths must be positive");
    if (embedding_dim == 0) embedding_dim = hidden.front();
    if (embedding_dim != hidden.front())
      throw std::invalid_argument(
          "Denoiser: embedding_dim must equal the first hidden width (the conditioning "
          "embedding is added to that layer's pre-activation)");
    if (embedding_dim % 2 != 0)
      throw std::invalid_argument("Denoiser: embedding_dim must be even");
  }
};

/// Conditional noise predictor eps_theta(x_t, t, label): a tanh MLP from data
/// space back to data space. The timestep enters as a sinusoidal embedding,
/// the label through a learned table; their sum is added to the first hidden
/// layer's pre-activation. Parameters are a single flat vector
/// [network | label table], so optimizers and finite differences see one
/// contiguous sequence. Evaluation is deterministic; instances are immutable
/// after training and safe to share across sampling workers.
class Denoiser {
 public:
  Denoiser() = default;

  explicit Denoiser(DenoiserDims dims) : dims_(std::move(dims)) {
    dims_.resolve_and_validate();
    net_ = MlpShape{dims_.data_dim, dims_.data_dim, dims_.hidden};
    net_count_ = net_.param_count();
    params_ = Eigen::VectorXd::Zero(param_count());
  }

  static Denoiser init(DenoiserDims dims, Rng& rng) {
    Denoiser d(std::move(dims));
    mlp_init_glorot(d.net_, d.params_.head(d.net_count_), rng);
    const double a = std::sqrt(6.0 / (d.dims_.n_classes + d.dims_.embedding_dim));
    for (Eigen::Index i = d.net_count_; i < d.param_count(); ++i)
      d.params_[i] = (2.0 * rng.uniform() - 1.0) * a;
    return d;
  }

  const DenoiserDims& dims() const { return dims_; }
  const MlpShape& net_shape() const { return net_; }

  Eigen::Index param_count() const {
    return net_count_ + static_cast<Eigen::Index>(dims_.embedding_dim) * dims_.n_classes;
  }

  Eigen::VectorXd& params() { return params_; }
  const Eigen::VectorXd& params() const { return params_; }

  /// Learned label table, one column per class.
  Eigen::Map<const Eigen::MatrixXd> label_embedding() const {
    return {params_.data() + net_count_, dims_.embedding_dim, dims_.n_classes};
  }

  /// Sinusoidal timestep embedding: sin(t * w_i) in the first half,
  /// cos(t * w_i) in the second, w_i = 10000^(-i / (dim/2)).
  static Eigen::VectorXd time_embedding(int t, int dim) {
    const int half = dim / 2;
    Eigen::VectorXd e(dim);
    for (int i = 0; i < half; ++i) {
      const double w = std::exp(-std::log(10000.0) * static_cast<double>(i) / half);
      e[i] = std::sin(t * w);
      e[half + i] = std::cos(t * w);
    }
    return e;
  }

  Eigen::VectorXd predict(const Eigen::VectorXd& x_t, int t, int label) const {
    const Eigen::VectorXd cond = conditioning(t, label);
    return mlp_forward(net_, params_.head(net_count_), x_t, &cond);
  }

  /// Accumulates d(g_out . output)/dparams into grad (flat layout).
  void accumulate_gradient(const Eigen::VectorXd& x_t, int t, int label,
                           const Eigen::VectorXd& g_out, Eigen::VectorXd& grad) const {
    if (grad.size() != param_count())
      throw std::invalid_argument("Denoiser: gradient vector has wrong length");
    const Eigen::VectorXd cond = conditioning(t, label);
    MlpTrace trace;
    mlp_forward(net_, params_.head(net_count_), x_t, &cond, &trace);
    Eigen::VectorXd g_cond;
    mlp_backward(net_, params_.head(net_count_), x_t, trace, g_out, grad.head(net_count_),
                 &g_cond);
    grad.segment(net_count_ + static_cast<Eigen::Index>(label) * dims_.embedding_dim,
                 dims_.embedding_dim) += g_cond;
  }

 private:
  Eigen::VectorXd conditioning(int t, int label) const {
    if (t < 0) throw std::invalid_argument("Denoiser: negative timestep");
    if (label < 0 || label >= dims_.n_classes)
      throw std::invalid_argument("Denoiser: label out of range");
    return time_embedding(t, dims_.embedding_dim) + label_embedding().col(label);
  }

  DenoiserDims dims_;
  MlpShape net_;
  Eigen::Index net_count_ = 0;
  Eigen::VectorXd params_;
};

/// x_t = sqrt(alpha_bar_t) x0 + sqrt(1 - alpha_bar_t) eps.
inline Eigen::VectorXd forward_sample(const Eigen::VectorXd& x0, int t,
                                      const Eigen::VectorXd& eps, const NoiseSchedule& sched) {
  if (t < 0 || t >= sched.timesteps())
    throw std::invalid_argument("forward_sample: t out of range");
  if (eps.size() != x0.size())
    throw std::invalid_argument("forward_sample: noise dimension mismatch");
  const Real ab = sched.alpha_bars[t];
  return std::sqrt(ab) * x0 + std::sqrt(1.0 - ab) * eps;
}

inline Eigen::VectorXd predict_noise(const Denoiser& denoiser, const Eigen::VectorXd& x_t, int t,
                                     int label) {
  return denoiser.predict(x_t, t, label);
}

/// x_{t-1} = (x_t - beta_t / sqrt(1 - alpha_bar_t) * eps_hat) / sqrt(alpha_t)
///           + sigma_t z.
inline Eigen::VectorXd reverse_step(const Eigen::VectorXd& x_t, int t,
                                    const Eigen::VectorXd& eps_hat, const Eigen::VectorXd& z,
                                    const NoiseSchedule& sched) {
  if (t < 1 || t >= sched.timesteps())
    throw std::invalid_argument("reverse_step: t out of range");
  if (eps_hat.size() != x_t.size() || z.size() != x_t.size())
    throw std::invalid_argument("reverse_step: dimension mismatch");
  const Real coeff = sched.betas[t] / std::sqrt(1.0 - sched.alpha_bars[t]);
  return (x_t - coeff * eps_hat) / std::sqrt(sched.alphas[t]) + sched.sigmas[t] * z;
}

/// Draws n conditional samples, one per row. Starts each chain from standard
/// normal noise and walks t = T-1 .. 1, injecting fresh noise except at the
/// final step. Pure function of (denoiser, label, schedule, seed, n).
inline Eigen::MatrixXd sample(const Denoiser& denoiser, int label, const NoiseSchedule& sched,
                              std::uint64_t seed, int n) {
  if (n < 1) throw std::invalid_argument("sample: n must be >= 1");
  const int d = denoiser.dims().data_dim;
  const int T = sched.timesteps();
  if (T < 2) throw std::invalid_argument("sample: schedule needs at least two timesteps");
  Rng rng(seed);
  Eigen::MatrixXd out(n, d);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(d);
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd x = rng.normal_vector(d);
    for (int t = T - 1; t >= 1; --t) {
      const Eigen::VectorXd eps_hat = denoiser.predict(x, t, label);
      const Eigen::VectorXd z = (t > 1) ? rng.normal_vector(d) : zero;
      x = reverse_step(x, t, eps_hat, z, sched);
    }
    out.row(i) = x.transpose();
  }
  return out;
}

/// Simplified diffusion loss over a batch: per sample draw t ~ U[0, T) and
/// eps ~ N(0, I), noise x0 to x_t, and score ||eps - eps_theta(x_t, t, y)||^2.
/// Returns the batch mean and its exact gradient with respect to all model
/// parameters. Deterministic per seed; the draws do not depend on the
/// parameters, so the result is a smooth function of them.
template <class Model>
std::pair<Real, Eigen::VectorXd> simple_loss(const Model& model, const LabeledDataset& batch,
                                             const NoiseSchedule& sched, std::uint64_t seed) {
  const Eigen::Index n = batch.size();
  if (n == 0) throw std::invalid_argument("simple_loss: empty batch");
  Rng rng(seed);
  const int T = sched.timesteps();
  const double inv_n = 1.0 / static_cast<double>(n);

  Real loss = 0;
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(model.param_count());
  for (Eigen::Index i = 0; i < n; ++i) {
    const int t = rng.uniform_int(T);
    const Eigen::VectorXd eps = rng.normal_vector(batch.dim());
    const Eigen::VectorXd x0 = batch.X.row(i).transpose();
    const Eigen::VectorXd x_t = forward_sample(x0, t, eps, sched);
    const Eigen::VectorXd residual = model.predict(x_t, t, batch.labels[i]) - eps;
    loss += residual.squaredNorm();
    const Eigen::VectorXd g_out = (2.0 * inv_n) * residual;
    model.accumulate_gradient(x_t, t, batch.labels[i], g_out, grad);
  }
  return {loss * inv_n, std::move(grad)};
}

struct DenoiserTrainResult {
  Denoiser model;
  ScheduleConfig schedule;
  std::vector<Real> epoch_loss;
};

/// Mini-batch gradient descent with momentum on the simplified loss.
/// Deterministic per config seed; the per-epoch loss trace is recorded.
inline DenoiserTrainResult train_denoiser(const LabeledDataset& dataset, const TrainConfig& cfg) {
  cfg.validate();
  if (dataset.size() == 0) throw std::invalid_argument("train_denoiser: empty dataset");
  const auto counts = dataset.class_counts();
  for (int c = 0; c < dataset.n_classes; ++c)
    if (counts[c] == 0)
      throw std::invalid_argument("train_denoiser: class " + std::to_string(c) +
                                  " has no samples");

  const NoiseSchedule sched = build_schedule(cfg.schedule);
  DenoiserDims dims;
  dims.data_dim = static_cast<int>(dataset.dim());
  dims.n_classes = dataset.n_classes;
  if (!cfg.hidden.empty()) dims.hidden = cfg.hidden;
  dims.embedding_dim = cfg.embedding_dim;

  Rng rng(cfg.seed);
  Denoiser model = Denoiser::init(dims, rng);
  Eigen::VectorXd velocity = Eigen::VectorXd::Zero(model.param_count());

  DenoiserTrainResult result;
  result.schedule = cfg.schedule;
  const int n = static_cast<int>(dataset.size());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const Real lr = cfg.epoch_learning_rate(epoch);
    const std::vector<int> perm = rng.permutation(n);
    Real epoch_loss = 0;
    for (int start = 0; start < n; start += cfg.batch_size) {
      const int stop = std::min(n, start + cfg.batch_size);
      const std::vector<int> idx(perm.begin() + start, perm.begin() + stop);
      const LabeledDataset batch = dataset.subset(idx);
      const std::uint64_t batch_seed = rng.next_u64();
      auto [loss, grad] = simple_loss(model, batch, sched, batch_seed);
      if (!std::isfinite(loss))
        throw NumericalError("train_denoiser: non-finite loss (reduce learning rate)");
      velocity = cfg.momentum * velocity - lr * grad;
      model.params() += velocity;
      epoch_loss += loss * static_cast<Real>(idx.size());
    }
    result.epoch_loss.push_back(epoch_loss / n);
  }
  result.model = std::move(model);
  return result;
}

}  // namespace synthkit
