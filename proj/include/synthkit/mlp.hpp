#pragma once

#include <Eigen/Core>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "synthkit/common.hpp"
#include "synthkit/rng.hpp"

namespace synthkit {

/// Fully connected net shape: SiLU hidden layers, linear output layer.
/// SiLU keeps the hidden units linear for large positive inputs, so the net
/// can track identity-like targets well outside the training range, which
/// tanh cannot. Parameters live in caller-owned flat storage laid out
/// [W0|b0|W1|b1|...] with column-major weights.
struct MlpShape {
  int in = 0;
  int out = 0;
  std::vector<int> hidden;

  Eigen::Index param_count() const {
    Eigen::Index n = 0;
    int prev = in;
    for (int h : hidden) {
      n += static_cast<Eigen::Index>(h) * prev + h;
      prev = h;
    }
    n += static_cast<Eigen::Index>(out) * prev + out;
    return n;
  }

  std::vector<int> layer_sizes() const {
    std::vector<int> s;
    s.reserve(hidden.size() + 2);
    s.push_back(in);
    for (int h : hidden) s.push_back(h);
    s.push_back(out);
    return s;
  }

  bool operator==(const MlpShape&) const = default;
};

struct MlpTrace {
  std::vector<Eigen::VectorXd> pre;   // pre-activation per hidden layer
  std::vector<Eigen::VectorXd> acts;  // post-activation per hidden layer
  Eigen::VectorXd out;
};

inline double silu(double x) { return x / (1.0 + std::exp(-x)); }

inline double silu_derivative(double x) {
  const double s = 1.0 / (1.0 + std::exp(-x));
  return s * (1.0 + x * (1.0 - s));
}

using ConstVecRef = Eigen::Ref<const Eigen::VectorXd>;
using VecRef = Eigen::Ref<Eigen::VectorXd>;

namespace detail {
inline void check_mlp_args(const MlpShape& shape, const ConstVecRef& params,
                           const ConstVecRef& x) {
  if (params.size() != shape.param_count())
    throw std::invalid_argument("mlp: parameter vector has wrong length");
  if (x.size() != shape.in) throw std::invalid_argument("mlp: input dimension mismatch");
}
}  // namespace detail

/// Forward pass. `inject` (optional) is added to the first layer's
/// pre-activation and must match its width.
inline Eigen::VectorXd mlp_forward(const MlpShape& shape, const ConstVecRef& params,
                                   const ConstVecRef& x,
                                   const Eigen::VectorXd* inject = nullptr,
                                   MlpTrace* trace = nullptr) {
  detail::check_mlp_args(shape, params, x);
  const auto sizes = shape.layer_sizes();
  const int n_layers = static_cast<int>(sizes.size()) - 1;
  if (trace) {
    trace->pre.clear();
    trace->acts.clear();
    trace->pre.reserve(n_layers - 1);
    trace->acts.reserve(n_layers - 1);
  }

  Eigen::VectorXd a = x;
  Eigen::Index off = 0;
  for (int l = 0; l < n_layers; ++l) {
    const int rows = sizes[l + 1], cols = sizes[l];
    Eigen::Map<const Eigen::MatrixXd> W(params.data() + off, rows, cols);
    off += static_cast<Eigen::Index>(rows) * cols;
    Eigen::Map<const Eigen::VectorXd> b(params.data() + off, rows);
    off += rows;

    Eigen::VectorXd z = W * a + b;
    if (l == 0 && inject) {
      if (inject->size() != rows)
        throw std::invalid_argument("mlp: inject width must match first layer");
      z += *inject;
    }
    if (l < n_layers - 1) {
      if (trace) trace->pre.push_back(z);
      a = z.unaryExpr([](double v) { return silu(v); });
      if (trace) trace->acts.push_back(a);
    } else {
      a = std::move(z);
    }
  }
  if (trace) trace->out = a;
  return a;
}

/// Accumulates dL/dparams into `grad` given dL/dout and the forward trace.
/// When `g_inject` is non-null, receives dL/d(first pre-activation).
inline void mlp_backward(const MlpShape& shape, const ConstVecRef& params, const ConstVecRef& x,
                         const MlpTrace& trace, const Eigen::VectorXd& g_out, VecRef grad,
                         Eigen::VectorXd* g_inject = nullptr) {
  detail::check_mlp_args(shape, params, x);
  if (grad.size() != shape.param_count())
    throw std::invalid_argument("mlp: gradient vector has wrong length");
  const auto sizes = shape.layer_sizes();
  const int n_layers = static_cast<int>(sizes.size()) - 1;

  // Offsets of each layer's weights within the flat storage.
  std::vector<Eigen::Index> w_off(n_layers);
  Eigen::Index off = 0;
  for (int l = 0; l < n_layers; ++l) {
    w_off[l] = off;
    off += static_cast<Eigen::Index>(sizes[l + 1]) * sizes[l] + sizes[l + 1];
  }

  Eigen::VectorXd g = g_out;  // dL/dz at the current layer
  for (int l = n_layers - 1; l >= 0; --l) {
    const int rows = sizes[l + 1], cols = sizes[l];
    Eigen::Map<Eigen::MatrixXd> gW(grad.data() + w_off[l], rows, cols);
    Eigen::Map<Eigen::VectorXd> gb(grad.data() + w_off[l] + static_cast<Eigen::Index>(rows) * cols,
                                   rows);
    if (l == 0) {
      gW.noalias() += g * x.transpose();
    } else {
      gW.noalias() += g * trace.acts[l - 1].transpose();
    }
    gb += g;
    if (l > 0) {
      Eigen::Map<const Eigen::MatrixXd> W(params.data() + w_off[l], rows, cols);
      Eigen::VectorXd g_a = W.transpose() * g;
      const Eigen::VectorXd& z = trace.pre[l - 1];
      g = g_a.array() * z.unaryExpr([](double v) { return silu_derivative(v); }).array();
    }
  }
  if (g_inject) *g_inject = std::move(g);
}

/// Uniform init in [-a, a] with a = sqrt(6 / (fan_in + fan_out)), applied to
/// each layer's weights and biases in flat-storage order. `params` must be
/// preallocated to shape.param_count().
inline void mlp_init_glorot(const MlpShape& shape, VecRef params, Rng& rng) {
  if (params.size() != shape.param_count())
    throw std::invalid_argument("mlp_init_glorot: parameter vector has wrong length");
  const auto sizes = shape.layer_sizes();
  Eigen::Index off = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const int rows = sizes[l + 1], cols = sizes[l];
    const double a = std::sqrt(6.0 / (rows + cols));
    const Eigen::Index count = static_cast<Eigen::Index>(rows) * cols + rows;
    for (Eigen::Index i = 0; i < count; ++i)
      params[off + i] = (2.0 * rng.uniform() - 1.0) * a;
    off += count;
  }
}

}  // namespace synthkit
