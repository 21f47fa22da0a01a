#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "synthkit/common.hpp"
#include "synthkit/schedule.hpp"

namespace synthkit {

struct ScheduleConfig {
  enum class Kind { cosine, linear };
  Kind kind = Kind::cosine;
  int T = 200;
  Real s = 0.008;
  Real beta_start = 1e-4;
  Real beta_end = 0.02;
};

inline NoiseSchedule build_schedule(const ScheduleConfig& cfg) {
  if (cfg.kind == ScheduleConfig::Kind::cosine) return make_cosine_schedule<Real>(cfg.T, cfg.s);
  return make_linear_schedule<Real>(cfg.T, cfg.beta_start, cfg.beta_end);
}

/// Settings shared by every gradient-descent trainer in the toolkit. The
/// schedule block is consumed by the diffusion trainer only; embedding_dim by
/// the denoiser only (0 means "first hidden width").
struct TrainConfig {
  int epochs = 100;
  int batch_size = 64;
  Real learning_rate = 0.01;
  Real momentum = 0.9;
  // learning rate decays linearly to lr_floor * learning_rate over the run;
  // 1.0 keeps it constant
  Real lr_floor = 1.0;
  std::uint64_t seed = 0;
  std::vector<int> hidden;  // empty -> trainer default
  int embedding_dim = 0;
  ScheduleConfig schedule;

  void validate() const {
    if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be positive");
    if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be positive");
    if (!(learning_rate > 0)) throw std::invalid_argument("TrainConfig: learning_rate must be positive");
    if (!(momentum >= 0 && momentum < 1))
      throw std::invalid_argument("TrainConfig: momentum must lie in [0, 1)");
    if (!(lr_floor > 0 && lr_floor <= 1))
      throw std::invalid_argument("TrainConfig: lr_floor must lie in (0, 1]");
    for (int h : hidden)
      if (h < 1) throw std::invalid_argument("TrainConfig: hidden widths must be positive");
  }

  /// Learning rate for the given epoch under the linear decay rule.
  Real epoch_learning_rate(int epoch) const {
    if (epochs <= 1) return learning_rate;
    const Real progress = static_cast<Real>(epoch) / static_cast<Real>(epochs - 1);
    return learning_rate * (1 - (1 - lr_floor) * progress);
  }
};

}  // namespace synthkit
