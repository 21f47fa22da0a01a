#pragma once

#include <Eigen/Core>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "synthkit/common.hpp"

namespace synthkit {

/// Precomputed diffusion noise schedule over T timesteps (0-based arrays):
/// beta_t, alpha_t = 1 - beta_t, alpha_bar_t = prod_{s<=t} alpha_s, and the
/// reverse-step noise scale sigma_t = sqrt(beta_t). Immutable once built.
template <typename Scalar = Real>
struct NoiseScheduleT {
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Vec betas;
  Vec alphas;
  Vec alpha_bars;
  Vec sigmas;

  int timesteps() const { return static_cast<int>(betas.size()); }
};

using NoiseSchedule = NoiseScheduleT<Real>;

/// Builds the derived arrays from a beta sequence. alpha_bar is the running
/// product of (1 - beta), so product consistency holds by construction.
template <typename Scalar>
NoiseScheduleT<Scalar> schedule_from_betas(typename NoiseScheduleT<Scalar>::Vec betas) {
  const Eigen::Index T = betas.size();
  if (T < 1) throw std::invalid_argument("schedule: need at least one timestep");
  NoiseScheduleT<Scalar> sched;
  sched.betas = std::move(betas);
  sched.alphas.resize(T);
  sched.alpha_bars.resize(T);
  sched.sigmas.resize(T);
  Scalar running = Scalar(1);
  for (Eigen::Index t = 0; t < T; ++t) {
    const Scalar beta = sched.betas[t];
    if (!(beta > Scalar(0) && beta < Scalar(1)))
      throw std::invalid_argument("schedule: beta_" + std::to_string(t) + " outside (0, 1)");
    sched.alphas[t] = Scalar(1) - beta;
    running *= sched.alphas[t];
    if (!(running > Scalar(0)))
      throw NumericalError("schedule: alpha_bar underflowed to zero at t=" + std::to_string(t));
    sched.alpha_bars[t] = running;
    sched.sigmas[t] = std::sqrt(beta);
  }
  return sched;
}

/// Cosine schedule: alpha_bar follows f(u) = cos^2(((u + s) / (1 + s)) * pi/2)
/// normalized by f(0), with per-step betas clipped to (0, max_beta].
template <typename Scalar = Real>
NoiseScheduleT<Scalar> make_cosine_schedule(int T, Scalar s = Scalar(0.008),
                                            Scalar max_beta = Scalar(0.999)) {
  if (T < 2) throw std::invalid_argument("make_cosine_schedule: T must be >= 2");
  if (!(s > Scalar(0) && s < Scalar(1)))
    throw std::invalid_argument("make_cosine_schedule: s must lie in (0, 1)");

  const auto f = [s](Scalar u) {
    const Scalar arg = ((u + s) / (Scalar(1) + s)) * Scalar(std::numbers::pi) / Scalar(2);
    const Scalar c = std::cos(arg);
    return c * c;
  };

  typename NoiseScheduleT<Scalar>::Vec betas(T);
  for (int t = 0; t < T; ++t) {
    const Scalar hi = f(Scalar(t) / Scalar(T));
    const Scalar lo = f(Scalar(t + 1) / Scalar(T));
    betas[t] = std::min(Scalar(1) - lo / hi, max_beta);
  }
  return schedule_from_betas<Scalar>(std::move(betas));
}

/// Linear beta ramp between beta_start and beta_end.
template <typename Scalar = Real>
NoiseScheduleT<Scalar> make_linear_schedule(int T, Scalar beta_start, Scalar beta_end) {
  if (T < 1) throw std::invalid_argument("make_linear_schedule: T must be >= 1");
  if (!(beta_start > Scalar(0) && beta_start <= beta_end && beta_end < Scalar(1)))
    throw std::invalid_argument(
        "make_linear_schedule: require 0 < beta_start <= beta_end < 1");
  typename NoiseScheduleT<Scalar>::Vec betas(T);
  if (T == 1) {
    betas[0] = beta_start;
  } else {
    for (int t = 0; t < T; ++t)
      betas[t] = beta_start + (beta_end - beta_start) * Scalar(t) / Scalar(T - 1);
  }
  return schedule_from_betas<Scalar>(std::move(betas));
}

}  // namespace synthkit
