#pragma once

#include <functional>
#include <optional>

#include "ugcsr/schedule.hpp"
#include "ugcsr/tensor.hpp"

namespace ugcsr {

// q(x_t | x_{t-1}): sqrt(1-beta_t) x_prev + sqrt(beta_t) noise
LatentTensor forward_step(const LatentTensor& x_prev, size_t t, const NoiseSchedule& sched,
                          const LatentTensor& noise);

// Closed-form marginal: sqrt(abar_t) x0 + sqrt(1-abar_t) noise
LatentTensor forward_marginal(const LatentTensor& x0, size_t t, const NoiseSchedule& sched,
                              const LatentTensor& noise);

// One reverse (denoising) step with the posterior mean parameterized by the
// predicted noise. sigma_t^2 = beta_t, sigma_0 = 0; sigma_override forces a
// specific sigma (0 gives the deterministic mean step).
LatentTensor reverse_step(const LatentTensor& x_t, size_t t, const LatentTensor& predicted_noise,
                          const NoiseSchedule& sched, const LatentTensor& noise,
                          std::optional<double> sigma_override = std::nullopt);

// Noise predictor signature used by the training loss: |x_t, t| -> eps_hat.
// Conditioning is bound by the caller so the loss stays model-agnostic.
using NoisePredictor = std::function<Tensor(const Tensor& x_t, size_t t)>;

// L = mean || eps - eps_theta(x_t, t) ||^2 with x_t from forward_marginal.
double training_loss(const NoisePredictor& model, const LatentTensor& x0_latent, size_t t,
                     const NoiseSchedule& sched, const LatentTensor& noise);

}  // namespace ugcsr
