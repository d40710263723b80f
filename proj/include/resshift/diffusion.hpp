#pragma once

#include <functional>
#include <span>
#include <vector>

#include "resshift/image.hpp"
#include "resshift/rng.hpp"
#include "resshift/schedule.hpp"

namespace resshift {

namespace nn {
class Denoiser;
struct InputConditioning;
}

/// Isotropic Gaussian N(mean, std^2 I).
struct GaussianParams {
  Image mean;
  double std = 0.0;
};

// e0 = y0 - x0
Image residual(const Image& x0, const Image& y0);

/// x_t = x_{t-1} + alpha_t e0 + kappa sqrt(alpha_t) xi
Image forward_step(const Image& x_prev, const Image& e0, int t, const NoiseSchedule& schedule,
                   Rng& rng);
Image forward_step(const Image& x_prev, const Image& e0, int t, const NoiseSchedule& schedule,
                   const Image& xi);

/// q(x_t | x0, y0) = N(x0 + eta_t e0, kappa^2 eta_t I)
GaussianParams marginal_params(const Image& x0, const Image& y0, int t,
                               const NoiseSchedule& schedule);
Image sample_marginal(const Image& x0, const Image& y0, int t, const NoiseSchedule& schedule,
                      Rng& rng);
Image sample_marginal(const Image& x0, const Image& y0, int t, const NoiseSchedule& schedule,
                      const Image& xi);

/// q(x_{t-1} | x_t, x0, y0) with mean (eta_{t-1}/eta_t) x_t + (alpha_t/eta_t) x0
/// and variance kappa^2 (eta_{t-1}/eta_t) alpha_t. Degenerates to (x0, 0) at t=1.
GaussianParams posterior_params(const Image& x_t, const Image& x0, int t,
                                const NoiseSchedule& schedule);

// Posterior std for step t; shared by the tractable posterior and the reverse kernel.
double posterior_std(int t, const NoiseSchedule& schedule);

// Posterior mean with the network's x0 estimate substituted for x0.
Image predicted_mean(const Image& x_t, const Image& x0_hat, int t, const NoiseSchedule& schedule);

/// x_T = y0 + kappa sqrt(eta_T) xi. Uses the exact marginal variance at t=T.
Image init_reverse(const Image& y0, const NoiseSchedule& schedule, Rng& rng);
Image init_reverse(const Image& y0, const NoiseSchedule& schedule, const Image& xi);

// predicted_mean + posterior_std * xi; returns x0_hat exactly at t=1.
Image reverse_step(const Image& x_t, const Image& x0_hat, int t, const NoiseSchedule& schedule,
                   Rng& rng);
Image reverse_step(const Image& x_t, const Image& x0_hat, int t, const NoiseSchedule& schedule,
                   const Image& xi);

// f(x_t, y0, t) -> estimate of x0, applied to a batch.
using BatchPredictor = std::function<std::vector<Image>(
    std::span<const Image> x_t, std::span<const Image> y0, std::span<const int> steps)>;
using Predictor = std::function<Image(const Image& x_t, const Image& y0, int t)>;

struct SampleOptions {
  bool clamp = true;
  // Called with (batch index, t, x_t) for t = T..1 and finally (index, 0, x_0) before clamping.
  std::function<void(std::size_t, int, const Image&)> observer;
};

/// Reverse chain: x_T from init_reverse, then for t = T..1 predict x0 and draw
/// x_{t-1} from the reverse kernel. Output clamped to [0,1] unless disabled.
/// Exactly T predictor evaluations.
Image sample(const Image& y0, const Predictor& predictor, const NoiseSchedule& schedule, Rng& rng,
             const SampleOptions& options = {});

// Batched variant; image i draws all of its noise from rngs[i]. Exactly T
// batched predictor evaluations.
std::vector<Image> sample_batch(std::span<const Image> y0, const BatchPredictor& predictor,
                                const NoiseSchedule& schedule, std::span<Rng> rngs,
                                const SampleOptions& options = {});

/// Denoiser input conditioning for a schedule. The body input is scaled by
/// 1/sqrt(kappa^2 eta_t + 1). The head skip gain is the linear least-squares
/// weight of x_t - y0 when estimating x0 - y0, assuming the residual has
/// per-pixel variance `residual_var`.
nn::InputConditioning input_conditioning(const NoiseSchedule& schedule,
                                         double residual_var = 0.04);

Predictor predictor_for(nn::Denoiser& net);
BatchPredictor batch_predictor_for(nn::Denoiser& net);

/// Training objective: draws x_t ~ q(x_t | x0, y0) and returns the mean-squared
/// error between f(x_t, y0, t) and x0, scaled by w_t for t >= 2 when `weighted`
/// (t = 1 keeps unit weight since w_1 is undefined).
/// Gradients are accumulated into the network's parameters.
double training_loss(const Image& x0, const Image& y0, int t, nn::Denoiser& net,
                     const NoiseSchedule& schedule, Rng& rng, bool weighted = false);

/// Batched objective: mean over examples of the per-example loss above.
/// Example i draws its marginal noise from rngs[i]. With `backprop` false no
/// graph is recorded and gradients are untouched.
double training_loss_batch(std::span<const Image> x0, std::span<const Image> y0,
                           std::span<const int> steps, nn::Denoiser& net,
                           const NoiseSchedule& schedule, std::span<Rng> rngs, bool weighted,
                           bool backprop = true);

/// KL(p || q) for isotropic Gaussians over the same shape:
///   d [ln(sq/sp) + sp^2/(2 sq^2) - 1/2] + ||mp - mq||^2 / (2 sq^2).
/// Returns +inf when p is degenerate (std 0) and q is not.
double kl_gaussians(const GaussianParams& p, const GaussianParams& q);

/// Schedule plus image shape: the residual-shifting chain for one problem size.
class DiffusionProcess {
 public:
  DiffusionProcess(NoiseSchedule schedule, Shape shape);

  const NoiseSchedule& schedule() const { return schedule_; }
  const Shape& shape() const { return shape_; }

  GaussianParams marginal(const Image& x0, const Image& y0, int t) const;
  GaussianParams posterior(const Image& x_t, const Image& x0, int t) const;
  Image sample(const Image& y0, const Predictor& predictor, Rng& rng,
               const SampleOptions& options = {}) const;

 private:
  void check(const Image& img, const char* context) const;

  NoiseSchedule schedule_;
  Shape shape_;
};

}  // namespace resshift
