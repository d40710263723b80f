#include "resshift/diffusion.hpp"

#include <cmath>
#include <limits>
#include <optional>

#include "resshift/error.hpp"
#include "resshift/nn/denoiser.hpp"
#include "resshift/nn/ops.hpp"

namespace resshift {

namespace {

// out = a*x + b*y + c*z, element-wise
Image combine(double a, const Image& x, double b, const Image& y, double c, const Image& z) {
  Image out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * x[i] + b * y[i] + c * z[i];
  return out;
}

}  // namespace

Image residual(const Image& x0, const Image& y0) {
  require_same_shape(x0, y0, "residual");
  return y0 - x0;
}

Image forward_step(const Image& x_prev, const Image& e0, int t, const NoiseSchedule& schedule,
                   const Image& xi) {
  schedule.check_step(t);
  require_same_shape(x_prev, e0, "forward_step");
  require_same_shape(x_prev, xi, "forward_step noise");
  const double a = schedule.alpha(t);
  return combine(1.0, x_prev, a, e0, schedule.kappa() * std::sqrt(a), xi);
}

Image forward_step(const Image& x_prev, const Image& e0, int t, const NoiseSchedule& schedule,
                   Rng& rng) {
  schedule.check_step(t);
  return forward_step(x_prev, e0, t, schedule, standard_normal(x_prev.shape(), rng));
}

GaussianParams marginal_params(const Image& x0, const Image& y0, int t,
                               const NoiseSchedule& schedule) {
  schedule.check_step(t);
  require_same_shape(x0, y0, "marginal_params");
  const double eta = schedule.eta(t);
  Image mean(x0.shape());
  for (std::size_t i = 0; i < mean.size(); ++i) mean[i] = x0[i] + eta * (y0[i] - x0[i]);
  return {std::move(mean), schedule.kappa() * std::sqrt(eta)};
}

Image sample_marginal(const Image& x0, const Image& y0, int t, const NoiseSchedule& schedule,
                      const Image& xi) {
  GaussianParams g = marginal_params(x0, y0, t, schedule);
  require_same_shape(g.mean, xi, "sample_marginal noise");
  for (std::size_t i = 0; i < g.mean.size(); ++i) g.mean[i] += g.std * xi[i];
  return std::move(g.mean);
}

Image sample_marginal(const Image& x0, const Image& y0, int t, const NoiseSchedule& schedule,
                      Rng& rng) {
  schedule.check_step(t);
  require_same_shape(x0, y0, "sample_marginal");
  return sample_marginal(x0, y0, t, schedule, standard_normal(x0.shape(), rng));
}

double posterior_std(int t, const NoiseSchedule& schedule) {
  schedule.check_step(t);
  const double ratio = schedule.eta(t - 1) / schedule.eta(t);
  return schedule.kappa() * std::sqrt(ratio * schedule.alpha(t));
}

Image predicted_mean(const Image& x_t, const Image& x0_hat, int t, const NoiseSchedule& schedule) {
  schedule.check_step(t);
  require_same_shape(x_t, x0_hat, "predicted_mean");
  const double c_state = schedule.eta(t - 1) / schedule.eta(t);
  const double c_clean = schedule.alpha(t) / schedule.eta(t);
  Image out(x_t.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = c_state * x_t[i] + c_clean * x0_hat[i];
  return out;
}

GaussianParams posterior_params(const Image& x_t, const Image& x0, int t,
                                const NoiseSchedule& schedule) {
  return {predicted_mean(x_t, x0, t, schedule), posterior_std(t, schedule)};
}

Image init_reverse(const Image& y0, const NoiseSchedule& schedule, const Image& xi) {
  require_same_shape(y0, xi, "init_reverse noise");
  const double s = schedule.kappa() * std::sqrt(schedule.eta(schedule.steps()));
  Image out(y0.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = y0[i] + s * xi[i];
  return out;
}

Image init_reverse(const Image& y0, const NoiseSchedule& schedule, Rng& rng) {
  return init_reverse(y0, schedule, standard_normal(y0.shape(), rng));
}

Image reverse_step(const Image& x_t, const Image& x0_hat, int t, const NoiseSchedule& schedule,
                   const Image& xi) {
  Image mean = predicted_mean(x_t, x0_hat, t, schedule);
  require_same_shape(mean, xi, "reverse_step noise");
  const double s = posterior_std(t, schedule);
  if (s == 0.0) return mean;
  for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += s * xi[i];
  return mean;
}

Image reverse_step(const Image& x_t, const Image& x0_hat, int t, const NoiseSchedule& schedule,
                   Rng& rng) {
  if (posterior_std(t, schedule) == 0.0) return predicted_mean(x_t, x0_hat, t, schedule);
  return reverse_step(x_t, x0_hat, t, schedule, standard_normal(x_t.shape(), rng));
}

std::vector<Image> sample_batch(std::span<const Image> y0, const BatchPredictor& predictor,
                                const NoiseSchedule& schedule, std::span<Rng> rngs,
                                const SampleOptions& options) {
  if (rngs.size() != y0.size()) {
    throw InvalidParameter("sample_batch: one random stream per image required");
  }
  std::vector<Image> states;
  states.reserve(y0.size());
  for (std::size_t i = 0; i < y0.size(); ++i) states.push_back(init_reverse(y0[i], schedule, rngs[i]));

  std::vector<int> steps(y0.size());
  for (int t = schedule.steps(); t >= 1; --t) {
    if (options.observer) {
      for (std::size_t i = 0; i < states.size(); ++i) options.observer(i, t, states[i]);
    }
    std::fill(steps.begin(), steps.end(), t);
    const std::vector<Image> x0_hat = predictor(states, y0, steps);
    if (x0_hat.size() != states.size()) {
      throw ShapeError("sample: predictor returned the wrong batch size");
    }
    for (std::size_t i = 0; i < states.size(); ++i) {
      states[i] = reverse_step(states[i], x0_hat[i], t, schedule, rngs[i]);
    }
  }
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (options.observer) options.observer(i, 0, states[i]);
    if (options.clamp) states[i] = states[i].clamped(0.0, 1.0);
  }
  return states;
}

Image sample(const Image& y0, const Predictor& predictor, const NoiseSchedule& schedule, Rng& rng,
             const SampleOptions& options) {
  BatchPredictor batch = [&](std::span<const Image> x, std::span<const Image> y,
                             std::span<const int> steps) {
    return std::vector<Image>{predictor(x[0], y[0], steps[0])};
  };
  return sample_batch(std::span<const Image>(&y0, 1), batch, schedule, std::span<Rng>(&rng, 1),
                      options)[0];
}

nn::InputConditioning input_conditioning(const NoiseSchedule& schedule, double residual_var) {
  if (!(residual_var > 0.0)) throw InvalidParameter("input_conditioning: residual_var must be positive");
  nn::InputConditioning c;
  const double k2 = schedule.kappa() * schedule.kappa();
  for (int t = 1; t <= schedule.steps(); ++t) {
    const double eta = schedule.eta(t);
    // x_t - y0 = (1 - eta)(x0 - y0) + kappa sqrt(eta) noise
    const double a = 1.0 - eta;
    c.in_scale.push_back(1.0 / std::sqrt(k2 * eta + 1.0));
    c.skip_gain.push_back(a * residual_var / (a * a * residual_var + k2 * eta));
  }
  return c;
}

Predictor predictor_for(nn::Denoiser& net) {
  return [&net](const Image& x_t, const Image& y0, int t) { return net.predict(x_t, y0, t); };
}

BatchPredictor batch_predictor_for(nn::Denoiser& net) {
  return [&net](std::span<const Image> x_t, std::span<const Image> y0, std::span<const int> steps) {
    return net.predict(x_t, y0, steps);
  };
}

double training_loss_batch(std::span<const Image> x0, std::span<const Image> y0,
                           std::span<const int> steps, nn::Denoiser& net,
                           const NoiseSchedule& schedule, std::span<Rng> rngs, bool weighted,
                           bool backprop) {
  if (x0.size() != y0.size() || x0.size() != steps.size() || x0.size() != rngs.size() ||
      x0.empty()) {
    throw ShapeError("training_loss: inconsistent batch sizes");
  }
  std::vector<double> weights;
  if (weighted) {
    // w_1 is undefined (eta_0 = 0); the t=1 reconstruction term keeps unit weight.
    for (int t : steps) weights.push_back(t >= 2 ? loss_weight(schedule, t) : 1.0);
  }
  std::vector<Image> states;
  states.reserve(x0.size());
  for (std::size_t i = 0; i < x0.size(); ++i) {
    states.push_back(sample_marginal(x0[i], y0[i], steps[i], schedule, rngs[i]));
  }
  std::optional<nn::NoGradGuard> guard;
  if (!backprop) guard.emplace();
  nn::Tensor pred = net.forward(nn::images_to_tensor(states), nn::images_to_tensor(y0), steps);
  nn::Tensor loss = nn::mse_loss(pred, nn::images_to_tensor(x0), weights);
  if (backprop) loss.backward();
  return loss.item();
}

double training_loss(const Image& x0, const Image& y0, int t, nn::Denoiser& net,
                     const NoiseSchedule& schedule, Rng& rng, bool weighted) {
  require_same_shape(x0, y0, "training_loss");
  const int steps[] = {t};
  return training_loss_batch(std::span<const Image>(&x0, 1), std::span<const Image>(&y0, 1), steps,
                             net, schedule, std::span<Rng>(&rng, 1), weighted);
}

double kl_gaussians(const GaussianParams& p, const GaussianParams& q) {
  require_same_shape(p.mean, q.mean, "kl_gaussians");
  if (!(q.std > 0.0)) {
    throw DegenerateDistribution("kl_gaussians: reference distribution has zero variance");
  }
  if (p.std < 0.0) throw InvalidParameter("kl_gaussians: negative standard deviation");
  if (p.std == 0.0) return std::numeric_limits<double>::infinity();
  const double d = static_cast<double>(p.mean.size());
  double sq = 0.0;
  for (std::size_t i = 0; i < p.mean.size(); ++i) {
    const double diff = p.mean[i] - q.mean[i];
    sq += diff * diff;
  }
  const double ratio = p.std / q.std;
  return d * (-std::log(ratio) + 0.5 * ratio * ratio - 0.5) + sq / (2.0 * q.std * q.std);
}

DiffusionProcess::DiffusionProcess(NoiseSchedule schedule, Shape shape)
    : schedule_(std::move(schedule)), shape_(shape) {
  if (shape.size() == 0) throw ShapeError("diffusion process: empty shape");
}

void DiffusionProcess::check(const Image& img, const char* context) const {
  if (img.shape() != shape_) {
    throw ShapeError(std::string(context) + ": expected " + shape_.str() + ", got " +
                     img.shape().str());
  }
}

GaussianParams DiffusionProcess::marginal(const Image& x0, const Image& y0, int t) const {
  check(x0, "marginal");
  return marginal_params(x0, y0, t, schedule_);
}

GaussianParams DiffusionProcess::posterior(const Image& x_t, const Image& x0, int t) const {
  check(x_t, "posterior");
  return posterior_params(x_t, x0, t, schedule_);
}

Image DiffusionProcess::sample(const Image& y0, const Predictor& predictor, Rng& rng,
                               const SampleOptions& options) const {
  check(y0, "sample");
  return resshift::sample(y0, predictor, schedule_, rng, options);
}

}  // namespace resshift
