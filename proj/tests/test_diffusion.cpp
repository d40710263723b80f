#include <cmath>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "oracles.hpp"
#include "resshift/diffusion.hpp"
#include "resshift/error.hpp"
#include "resshift/nn/denoiser.hpp"
#include "resshift/nn/ops.hpp"

using namespace resshift;
using testutil::random_image;

namespace {

const NoiseSchedule& default_schedule() {
  static const NoiseSchedule s = build_schedule({15, 0.3, 2.0});
  return s;
}

Image constant(double v, Shape shape = {1, 4, 4}) { return Image(shape, v); }

// Sample mean and standard deviation of many draws of a scalar.
template <typename Draw>
std::pair<double, double> moments(int n, Draw&& draw) {
  double s1 = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const double v = draw();
    s1 += v;
    s2 += v * v;
  }
  const double m = s1 / n;
  return {m, std::sqrt((s2 - n * m * m) / (n - 1))};
}

}  // namespace

TEST_CASE("residual") {
  const Image x0 = constant(0.2), y0 = constant(0.7);
  const Image e0 = residual(x0, y0);
  for (std::size_t i = 0; i < e0.size(); ++i) CHECK(e0[i] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(residual(x0, x0) == constant(0.0));
  Rng rng(1);
  const Image a = random_image({2, 3, 3}, rng), b = random_image({2, 3, 3}, rng);
  const Image back = residual(a, b) + a;
  for (std::size_t i = 0; i < back.size(); ++i) CHECK(back[i] == doctest::Approx(b[i]).epsilon(1e-15));
  CHECK_THROWS_AS(residual(constant(0, {1, 2, 2}), constant(0, {1, 2, 3})), ShapeError);
}

TEST_CASE("forward step") {
  const auto& s = default_schedule();
  Rng rng(3);
  const Image x = random_image({1, 4, 4}, rng), e0 = random_image({1, 4, 4}, rng, -0.5, 0.5);
  const Image zero = constant(0.0);
  const Image det = forward_step(x, e0, 4, s, zero);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(det[i] == x[i] + s.alpha(4) * e0[i]);
  CHECK(forward_step(x, zero, 4, s, zero) == x);
  CHECK_THROWS_AS(forward_step(x, e0, 16, s, zero), StepError);

  const int n = 100000;
  const Image x1 = constant(0.3, {1, 1, 1}), e1 = constant(0.4, {1, 1, 1});
  Rng draw(9);
  const auto [m, sd] = moments(n, [&] { return forward_step(x1, e1, 7, s, draw)[0]; });
  const double want_sd = 2.0 * std::sqrt(s.alpha(7));
  CHECK(std::abs(m - (0.3 + s.alpha(7) * 0.4)) < 4 * want_sd / std::sqrt(n));
  CHECK(std::abs(sd / want_sd - 1.0) < 4 * std::sqrt(0.5 / n));
}

TEST_CASE("marginal") {
  const auto& s = default_schedule();
  const Image x0 = constant(0.2), y0 = constant(0.6);
  const auto g1 = marginal_params(x0, y0, 1, s);
  CHECK(g1.std == doctest::Approx(0.04).epsilon(1e-12));
  for (int t = 1; t <= 15; ++t) {
    CHECK(marginal_params(x0, x0, t, s).mean == x0);
    const auto g = marginal_params(x0, y0, t, s);
    CHECK(g.mean[0] == doctest::Approx(0.2 + s.eta(t) * 0.4).epsilon(1e-15));
    CHECK(sample_marginal(x0, y0, t, s, constant(0.0)) == g.mean);
  }
  Rng a(5), b(5);
  CHECK(sample_marginal(x0, y0, 9, s, a) == sample_marginal(x0, y0, 9, s, b));
}

TEST_CASE("marginal of the iterated forward chain") {
  const auto& s = default_schedule();
  Rng setup(17);
  const Shape shape{1, 2, 2};
  const Image x0 = random_image(shape, setup), y0 = random_image(shape, setup);
  const Image e0 = residual(x0, y0);
  const int n = 10000;
  for (int t : {5, 10, 15}) {
    CAPTURE(t);
    Rng chain(100 + t), direct(200 + t);
    std::vector<double> s1a(shape.size()), s2a(shape.size()), s1b(shape.size()), s2b(shape.size());
    for (int k = 0; k < n; ++k) {
      Image x = x0;
      for (int j = 1; j <= t; ++j) x = forward_step(x, e0, j, s, chain);
      const Image m = sample_marginal(x0, y0, t, s, direct);
      for (std::size_t i = 0; i < shape.size(); ++i) {
        s1a[i] += x[i];
        s2a[i] += x[i] * x[i];
        s1b[i] += m[i];
        s2b[i] += m[i] * m[i];
      }
    }
    // Pixels are independent with a shared variance, so variances pool.
    const double target = 4.0 * s.eta(t);
    double va = 0, vb = 0;
    for (std::size_t i = 0; i < shape.size(); ++i) {
      const double ma = s1a[i] / n, mb = s1b[i] / n;
      CHECK(std::abs(ma - mb) < 4 * std::sqrt(2.0 * target / n));
      va += (s2a[i] / n - ma * ma) / shape.size();
      vb += (s2b[i] / n - mb * mb) / shape.size();
    }
    CHECK(std::abs(va / target - 1.0) < 0.05);
    CHECK(std::abs(vb / target - 1.0) < 0.05);
  }
}

TEST_CASE("posterior degenerates at t=1") {
  const auto& s = default_schedule();
  Rng rng(8);
  const Image xt = random_image({1, 3, 3}, rng), x0 = random_image({1, 3, 3}, rng);
  const auto g = posterior_params(xt, x0, 1, s);
  CHECK(g.mean == x0);
  CHECK(g.std == 0.0);
}

TEST_CASE("posterior matches quadrature of the Bayes product") {
  const auto& s = default_schedule();
  const auto ref = oracle::schedule(15, 0.3L, 2.0L);
  Rng rng(23);
  for (int trial = 0; trial < 10; ++trial) {
    const double x0v = rng.uniform(), y0v = rng.uniform();
    for (int t = 2; t <= 15; ++t) {
      // x_t drawn near its marginal so the densities overlap.
      const double xt = x0v + s.eta(t) * (y0v - x0v) + 2.0 * std::sqrt(s.eta(t)) * rng.normal();
      const auto g = posterior_params(Image({1, 1, 1}, xt), Image({1, 1, 1}, x0v), t, s);
      const auto q = oracle::posterior_quadrature(xt, x0v, y0v, ref[t - 1], ref[t] - ref[t - 1], 2.0L);
      CAPTURE(t);
      CHECK(std::abs(g.mean[0] - static_cast<double>(q.mean)) < 1e-10);
      CHECK(std::abs(g.std * g.std - static_cast<double>(q.var)) < 1e-10);
    }
  }
}

TEST_CASE("posterior coefficients and predicted mean") {
  const auto& s = default_schedule();
  Rng rng(4);
  const Image xt = random_image({1, 3, 3}, rng), x0 = random_image({1, 3, 3}, rng);
  for (int t = 1; t <= 15; ++t) {
    CHECK(s.eta(t - 1) / s.eta(t) + s.alpha(t) / s.eta(t) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(predicted_mean(xt, x0, t, s) == posterior_params(xt, x0, t, s).mean);
    const Image fixed = predicted_mean(x0, x0, t, s);
    for (std::size_t i = 0; i < x0.size(); ++i) CHECK(fixed[i] == doctest::Approx(x0[i]).epsilon(1e-15));
  }
  CHECK(predicted_mean(xt, x0, 1, s) == x0);
}

TEST_CASE("init_reverse") {
  const auto& s = default_schedule();
  const Image y0 = constant(0.4, {1, 1, 1});
  CHECK(init_reverse(y0, s, constant(0.0, {1, 1, 1})) == y0);
  Rng rng(31);
  const int n = 100000;
  const auto [m, sd] = moments(n, [&] { return init_reverse(y0, s, rng)[0]; });
  CHECK(std::abs(sd / (2.0 * std::sqrt(0.999)) - 1.0) < 0.02);
  CHECK(std::abs(m - 0.4) < 4 * sd / std::sqrt(n));
}

TEST_CASE("reverse step") {
  const auto& s = default_schedule();
  Rng rng(12);
  const Image xt = random_image({1, 1, 1}, rng), x0 = random_image({1, 1, 1}, rng);
  CHECK(reverse_step(xt, x0, 1, s, rng) == x0);
  CHECK(reverse_step(xt, x0, 6, s, constant(0.0, {1, 1, 1})) == predicted_mean(xt, x0, 6, s));
  const int n = 100000;
  const auto [m, sd] = moments(n, [&] { return reverse_step(xt, x0, 6, s, rng)[0]; });
  const double want = 2.0 * std::sqrt(s.eta(5) / s.eta(6) * s.alpha(6));
  CHECK(posterior_std(6, s) == doctest::Approx(want).epsilon(1e-14));
  CHECK(std::abs(sd / want - 1.0) < 0.02);
}

TEST_CASE("oracle denoiser reproduces x0 exactly") {
  for (int T : {2, 3, 15}) {
    const auto s = build_schedule({T, 0.3, 2.0});
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      Rng setup(seed + 1000);
      const Image x0 = random_image({1, 8, 8}, setup), y0 = random_image({1, 8, 8}, setup);
      int calls = 0;
      Predictor oracle_net = [&](const Image&, const Image&, int) {
        ++calls;
        return x0;
      };
      Rng rng(seed);
      SampleOptions opts;
      opts.clamp = false;
      const Image out = sample(y0, oracle_net, s, rng, opts);
      CHECK(calls == T);
      CHECK(out == x0);
    }
  }
}

TEST_CASE("1-D T=3 chain with an oracle denoiser collapses onto x0") {
  // Expanding the recursion by hand: with x0_hat = x0 every reverse mean is a
  // convex combination of the previous state and x0, and the t=1 step returns
  // x0_hat with no noise, so the random terms never reach the output.
  const auto s = build_schedule({3, 1.0, 2.0});
  const Image x0({1, 1, 1}, 0.25), y0({1, 1, 1}, 0.75);
  std::vector<int> seen;
  SampleOptions opts;
  opts.clamp = false;
  opts.observer = [&](std::size_t, int t, const Image&) { seen.push_back(t); };
  Rng rng(77);
  const Image out =
      sample(y0, [&](const Image&, const Image&, int) { return x0; }, s, rng, opts);
  CHECK(out[0] == 0.25);
  CHECK(seen == std::vector<int>{3, 2, 1, 0});
}

TEST_CASE("sampling is deterministic and clamps") {
  const auto& s = default_schedule();
  Rng setup(6);
  const Image y0 = random_image({1, 4, 4}, setup);
  Predictor noisy = [](const Image& xt, const Image&, int) { return 3.0 * xt; };
  Rng a(1), b(1);
  const Image p = sample(y0, noisy, s, a), q = sample(y0, noisy, s, b);
  CHECK(p == q);
  CHECK(p.within(0.0, 1.0));
}

TEST_CASE("batched sampling matches per-image sampling") {
  const auto& s = default_schedule();
  Rng setup(61);
  std::vector<Image> y0 = {random_image({1, 4, 4}, setup), random_image({1, 4, 4}, setup)};
  Predictor f = [](const Image& xt, const Image& y, int t) { return 0.5 * (xt + y) + (0.01 * t) * y; };
  BatchPredictor fb = [&](std::span<const Image> x, std::span<const Image> y, std::span<const int> t) {
    std::vector<Image> out;
    for (std::size_t i = 0; i < x.size(); ++i) out.push_back(f(x[i], y[i], t[i]));
    return out;
  };
  int calls = 0;
  BatchPredictor counted = [&](auto x, auto y, auto t) {
    ++calls;
    return fb(x, y, t);
  };
  std::vector<Rng> rngs = {Rng(1, 4), Rng(2, 4)};
  const auto batch = sample_batch(y0, counted, s, rngs);
  CHECK(calls == 15);
  for (std::size_t i = 0; i < 2; ++i) {
    Rng r(i + 1, 4);
    CHECK(sample(y0[i], f, s, r) == batch[i]);
  }
}

TEST_CASE("training loss against an independent MSE") {
  const auto& s = default_schedule();
  nn::DenoiserConfig cfg;
  cfg.in_channels = 2;
  cfg.base_width = 4;
  cfg.depth = 1;
  cfg.time_embed_dim = 8;
  nn::Denoiser net(cfg, 3);
  // Give the head nonzero weights so the prediction is not trivially zero.
  Rng init(4);
  for (double& v : net.parameter("out.conv.weight").value.data()) v = 0.1 * init.normal();

  Rng setup(8);
  const Image x0 = random_image({1, 8, 8}, setup), y0 = random_image({1, 8, 8}, setup);
  const int t = 7;
  Rng r1(44), r2(44);
  const double loss = training_loss(x0, y0, t, net, s, r1);
  net.zero_grad();

  const Image xt = sample_marginal(x0, y0, t, s, r2);
  const Image pred = net.predict(xt, y0, t);
  double acc = 0.0;
  for (std::size_t i = 0; i < x0.size(); ++i) acc += (pred[i] - x0[i]) * (pred[i] - x0[i]);
  CHECK(std::abs(loss - acc / x0.size()) < 1e-12);

  Rng r3(44);
  const double weighted = training_loss(x0, y0, t, net, s, r3, true);
  CHECK(weighted == doctest::Approx(loss * loss_weight(s, t)).epsilon(1e-12));
}

TEST_CASE("training loss vanishes for a perfect prediction") {
  // A zero-initialized head predicts exactly 0, which is perfect for x0 = 0.
  const auto& s = default_schedule();
  nn::DenoiserConfig cfg;
  cfg.base_width = 4;
  cfg.depth = 1;
  cfg.time_embed_dim = 8;
  nn::Denoiser net(cfg, 1);
  const Image x0({1, 8, 8}, 0.0);
  Rng setup(2);
  const Image y0 = random_image({1, 8, 8}, setup);
  Rng rng(3);
  CHECK(training_loss(x0, y0, 5, net, s, rng) == 0.0);
  for (auto& p : net.parameters()) {
    for (double g : p.value.grad()) REQUIRE(g == 0.0);
  }
}

TEST_CASE("input conditioning matches a least-squares fit") {
  const auto& s = default_schedule();
  const double var = 0.04;
  const auto cond = input_conditioning(s, var);
  REQUIRE(cond.skip_gain.size() == 15);
  REQUIRE(cond.in_scale.size() == 15);
  for (int t : {1, 5, 15}) {
    const double eta = s.eta(t);
    CHECK(cond.in_scale[t - 1] == doctest::Approx(1.0 / std::sqrt(4.0 * eta + 1.0)).epsilon(1e-14));
    // Regress x0 - y0 on x_t - y0 over simulated pairs with a residual of
    // variance `var`.
    Rng rng(40 + t);
    const Shape shape{1, 16, 16};
    double sxy = 0, sxx = 0;
    for (int k = 0; k < 400; ++k) {
      Image x0(shape), y0(shape);
      for (std::size_t i = 0; i < x0.size(); ++i) {
        y0[i] = rng.uniform();
        x0[i] = y0[i] + std::sqrt(var) * rng.normal();
      }
      const Image xt = sample_marginal(x0, y0, t, s, rng);
      for (std::size_t i = 0; i < x0.size(); ++i) {
        sxy += (x0[i] - y0[i]) * (xt[i] - y0[i]);
        sxx += (xt[i] - y0[i]) * (xt[i] - y0[i]);
      }
    }
    // The residual of the fit has variance at most `var`.
    const double se = std::sqrt(var / sxx);
    CAPTURE(t);
    CHECK(std::abs(cond.skip_gain[t - 1] - sxy / sxx) < 4.0 * se);
  }
  CHECK_THROWS_AS(input_conditioning(s, 0.0), InvalidParameter);
}

TEST_CASE("kl between isotropic gaussians") {
  const GaussianParams p{Image({1, 1, 1}, 0.0), 1.0}, q{Image({1, 1, 1}, 1.0), 1.0};
  CHECK(kl_gaussians(p, p) == 0.0);
  CHECK(kl_gaussians(p, q) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(std::isinf(kl_gaussians({Image({1, 1, 1}, 0.0), 0.0}, q)));
  CHECK_THROWS_AS(kl_gaussians(p, {Image({1, 1, 1}, 0.0), 0.0}), DegenerateDistribution);
  Rng rng(9);
  for (int i = 0; i < 200; ++i) {
    const GaussianParams a{random_image({1, 2, 2}, rng, -2, 2), rng.uniform(0.01, 3)};
    const GaussianParams b{random_image({1, 2, 2}, rng, -2, 2), rng.uniform(0.01, 3)};
    CHECK(kl_gaussians(a, b) >= 0.0);
  }
}

TEST_CASE("diffusion process checks shapes") {
  DiffusionProcess proc(build_schedule({}), {1, 4, 4});
  CHECK_THROWS_AS(proc.marginal(constant(0, {1, 2, 2}), constant(0, {1, 2, 2}), 3), ShapeError);
  const auto g = proc.marginal(constant(0.1), constant(0.3), 15);
  CHECK(g.std == doctest::Approx(2.0 * std::sqrt(0.999)));
}
