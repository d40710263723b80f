#include "resshift/nn/denoiser.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "resshift/error.hpp"
#include "resshift/nn/ops.hpp"

namespace resshift::nn {

int norm_groups(int channels) { return std::min(8, channels); }

void DenoiserConfig::validate() const {
  if (in_channels <= 0 || in_channels % 2 != 0) {
    throw InvalidParameter("denoiser: in_channels must be a positive even number");
  }
  // GroupNorm uses min(8, channels) groups, which must divide every width.
  if (base_width <= 0 || base_width % norm_groups(base_width) != 0) {
    throw InvalidParameter("denoiser: base_width must be at most 8 or a multiple of 8");
  }
  if (depth < 1) throw InvalidParameter("denoiser: depth must be >= 1");
  if (time_embed_dim <= 0 || time_embed_dim % 2 != 0) {
    throw InvalidParameter("denoiser: time_embed_dim must be positive and even");
  }
  if (steps < 2) throw InvalidParameter("denoiser: T must be >= 2");
}

void DenoiserConfig::check_spatial(int height, int width) const {
  const int m = 1 << depth;
  if (height % m != 0 || width % m != 0) {
    throw ShapeError("denoiser: spatial size " + std::to_string(height) + "x" +
                     std::to_string(width) + " not divisible by 2^depth = " + std::to_string(m));
  }
}

std::size_t parameter_count(const DenoiserConfig& cfg) {
  const std::size_t C = cfg.image_channels();
  const std::size_t E = cfg.time_embed_dim;
  auto c = [&](int l) { return static_cast<std::size_t>(cfg.width_at(l)); };
  std::size_t n = 9 * 2 * C * c(0) + c(0);
  n += E * E + E;
  auto block = [&](std::size_t w) { return 2 * w + 9 * w * w + w + E * w + w; };
  for (int l = 0; l < cfg.depth; ++l) {
    n += block(c(l));
    n += 9 * c(l) * c(l + 1) + c(l + 1);
  }
  n += block(c(cfg.depth));
  for (int l = 0; l < cfg.depth; ++l) {
    n += c(l + 1) * c(l) + c(l);
    n += 4 * c(l) + 18 * c(l) * c(l) + c(l) + E * c(l) + c(l);
  }
  n += 9 * (c(0) + 2 * C) * C + C;
  return n;
}

std::vector<double> time_embedding(int t, int dim) {
  if (dim <= 0 || dim % 2 != 0) {
    throw InvalidParameter("time_embedding: dim must be positive and even, got " +
                           std::to_string(dim));
  }
  const int half = dim / 2;
  std::vector<double> out(static_cast<std::size_t>(dim));
  for (int i = 0; i < half; ++i) {
    const double freq = std::pow(10000.0, -2.0 * i / dim);
    out[i] = std::sin(t * freq);
    out[half + i] = std::cos(t * freq);
  }
  return out;
}

Tensor images_to_tensor(std::span<const Image> images) {
  if (images.empty()) throw ShapeError("images_to_tensor: empty batch");
  const Shape s = images[0].shape();
  std::vector<double> data;
  data.reserve(images.size() * s.size());
  for (const Image& im : images) {
    if (im.shape() != s) throw ShapeError("images_to_tensor: mixed shapes in batch");
    data.insert(data.end(), im.values().begin(), im.values().end());
  }
  return Tensor({static_cast<int>(images.size()), s.channels, s.height, s.width},
                std::move(data));
}

std::vector<Image> tensor_to_images(const Tensor& t) {
  if (t.rank() != 4) throw ShapeError("tensor_to_images: expected rank 4");
  const Shape s{t.dim(1), t.dim(2), t.dim(3)};
  std::vector<Image> out;
  out.reserve(static_cast<std::size_t>(t.dim(0)));
  const auto d = t.data();
  for (int n = 0; n < t.dim(0); ++n) {
    out.emplace_back(s, std::vector<double>(d.begin() + n * s.size(), d.begin() + (n + 1) * s.size()));
  }
  return out;
}

std::size_t Denoiser::add(const std::string& name, std::vector<int> shape, double init_std,
                          double fill, Rng& rng) {
  Tensor t(std::move(shape), fill, true);
  if (init_std > 0.0) {
    for (double& v : t.data()) v = init_std * rng.normal();
  }
  params_.push_back({name, t});
  return params_.size() - 1;
}

Denoiser::Denoiser(const DenoiserConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(seed);
  const int C = cfg_.image_channels();
  const int E = cfg_.time_embed_dim;
  auto he = [](int fan_in) { return std::sqrt(2.0 / fan_in); };
  auto conv = [&](const std::string& name, int cout, int cin, int k, std::size_t& w,
                  std::size_t& b) {
    w = add(name + ".weight", {cout, cin, k, k}, he(cin * k * k), 0.0, rng);
    b = add(name + ".bias", {cout}, 0.0, 0.0, rng);
  };
  auto block = [&](const std::string& name, int cin, int cout) {
    NormConvTemb b{};
    b.gamma = add(name + ".norm.gamma", {cin}, 0.0, 1.0, rng);
    b.beta = add(name + ".norm.beta", {cin}, 0.0, 0.0, rng);
    conv(name + ".conv", cout, cin, 3, b.conv_w, b.conv_b);
    b.temb_w = add(name + ".temb.weight", {cout, E}, he(E), 0.0, rng);
    b.temb_b = add(name + ".temb.bias", {cout}, 0.0, 0.0, rng);
    return b;
  };

  conv("conv_in", cfg_.width_at(0), 2 * C, 3, conv_in_w_, conv_in_b_);
  time_w_ = add("time.weight", {E, E}, he(E), 0.0, rng);
  time_b_ = add("time.bias", {E}, 0.0, 0.0, rng);
  for (int l = 0; l < cfg_.depth; ++l) {
    const int w = cfg_.width_at(l);
    enc_.push_back(block("enc" + std::to_string(l), w, w));
    std::size_t dw, db;
    conv("down" + std::to_string(l), cfg_.width_at(l + 1), w, 3, dw, db);
    down_w_.push_back(dw);
    down_b_.push_back(db);
  }
  mid_ = block("mid", cfg_.width_at(cfg_.depth), cfg_.width_at(cfg_.depth));
  reduce_w_.resize(cfg_.depth);
  reduce_b_.resize(cfg_.depth);
  dec_.resize(cfg_.depth);
  for (int l = cfg_.depth - 1; l >= 0; --l) {
    const int w = cfg_.width_at(l);
    const std::string name = "dec" + std::to_string(l);
    conv(name + ".reduce", w, cfg_.width_at(l + 1), 1, reduce_w_[l], reduce_b_[l]);
    dec_[l] = block(name, 2 * w, w);
  }
  out_w_ = add("out.conv.weight", {C, cfg_.width_at(0) + 2 * C, 3, 3}, 0.0, 0.0, rng);
  out_b_ = add("out.conv.bias", {C}, 0.0, 0.0, rng);
}

void Denoiser::set_conditioning(InputConditioning cond) {
  for (const auto* v : {&cond.in_scale, &cond.skip_gain}) {
    if (!v->empty() && v->size() != static_cast<std::size_t>(cfg_.steps)) {
      throw ShapeError("denoiser: conditioning needs " + std::to_string(cfg_.steps) + " entries");
    }
  }
  cond_ = std::move(cond);
}

Parameter& Denoiser::parameter(const std::string& name) {
  for (auto& prm : params_) {
    if (prm.name == name) return prm;
  }
  throw InvalidParameter("denoiser has no parameter named " + name);
}

std::size_t Denoiser::parameter_count() const {
  std::size_t n = 0;
  for (const auto& prm : params_) n += prm.value.numel();
  return n;
}

void Denoiser::zero_grad() {
  for (auto& prm : params_) prm.value.zero_grad();
}

Tensor Denoiser::norm_conv_temb(const Tensor& h, const Tensor& emb, const NormConvTemb& b,
                                int groups) {
  Tensor r = silu(group_norm(h, p(b.gamma), p(b.beta), groups));
  r = conv2d(r, p(b.conv_w), p(b.conv_b));
  return add_channel_bias(r, linear(emb, p(b.temb_w), p(b.temb_b)));
}

Tensor Denoiser::forward(const Tensor& x_t, const Tensor& y0, std::span<const int> steps) {
  if (x_t.rank() != 4 || x_t.shape() != y0.shape()) {
    throw ShapeError("denoiser: x_t " + shape_str(x_t.shape()) + " and y0 " +
                     shape_str(y0.shape()) + " must be matching [N,C,H,W] tensors");
  }
  if (x_t.dim(1) != cfg_.image_channels()) {
    throw ShapeError("denoiser: expected " + std::to_string(cfg_.image_channels()) +
                     " image channels, got " + std::to_string(x_t.dim(1)));
  }
  cfg_.check_spatial(x_t.dim(2), x_t.dim(3));
  const int n = x_t.dim(0);
  if (steps.size() != static_cast<std::size_t>(n)) {
    throw ShapeError("denoiser: one timestep per sample required");
  }
  const int E = cfg_.time_embed_dim;
  std::vector<double> emb_data;
  emb_data.reserve(static_cast<std::size_t>(n) * E);
  for (int t : steps) {
    if (t < 1 || t > cfg_.steps) {
      throw StepError("denoiser: step " + std::to_string(t) + " outside 1.." +
                      std::to_string(cfg_.steps));
    }
    const auto e = time_embedding(t, E);
    emb_data.insert(emb_data.end(), e.begin(), e.end());
  }
  ++evaluations_;

  const Tensor emb = silu(linear(Tensor({n, E}, std::move(emb_data)), p(time_w_), p(time_b_)));
  // The conditioned inputs are constants of the graph; no gradient flows to x_t.
  auto mix = [&](const std::vector<double>& gain, auto&& f) {
    if (gain.empty()) return x_t;
    const auto xs = x_t.data();
    const auto ys = y0.data();
    const std::size_t per = xs.size() / n;
    std::vector<double> out(xs.size());
    for (int i = 0; i < n; ++i) {
      const double g = gain[steps[i] - 1];
      for (std::size_t j = i * per; j < (i + 1) * per; ++j) out[j] = f(g, xs[j], ys[j]);
    }
    return Tensor(x_t.shape(), std::move(out));
  };
  const Tensor x_in = mix(cond_.in_scale, [](double g, double x, double) { return g * x; });
  const Tensor x_skip =
      mix(cond_.skip_gain, [](double g, double x, double y) { return y + g * (x - y); });

  Tensor h = conv2d(concat_channels(x_in, y0), p(conv_in_w_), p(conv_in_b_));
  std::vector<Tensor> skips;
  for (int l = 0; l < cfg_.depth; ++l) {
    h = nn::add(h, norm_conv_temb(h, emb, enc_[l], norm_groups(cfg_.width_at(l))));
    skips.push_back(h);
    h = conv2d(h, p(down_w_[l]), p(down_b_[l]), 2);
  }
  h = nn::add(h, norm_conv_temb(h, emb, mid_, norm_groups(cfg_.width_at(cfg_.depth))));
  for (int l = cfg_.depth - 1; l >= 0; --l) {
    h = upsample_nearest2x(conv2d(h, p(reduce_w_[l]), p(reduce_b_[l])));
    h = concat_channels(h, skips[l]);
    h = norm_conv_temb(h, emb, dec_[l], norm_groups(2 * cfg_.width_at(l)));
  }
  // No norm here: with one channel per group it would cancel the last
  // block's per-channel bias and time injection. The skip inputs reach the
  // head directly so near-identity maps are cheap to learn.
  return conv2d(concat_channels(silu(h), concat_channels(x_skip, y0)), p(out_w_), p(out_b_));
}

std::vector<Image> Denoiser::predict(std::span<const Image> x_t, std::span<const Image> y0,
                                     std::span<const int> steps) {
  if (x_t.size() != y0.size()) throw ShapeError("denoiser: batch size mismatch");
  NoGradGuard guard;
  return tensor_to_images(forward(images_to_tensor(x_t), images_to_tensor(y0), steps));
}

Image Denoiser::predict(const Image& x_t, const Image& y0, int t) {
  require_same_shape(x_t, y0, "denoiser");
  const int steps[] = {t};
  return predict(std::span<const Image>(&x_t, 1), std::span<const Image>(&y0, 1), steps)[0];
}

}  // namespace resshift::nn
