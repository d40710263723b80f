#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "resshift/image.hpp"
#include "resshift/nn/tensor.hpp"

namespace resshift::nn {

struct Parameter {
  std::string name;
  Tensor value;
};

struct DenoiserConfig {
  int in_channels = 2;      // x_t and y0 concatenated: 2 * image channels
  int base_width = 32;      // channels at full resolution; level l has base_width * 2^l
  int depth = 2;            // number of down/up levels
  int time_embed_dim = 64;  // sinusoidal embedding size (even)
  int steps = 15;           // T

  int image_channels() const { return in_channels / 2; }
  int width_at(int level) const { return base_width << level; }
  void validate() const;
  // Throws ShapeError unless height and width are divisible by 2^depth.
  void check_spatial(int height, int width) const;
  bool operator==(const DenoiserConfig&) const = default;
};

/// Number of scalar parameters for `cfg`. With C = image channels, E the
/// embedding size and c_l = base_width * 2^l:
///   conv_in   9*2C*c_0 + c_0
///   time      E*E + E
///   enc_l     2c_l + (9c_l^2 + c_l) + (E c_l + c_l)          l < depth
///   down_l    9 c_l c_{l+1} + c_{l+1}                          l < depth
///   mid       the enc block formula at c_depth
///   dec_l     (c_{l+1} c_l + c_l) + 4c_l + (18c_l^2 + c_l) + (E c_l + c_l)
///   out       9 (c_0 + 2C) C + C
std::size_t parameter_count(const DenoiserConfig& cfg);

// [sin(t w_0) .. sin(t w_{d/2-1}), cos(t w_0) .. cos(t w_{d/2-1})], w_i = 10000^(-2i/d).
std::vector<double> time_embedding(int t, int dim);

Tensor images_to_tensor(std::span<const Image> images);
std::vector<Image> tensor_to_images(const Tensor& t);

/// Per-timestep input conditioning, indexed by t-1. The body sees
/// (in_scale[t] x_t, y0); the head skip sees (y0 + skip_gain[t] (x_t - y0), y0).
/// Empty vectors mean unit gains, i.e. raw x_t on both paths.
struct InputConditioning {
  std::vector<double> in_scale;
  std::vector<double> skip_gain;
};

/// Small convolutional UNet f(x_t, y0, t) predicting x0.
///
/// Encoder levels are pre-activation residual blocks (GroupNorm, SiLU, 3x3
/// conv) followed by a stride-2 conv; the decoder reduces channels with a 1x1
/// conv, upsamples by nearest neighbour, concatenates the skip and applies
/// GroupNorm, SiLU and a 3x3 conv. Every block adds a learned linear map of the
/// shared time embedding to its features. The head is a 3x3 conv over the
/// SiLU of the last features concatenated with the skip input; it is
/// zero-initialized so the untrained network predicts 0.
class Denoiser {
 public:
  Denoiser(const DenoiserConfig& cfg, std::uint64_t seed);

  const DenoiserConfig& config() const { return cfg_; }
  const InputConditioning& conditioning() const { return cond_; }
  // Vectors must be empty or have T entries.
  void set_conditioning(InputConditioning cond);

  // x_t, y0: [N,C,H,W]; steps: one t per sample.
  Tensor forward(const Tensor& x_t, const Tensor& y0, std::span<const int> steps);

  // Batched inference without graph recording.
  std::vector<Image> predict(std::span<const Image> x_t, std::span<const Image> y0,
                             std::span<const int> steps);
  Image predict(const Image& x_t, const Image& y0, int t);

  std::vector<Parameter>& parameters() { return params_; }
  const std::vector<Parameter>& parameters() const { return params_; }
  Parameter& parameter(const std::string& name);
  std::size_t parameter_count() const;
  void zero_grad();

  // Number of forward passes since construction; a batched call counts once.
  std::uint64_t evaluation_count() const { return evaluations_; }

 private:
  Tensor& p(std::size_t index) { return params_[index].value; }
  std::size_t add(const std::string& name, std::vector<int> shape, double init_std,
                  double fill, Rng& rng);

  struct NormConvTemb {
    std::size_t gamma, beta, conv_w, conv_b, temb_w, temb_b;
  };

  Tensor norm_conv_temb(const Tensor& h, const Tensor& emb, const NormConvTemb& b, int groups);

  DenoiserConfig cfg_;
  InputConditioning cond_;
  std::vector<Parameter> params_;
  std::size_t conv_in_w_ = 0, conv_in_b_ = 0, time_w_ = 0, time_b_ = 0;
  std::vector<NormConvTemb> enc_;
  std::vector<std::size_t> down_w_, down_b_;
  NormConvTemb mid_{};
  std::vector<std::size_t> reduce_w_, reduce_b_;
  std::vector<NormConvTemb> dec_;
  std::size_t out_w_ = 0, out_b_ = 0;
  std::uint64_t evaluations_ = 0;
};

// Groups used by every GroupNorm with `channels` channels.
int norm_groups(int channels);

}  // namespace resshift::nn
