#pragma once

#include <span>
#include <vector>

#include "resshift/nn/tensor.hpp"

namespace resshift::nn {

// All image tensors are laid out NCHW.

/// 2-D cross-correlation with zero "same" padding (pad = k/2).
/// x: [N,Cin,H,W], weight: [Cout,Cin,k,k] with k odd, bias: [Cout].
/// Output: [N,Cout,ceil(H/stride),ceil(W/stride)].
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, int stride = 1);

// x: [N,in], weight: [out,in], bias: [out] -> [N,out]
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

// x * sigmoid(x)
Tensor silu(const Tensor& x);

// Normalizes each (sample, channel group) to zero mean / unit variance, then
// applies a per-channel affine map. x: [N,C,H,W], gamma/beta: [C].
Tensor group_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, int groups,
                  double eps = 1e-5);

Tensor add(const Tensor& a, const Tensor& b);
// x: [N,C,H,W] plus v: [N,C] broadcast over H,W.
Tensor add_channel_bias(const Tensor& x, const Tensor& v);
Tensor upsample_nearest2x(const Tensor& x);
Tensor concat_channels(const Tensor& a, const Tensor& b);

/// Scalar (1/N) * sum_n weight_n * mean_over_elements((pred_n - target_n)^2).
/// `target` is treated as a constant. Empty `sample_weights` means all ones.
Tensor mse_loss(const Tensor& pred, const Tensor& target,
                std::span<const double> sample_weights = {});

// Scalar sum_i x_i * coeffs_i; coeffs are constants. Handy for gradient probes.
Tensor inner(const Tensor& x, std::span<const double> coeffs);

namespace testing {
// Negative-control hook: when on, conv2d scales its weight gradient by 1.01.
void set_corrupt_conv_backward(bool on);
}  // namespace testing

}  // namespace resshift::nn
