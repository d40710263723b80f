#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "resshift/nn/denoiser.hpp"

namespace resshift::nn {

struct AdamState {
  std::uint64_t step_count = 0;
  double lr = 5e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // One buffer per parameter, in parameter order. Empty until the first step.
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;

  bool operator==(const AdamState&) const = default;
};

/// One bias-corrected Adam update of every parameter from its accumulated
/// gradient, then zeroes the gradients. If any gradient is non-finite nothing
/// is updated and TrainingDivergence names the offending parameter.
void adam_step(std::span<Parameter> params, AdamState& state);

}  // namespace resshift::nn
