#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "resshift/nn/denoiser.hpp"

namespace resshift::nn {

struct GradCheckGroup {
  std::string name;
  std::size_t entries = 0;
  // ||analytic - numeric||_2 / max(||analytic||_2, ||numeric||_2)
  double rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckGroup> groups;
  const GradCheckGroup& worst() const;
  bool passed(double tolerance) const;
};

struct GradCheckOptions {
  int batch = 2;
  int height = 8;
  int width = 8;
  double step = 1e-5;
  std::uint64_t seed = 7;
  // 0 checks every entry of every parameter group.
  std::size_t max_entries_per_group = 0;
};

/// Compares backprop gradients of an MSE loss through the full denoiser with
/// central finite differences, one report entry per named parameter. The
/// zero-initialized output conv is re-randomized so every upstream group
/// receives a non-trivial gradient.
GradCheckReport check_denoiser_gradients(const DenoiserConfig& cfg, const GradCheckOptions& opts);

}  // namespace resshift::nn
