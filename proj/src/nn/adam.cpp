#include "resshift/nn/adam.hpp"

#include <cmath>

#include "resshift/error.hpp"

namespace resshift::nn {

void adam_step(std::span<Parameter> params, AdamState& state) {
  if (state.first_moment.empty()) {
    for (const auto& prm : params) {
      state.first_moment.emplace_back(prm.value.numel(), 0.0);
      state.second_moment.emplace_back(prm.value.numel(), 0.0);
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw ShapeError("adam: optimizer state has " + std::to_string(state.first_moment.size()) +
                     " buffers for " + std::to_string(params.size()) + " parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (state.first_moment[i].size() != params[i].value.numel() ||
        state.second_moment[i].size() != params[i].value.numel()) {
      throw ShapeError("adam: moment buffer shape mismatch for " + params[i].name);
    }
    for (double g : params[i].value.grad()) {
      if (!std::isfinite(g)) {
        throw TrainingDivergence("non-finite gradient in parameter " + params[i].name,
                                 params[i].name);
      }
    }
  }

  ++state.step_count;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = params[i].value.data();
    auto g = params[i].value.grad();
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g[j];
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      w[j] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
      g[j] = 0.0;
    }
  }
}

}  // namespace resshift::nn
