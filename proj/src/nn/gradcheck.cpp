#include "resshift/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "resshift/error.hpp"
#include "resshift/nn/ops.hpp"

namespace resshift::nn {

const GradCheckGroup& GradCheckReport::worst() const {
  if (groups.empty()) throw InvalidParameter("gradient check report is empty");
  return *std::max_element(groups.begin(), groups.end(), [](const auto& a, const auto& b) {
    return a.rel_error < b.rel_error;
  });
}

bool GradCheckReport::passed(double tolerance) const {
  return std::all_of(groups.begin(), groups.end(),
                     [&](const GradCheckGroup& g) { return g.rel_error < tolerance; });
}

GradCheckReport check_denoiser_gradients(const DenoiserConfig& cfg, const GradCheckOptions& opts) {
  Denoiser net(cfg, opts.seed);
  Rng rng(opts.seed, 1);
  for (const char* name : {"out.conv.weight", "out.conv.bias"}) {
    for (double& v : net.parameter(name).value.data()) v = 0.3 * rng.normal();
  }
  // Move norms and biases off their trivial initial values.
  for (auto& prm : net.parameters()) {
    if (prm.name.ends_with(".bias") || prm.name.ends_with(".beta") ||
        prm.name.ends_with(".gamma")) {
      for (double& v : prm.value.data()) v += 0.1 * rng.normal();
    }
  }

  const int C = cfg.image_channels();
  const std::vector<int> shape = {opts.batch, C, opts.height, opts.width};
  Tensor x_t(shape), y0(shape), target(shape);
  for (double& v : x_t.data()) v = rng.normal();
  for (double& v : y0.data()) v = rng.uniform();
  for (double& v : target.data()) v = rng.uniform();
  std::vector<int> steps;
  for (int i = 0; i < opts.batch; ++i) steps.push_back(1 + static_cast<int>(rng.below(cfg.steps)));

  net.zero_grad();
  mse_loss(net.forward(x_t, y0, steps), target).backward();

  auto loss_value = [&]() {
    NoGradGuard guard;
    return mse_loss(net.forward(x_t, y0, steps), target).item();
  };

  GradCheckReport report;
  for (auto& prm : net.parameters()) {
    auto data = prm.value.data();
    const std::vector<double> analytic(prm.value.grad().begin(), prm.value.grad().end());
    std::size_t count = data.size();
    std::size_t stride = 1;
    if (opts.max_entries_per_group > 0 && count > opts.max_entries_per_group) {
      stride = (count + opts.max_entries_per_group - 1) / opts.max_entries_per_group;
    }
    double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
    std::size_t checked = 0;
    for (std::size_t i = 0; i < count; i += stride) {
      const double saved = data[i];
      data[i] = saved + opts.step;
      const double up = loss_value();
      data[i] = saved - opts.step;
      const double down = loss_value();
      data[i] = saved;
      const double numeric = (up - down) / (2.0 * opts.step);
      diff2 += (analytic[i] - numeric) * (analytic[i] - numeric);
      a2 += analytic[i] * analytic[i];
      n2 += numeric * numeric;
      ++checked;
    }
    const double scale = std::sqrt(std::max(a2, n2));
    GradCheckGroup g;
    g.name = prm.name;
    g.entries = checked;
    g.rel_error = scale > 0.0 ? std::sqrt(diff2) / scale : 0.0;
    report.groups.push_back(g);
  }
  return report;
}

}  // namespace resshift::nn
