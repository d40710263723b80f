#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "resshift/config.hpp"
#include "resshift/data.hpp"
#include "resshift/imageio.hpp"
#include "resshift/nn/adam.hpp"
#include "resshift/nn/denoiser.hpp"
#include "resshift/schedule.hpp"

namespace resshift {

// Sampling noise for validation image `id` under `seed`.
Rng sample_rng(std::uint64_t seed, std::size_t id);

// Samples SR outputs for `y0` in chunks, image i drawing from sample_rng(seed, ids[i]).
std::vector<Image> sample_images(nn::Denoiser& net, const NoiseSchedule& schedule,
                                 std::span<const Image> y0, std::span<const std::size_t> ids,
                                 std::uint64_t seed);

/// Training state for one run: data, network, optimizer and step counter.
///
/// Step k draws its timesteps and marginal noise from streams derived from
/// (train seed, k) and its batch from the data stream, so any step can be
/// reproduced after a resume.
class Trainer {
 public:
  explicit Trainer(const RunConfig& cfg);
  Trainer(const Trainer&) = delete;
  Trainer& operator=(const Trainer&) = delete;

  const RunConfig& config() const { return cfg_; }
  const NoiseSchedule& schedule() const { return schedule_; }
  const ValidationSet& validation() const { return val_; }
  nn::Denoiser& net() { return net_; }
  const nn::AdamState& optimizer() const { return adam_; }
  std::uint64_t step_count() const { return step_; }

  // Loss on batch `step_count()`; with `update` the gradients are applied and
  // the counter advances.
  double step(bool update = true);

  // Mean training objective on the whole validation split with fixed
  // timesteps (1 + i mod T) and fixed noise; paired across steps and runs.
  double validation_loss();
  // Mean PSNR of sampled outputs on the first `count` validation images.
  double validation_psnr(int count);

  Checkpoint checkpoint() const;
  // Restores parameters, optimizer and step; the checkpoint must match the config.
  void resume(const Checkpoint& ckpt);

 private:
  RunConfig cfg_;
  NoiseSchedule schedule_;
  ToyDataset data_;
  ValidationSet val_;
  BatchStream stream_;
  nn::Denoiser net_;
  nn::AdamState adam_;
  std::uint64_t step_ = 0;
};

struct TrainSummary {
  std::uint64_t steps = 0;
  double first_val_loss = 0.0;  // at the first logged row of this invocation
  double last_val_loss = 0.0;
  double last_val_psnr = 0.0;
  std::filesystem::path checkpoint;
};

/// Runs cfg.train.iterations total steps, writing into `out_dir`:
///   train_log.csv          step,loss,val_psnr,val_loss rows every log_every
///                          steps and at the end
///   ckpt_<step>.rskt       every checkpoint_every steps
///   model.rskt             final state
/// With `resume` the run continues from that checkpoint and appends to the log.
/// Progress lines prefixed with '#' go to `progress`.
TrainSummary run_training(const RunConfig& cfg, const std::filesystem::path& out_dir,
                          const std::optional<std::filesystem::path>& resume,
                          std::ostream& progress);

}  // namespace resshift
