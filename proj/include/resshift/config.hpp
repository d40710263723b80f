#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "resshift/data.hpp"
#include "resshift/degrade.hpp"
#include "resshift/nn/denoiser.hpp"
#include "resshift/schedule.hpp"

namespace resshift {

struct TrainConfig {
  std::uint64_t iterations = 20000;
  int batch_size = 16;
  double lr = 5e-5;
  bool weighted_loss = false;
  std::uint64_t checkpoint_every = 5000;  // 0 disables periodic checkpoints
  std::uint64_t log_every = 500;
  std::uint64_t seed = 0;
  // Validation images sampled for the val_psnr log column.
  int val_psnr_images = 32;

  bool operator==(const TrainConfig&) const = default;
};

/// Every knob of a run. The denoiser's in_channels and T are derived from the
/// dataset channels and the schedule by `resolve()`.
struct RunConfig {
  ScheduleParams schedule;
  nn::DenoiserConfig denoiser;
  DegradationConfig degradation;
  ToyDatasetSpec dataset;
  TrainConfig train;

  RunConfig();

  void resolve();
  // Cross-field checks; throws UsageError describing the first problem.
  void validate() const;

  // Sets one `section.key` entry from its text value; UsageError on unknown
  // keys or malformed values.
  void set(const std::string& key, const std::string& value);
  // Current values as config-file text, one `section.key = value` per line.
  std::string to_text() const;

  bool operator==(const RunConfig&) const = default;
};

// Seed from RESSHIFT_SEED when set and valid, else `fallback`.
std::uint64_t default_seed(std::uint64_t fallback = 0);

/// Applies a config file's entries on top of `cfg`.
///
/// Format: one `section.key = value` per line; `#` starts a comment; blank
/// lines are ignored. Errors name the line.
void apply_config_text(RunConfig& cfg, const std::string& text);
void apply_config_file(RunConfig& cfg, const std::filesystem::path& path);

std::vector<std::string> config_keys();

}  // namespace resshift
