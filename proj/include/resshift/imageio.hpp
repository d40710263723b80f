#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "resshift/image.hpp"
#include "resshift/nn/adam.hpp"
#include "resshift/nn/denoiser.hpp"
#include "resshift/schedule.hpp"

namespace resshift {

// Binary PGM (P5) or PPM (P6) with maxval 255; values are v / 255.
// Header comments (#) are accepted. Errors carry the byte offset.
Image decode_image(const std::string& bytes);
Image read_image(const std::filesystem::path& path);

// Quantizes with floor(v * 255 + 0.5) and emits `P5\n{W} {H}\n255\n` (or P6)
// followed by the raw samples. Only 1 and 3 channels are representable.
// Values outside [0,1] raise RangeError.
std::string encode_image(const Image& img);
void write_image(const Image& img, const std::filesystem::path& path);

struct NamedTensor {
  std::string name;
  std::vector<int> shape;
  std::vector<double> data;

  bool operator==(const NamedTensor&) const = default;
};

/// Everything needed to restore a training run.
///
/// Binary layout, all integers little-endian:
///   "RSKT"  u32 version
///   u32 in_channels, base_width, depth, time_embed_dim, steps
///   u32 T, f64 p, f64 kappa
///   u64 train_step, u64 seed
///   u8 has_adam [u64 step_count, f64 lr, beta1, beta2, eps]
///   u32 record count, then per record:
///     u32 name length, name bytes, u32 rank, u32 dims[rank], f64 payload
/// Adam moments are stored as records named adam.m/<param> and adam.v/<param>.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  std::uint32_t format_version = kVersion;
  nn::DenoiserConfig denoiser;
  ScheduleParams schedule;
  std::uint64_t train_step = 0;
  std::uint64_t seed = 0;
  std::vector<NamedTensor> tensors;
  std::optional<nn::AdamState> adam;

  bool operator==(const Checkpoint&) const = default;
};

Checkpoint make_checkpoint(const nn::Denoiser& net, const ScheduleParams& schedule,
                           std::uint64_t train_step, std::uint64_t seed,
                           const nn::AdamState* adam);

// Copies parameters (and optimizer moments when `adam` is given) into place.
// Every parameter must be present with a matching shape.
void restore(const Checkpoint& ckpt, nn::Denoiser& net, nn::AdamState* adam);

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::string& bytes);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Throws ConfigConflict if the checkpoint's schedule disagrees with `expected`.
void require_matching_schedule(const Checkpoint& ckpt, const ScheduleParams& expected);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& bytes);

}  // namespace resshift
