#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "resshift/degrade.hpp"
#include "resshift/image.hpp"

namespace resshift {

enum class Pattern { gradient, checker, blob, stripes };
inline constexpr std::size_t kPatternCount = 4;
const char* to_string(Pattern pattern);

struct ToyDatasetSpec {
  int count = 2200;  // total images, split into train and validation
  int val_count = 200;
  int height = 32;
  int width = 32;
  int channels = 1;
  // Relative weights for gradient, checker, blob, stripes.
  std::array<double, kPatternCount> pattern_mix{1.0, 1.0, 1.0, 1.0};
  std::uint64_t seed = 1234;

  // `divisor` is the product constraint from the model and degradation
  // (2^depth and the scale factor); both image dims must be multiples of it.
  void validate(int divisor = 1) const;
  Shape shape() const { return {channels, height, width}; }
  bool operator==(const ToyDatasetSpec&) const = default;
};

struct ToyImage {
  Image image;
  Pattern pattern;
};

/// Image `index` of the procedural set. A pure function of (spec, index):
///   gradient  linear ramp at a random angle between two random levels
///   checker   squares of side 2, 4 or 8 with random phase and two levels
///   blob      background plus 1-4 Gaussian blobs, clamped to [0,1]
///   stripes   sinusoid of random frequency, angle, phase and contrast
/// Colour images draw independent levels per channel.
ToyImage generate_image(const ToyDatasetSpec& spec, std::size_t index);
std::vector<ToyImage> generate(const ToyDatasetSpec& spec);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
};

// Ranks indices by a hash of (seed, index); the val_count lowest ranks form
// the validation split. Both lists are returned in ascending index order.
Split split_indices(const ToyDatasetSpec& spec);

/// Training and validation sets materialized from a spec.
struct ToyDataset {
  ToyDatasetSpec spec;
  std::vector<Image> train;
  std::vector<Image> val;
  std::vector<std::size_t> train_ids;  // dataset index of each train image
  std::vector<std::size_t> val_ids;
};

ToyDataset make_dataset(const ToyDatasetSpec& spec);

struct Batch {
  std::vector<Image> x0;
  std::vector<Image> y0;
  std::vector<std::size_t> ids;  // dataset indices
};

// Degradation stream for one example in one epoch.
std::uint64_t example_seed(std::uint64_t dataset_seed, std::size_t index, std::uint64_t epoch);

// Epoch used to derive the fixed degradations of the validation split.
inline constexpr std::uint64_t kValidationEpoch = ~std::uint64_t{0};

// Degrades dataset image `index` as seen in `epoch`.
Degraded degrade_example(const Image& hr, const DegradationConfig& cfg,
                         std::uint64_t dataset_seed, std::size_t index, std::uint64_t epoch);

/// Deterministic mini-batches over a training set.
///
/// Each epoch visits a fresh permutation (seeded by the dataset seed and the
/// epoch) in floor(n / batch_size) full batches; the remainder is dropped.
/// Batch k is addressable directly, so a resumed run sees the same data.
class BatchStream {
 public:
  BatchStream(const ToyDataset& data, int batch_size, DegradationConfig degradation);

  std::size_t batches_per_epoch() const { return per_epoch_; }
  Batch batch(std::uint64_t k);
  // Every batch of one epoch, in order.
  std::vector<Batch> epoch(std::uint64_t e);

 private:
  const std::vector<std::size_t>& order(std::uint64_t epoch);

  const ToyDataset& data_;
  int batch_size_;
  DegradationConfig degradation_;
  std::size_t per_epoch_;
  std::uint64_t cached_epoch_ = ~std::uint64_t{0};
  std::vector<std::size_t> order_;
};

// Permutation of 0..n-1 for an epoch.
std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::uint64_t epoch);

/// Validation pairs degraded once with fixed per-example seeds.
struct ValidationSet {
  std::vector<Image> hr;
  std::vector<Image> lr;
  std::vector<Image> y0;
  std::vector<std::size_t> ids;
};

ValidationSet make_validation(const ToyDataset& data, const DegradationConfig& degradation);

// Extension used for an image with `channels` channels: .pgm or .ppm.
const char* netpbm_extension(int channels);

// Writes {dir}/{split}/{index}_hr.{ext} and {index}_lr.{ext}.
void export_pairs(const std::filesystem::path& dir, const std::string& split,
                  std::span<const std::size_t> ids, std::span<const Image> hr,
                  std::span<const Image> lr);

}  // namespace resshift
