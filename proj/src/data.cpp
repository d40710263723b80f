#include "resshift/data.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "resshift/error.hpp"
#include "resshift/imageio.hpp"

namespace resshift {

namespace {

// Stream ids keep the draws for different purposes independent under one seed.
constexpr std::uint64_t kPatternStream = 1;
constexpr std::uint64_t kSplitSalt = 0x5eed5917;
constexpr std::uint64_t kShuffleStream = 2;
constexpr std::uint64_t kDegradeStream = 3;

constexpr double kTwoPi = 2.0 * std::numbers::pi;

Pattern pick_pattern(const std::array<double, kPatternCount>& mix, Rng& rng) {
  const double total = std::accumulate(mix.begin(), mix.end(), 0.0);
  double u = rng.uniform() * total;
  for (std::size_t i = 0; i + 1 < kPatternCount; ++i) {
    if (u < mix[i]) return static_cast<Pattern>(i);
    u -= mix[i];
  }
  // Rounding can leave u marginally past the last boundary; fall back to the
  // last pattern with nonzero weight.
  for (std::size_t i = kPatternCount; i-- > 0;) {
    if (mix[i] > 0.0) return static_cast<Pattern>(i);
  }
  return Pattern::gradient;
}

void fill_gradient(Image& img, Rng& rng) {
  const double theta = rng.uniform(0.0, kTwoPi);
  const double ux = std::cos(theta);
  const double uy = std::sin(theta);
  // Project the corners to normalize the ramp to [0,1] across the image.
  const double cx = 0.5 * (img.width() - 1);
  const double cy = 0.5 * (img.height() - 1);
  const double extent = std::abs(ux) * cx + std::abs(uy) * cy;
  for (int c = 0; c < img.channels(); ++c) {
    const double a = rng.uniform();
    const double b = rng.uniform();
    for (int y = 0; y < img.height(); ++y) {
      for (int x = 0; x < img.width(); ++x) {
        const double s = extent > 0.0 ? 0.5 + 0.5 * ((x - cx) * ux + (y - cy) * uy) / extent : 0.5;
        img.at(c, y, x) = a + (b - a) * s;
      }
    }
  }
}

void fill_checker(Image& img, Rng& rng) {
  constexpr int kSides[] = {2, 4, 8};
  const int side = kSides[rng.below(3)];
  const int px = static_cast<int>(rng.below(2 * side));
  const int py = static_cast<int>(rng.below(2 * side));
  for (int c = 0; c < img.channels(); ++c) {
    const double lo = rng.uniform();
    const double hi = rng.uniform();
    for (int y = 0; y < img.height(); ++y) {
      for (int x = 0; x < img.width(); ++x) {
        const bool odd = (((x + px) / side) + ((y + py) / side)) % 2 != 0;
        img.at(c, y, x) = odd ? hi : lo;
      }
    }
  }
}

void fill_blobs(Image& img, Rng& rng) {
  const int n = 1 + static_cast<int>(rng.below(4));
  std::vector<double> background(img.channels());
  for (double& b : background) b = rng.uniform(0.0, 0.3);
  for (int c = 0; c < img.channels(); ++c) {
    for (int y = 0; y < img.height(); ++y) {
      for (int x = 0; x < img.width(); ++x) img.at(c, y, x) = background[c];
    }
  }
  const double size = std::min(img.height(), img.width());
  for (int k = 0; k < n; ++k) {
    const double bx = rng.uniform(0.0, img.width() - 1.0);
    const double by = rng.uniform(0.0, img.height() - 1.0);
    const double sigma = rng.uniform(0.06, 0.25) * size;
    for (int c = 0; c < img.channels(); ++c) {
      const double amp = rng.uniform(0.2, 0.8);
      for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
          const double r2 = (x - bx) * (x - bx) + (y - by) * (y - by);
          img.at(c, y, x) += amp * std::exp(-r2 / (2.0 * sigma * sigma));
        }
      }
    }
  }
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = std::clamp(img[i], 0.0, 1.0);
}

void fill_stripes(Image& img, Rng& rng) {
  // Cycles per pixel; the upper end is near the LR Nyquist limit at x4.
  const double freq = rng.uniform(0.02, 0.12);
  const double theta = rng.uniform(0.0, kTwoPi);
  const double phase = rng.uniform(0.0, kTwoPi);
  const double ux = std::cos(theta);
  const double uy = std::sin(theta);
  for (int c = 0; c < img.channels(); ++c) {
    const double mean = rng.uniform(0.3, 0.7);
    const double amp = rng.uniform(0.1, 0.3);
    for (int y = 0; y < img.height(); ++y) {
      for (int x = 0; x < img.width(); ++x) {
        img.at(c, y, x) = mean + amp * std::sin(kTwoPi * freq * (x * ux + y * uy) + phase);
      }
    }
  }
}

}  // namespace

const char* to_string(Pattern pattern) {
  switch (pattern) {
    case Pattern::gradient: return "gradient";
    case Pattern::checker: return "checker";
    case Pattern::blob: return "blob";
    case Pattern::stripes: return "stripes";
  }
  return "?";
}

void ToyDatasetSpec::validate(int divisor) const {
  if (count <= 0) throw InvalidParameter("dataset: count must be positive");
  if (val_count < 0 || val_count >= count) {
    throw InvalidParameter("dataset: val_count must be in [0, count)");
  }
  if (channels != 1 && channels != 3) throw InvalidParameter("dataset: channels must be 1 or 3");
  if (height <= 0 || width <= 0) throw ShapeError("dataset: dimensions must be positive");
  if (divisor > 0 && (height % divisor != 0 || width % divisor != 0)) {
    throw ShapeError("dataset: " + std::to_string(height) + "x" + std::to_string(width) +
                     " not divisible by " + std::to_string(divisor));
  }
  double total = 0.0;
  for (double w : pattern_mix) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw InvalidParameter("dataset: pattern weights must be finite and non-negative");
    }
    total += w;
  }
  if (!(total > 0.0)) throw InvalidParameter("dataset: pattern weights sum to zero");
}

ToyImage generate_image(const ToyDatasetSpec& spec, std::size_t index) {
  Rng rng(mix_seed(spec.seed, index), kPatternStream);
  ToyImage out{Image(spec.shape()), pick_pattern(spec.pattern_mix, rng)};
  switch (out.pattern) {
    case Pattern::gradient: fill_gradient(out.image, rng); break;
    case Pattern::checker: fill_checker(out.image, rng); break;
    case Pattern::blob: fill_blobs(out.image, rng); break;
    case Pattern::stripes: fill_stripes(out.image, rng); break;
  }
  return out;
}

std::vector<ToyImage> generate(const ToyDatasetSpec& spec) {
  spec.validate();
  std::vector<ToyImage> out;
  out.reserve(spec.count);
  for (int i = 0; i < spec.count; ++i) out.push_back(generate_image(spec, i));
  return out;
}

Split split_indices(const ToyDatasetSpec& spec) {
  std::vector<std::pair<std::uint64_t, std::size_t>> keyed(spec.count);
  for (int i = 0; i < spec.count; ++i) keyed[i] = {mix_seed(spec.seed ^ kSplitSalt, i), i};
  std::sort(keyed.begin(), keyed.end());
  Split s;
  for (std::size_t r = 0; r < keyed.size(); ++r) {
    (static_cast<int>(r) < spec.val_count ? s.val : s.train).push_back(keyed[r].second);
  }
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.val.begin(), s.val.end());
  return s;
}

ToyDataset make_dataset(const ToyDatasetSpec& spec) {
  spec.validate();
  ToyDataset d;
  d.spec = spec;
  const Split split = split_indices(spec);
  d.train_ids = split.train;
  d.val_ids = split.val;
  for (std::size_t i : d.train_ids) d.train.push_back(generate_image(spec, i).image);
  for (std::size_t i : d.val_ids) d.val.push_back(generate_image(spec, i).image);
  return d;
}

std::uint64_t example_seed(std::uint64_t dataset_seed, std::size_t index, std::uint64_t epoch) {
  return mix_seed(dataset_seed, index, epoch);
}

Degraded degrade_example(const Image& hr, const DegradationConfig& cfg,
                         std::uint64_t dataset_seed, std::size_t index, std::uint64_t epoch) {
  Rng rng(example_seed(dataset_seed, index, epoch), kDegradeStream);
  return degrade(hr, cfg, rng);
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::uint64_t epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(mix_seed(seed, epoch), kShuffleStream);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  return order;
}

BatchStream::BatchStream(const ToyDataset& data, int batch_size, DegradationConfig degradation)
    : data_(data), batch_size_(batch_size), degradation_(std::move(degradation)) {
  if (data.train.empty()) throw InvalidParameter("batches: empty training set");
  if (batch_size <= 0 || static_cast<std::size_t>(batch_size) > data.train.size()) {
    throw InvalidParameter("batches: batch size must be in [1, training set size]");
  }
  degradation_.validate();
  per_epoch_ = data.train.size() / static_cast<std::size_t>(batch_size);
}

const std::vector<std::size_t>& BatchStream::order(std::uint64_t epoch) {
  if (epoch != cached_epoch_) {
    order_ = epoch_order(data_.train.size(), data_.spec.seed, epoch);
    cached_epoch_ = epoch;
  }
  return order_;
}

Batch BatchStream::batch(std::uint64_t k) {
  const std::uint64_t epoch = k / per_epoch_;
  const std::size_t start = static_cast<std::size_t>(k % per_epoch_) * batch_size_;
  const auto& perm = order(epoch);
  Batch b;
  for (int i = 0; i < batch_size_; ++i) {
    const std::size_t pos = perm[start + i];
    const std::size_t id = data_.train_ids[pos];
    Degraded d = degrade_example(data_.train[pos], degradation_, data_.spec.seed, id, epoch);
    b.x0.push_back(data_.train[pos]);
    b.y0.push_back(std::move(d.y0));
    b.ids.push_back(id);
  }
  return b;
}

std::vector<Batch> BatchStream::epoch(std::uint64_t e) {
  std::vector<Batch> out;
  for (std::size_t i = 0; i < per_epoch_; ++i) out.push_back(batch(e * per_epoch_ + i));
  return out;
}

ValidationSet make_validation(const ToyDataset& data, const DegradationConfig& degradation) {
  ValidationSet v;
  for (std::size_t i = 0; i < data.val.size(); ++i) {
    Degraded d =
        degrade_example(data.val[i], degradation, data.spec.seed, data.val_ids[i], kValidationEpoch);
    v.hr.push_back(data.val[i]);
    v.lr.push_back(std::move(d.lr));
    v.y0.push_back(std::move(d.y0));
    v.ids.push_back(data.val_ids[i]);
  }
  return v;
}

const char* netpbm_extension(int channels) { return channels == 1 ? ".pgm" : ".ppm"; }

void export_pairs(const std::filesystem::path& dir, const std::string& split,
                  std::span<const std::size_t> ids, std::span<const Image> hr,
                  std::span<const Image> lr) {
  if (ids.size() != hr.size() || ids.size() != lr.size()) {
    throw InvalidParameter("export_pairs: ids, hr and lr must have equal lengths");
  }
  const auto sub = dir / split;
  std::filesystem::create_directories(sub);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const std::string stem = std::to_string(ids[i]);
    write_image(hr[i], sub / (stem + "_hr" + netpbm_extension(hr[i].channels())));
    write_image(lr[i], sub / (stem + "_lr" + netpbm_extension(lr[i].channels())));
  }
}

}  // namespace resshift
