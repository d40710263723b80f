#pragma once

#include <array>
#include <cstdint>

namespace resshift {

// Philox4x32-10 block function (Salmon et al., "Parallel random numbers: as
// easy as 1, 2, 3"). Exposed for known-answer tests.
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter,
                                           std::array<std::uint32_t, 2> key);

// Hashes a sequence of 64-bit values into a seed (splitmix64 finalizer chain).
// Used to derive independent per-example and per-step streams.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c);

/// Counter-based random stream.
///
/// The key is the 64-bit seed; the 128-bit counter is (block index, stream id).
/// Every draw is a pure function of (seed, stream, number of prior draws), so
/// results are reproducible across platforms up to libm differences in the
/// Box-Muller transform.
///
/// Normals use Box-Muller: two uniforms u1, u2 yield
/// sqrt(-2 ln u1) cos(2 pi u2) followed by sqrt(-2 ln u1) sin(2 pi u2).
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next_u64();
  // Uniform on the open interval (0, 1), 53-bit resolution.
  double uniform();
  double uniform(double lo, double hi);
  // Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);
  double normal();
  // Poisson(mean); inversion for small means, PTRS rejection otherwise.
  std::uint64_t poisson(double mean);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

 private:
  void refill();

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int buffered_ = 0;  // number of unread 64-bit words in buffer_ (0..2)
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace resshift
