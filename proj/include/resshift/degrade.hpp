#pragma once

#include <string>
#include <vector>

#include "resshift/image.hpp"
#include "resshift/rng.hpp"

namespace resshift {

enum class DownMode { area, bilinear, bicubic };
enum class KernelFamily { isotropic, anisotropic };
enum class NoiseFamily { gaussian, poisson };

const char* to_string(DownMode mode);
const char* to_string(KernelFamily family);
const char* to_string(NoiseFamily family);
DownMode parse_down_mode(const std::string& name);

struct DegradationConfig {
  int kernel_size = 13;
  double iso_prob = 0.6;
  double width_min = 0.2;
  double width_max = 0.8;
  std::vector<DownMode> down_modes{DownMode::area, DownMode::bilinear, DownMode::bicubic};
  double gaussian_prob = 0.5;
  // Gaussian noise level on the 0-255 scale, drawn uniformly as a real.
  double gaussian_level_min = 1.0;
  double gaussian_level_max = 15.0;
  double poisson_scale_min = 0.05;
  double poisson_scale_max = 0.3;
  int scale_factor = 4;

  void validate() const;
  bool operator==(const DegradationConfig&) const = default;
};

struct BlurKernel {
  int size = 0;
  std::vector<double> taps;  // row-major size x size

  double at(int row, int col) const { return taps[static_cast<std::size_t>(row) * size + col]; }
};

// Axis-aligned Gaussian, taps(i,j) ~ exp(-((j-c)^2/(2 wx^2) + (i-c)^2/(2 wy^2))),
// normalized to sum 1. Rows index y, columns index x.
BlurKernel gaussian_kernel(double width_x, double width_y, int size);

// Per-channel 2-D convolution with reflect-101 borders (the edge pixel is not
// repeated: index -1 maps to 1). The kernel radius must be smaller than both
// image dimensions.
Image convolve(const Image& img, const BlurKernel& kernel);

/// Downsampling by an integer factor.
///
/// area: block mean. bilinear and bicubic: separable resampling with the
/// align-corners-false convention, source coordinate (d + 0.5) * factor - 0.5,
/// no antialiasing, and out-of-range taps clamped to the border pixel. Bicubic
/// uses the Catmull-Rom kernel (a = -0.5).
Image downsample(const Image& img, int factor, DownMode mode);

// Each pixel replicated factor x factor.
Image upsample_nearest(const Image& img, int factor);

// img + (level / 255) * xi; no clamping.
Image add_gaussian_noise(const Image& img, double level, Rng& rng);
Image add_gaussian_noise(const Image& img, double level, const Image& xi);

// Per element: k ~ Poisson(max(v, 0) / scale), output k * scale.
Image add_poisson_noise(const Image& img, double scale, Rng& rng);

/// One realization of the random choices in the pipeline.
struct DegradationDraw {
  KernelFamily family = KernelFamily::isotropic;
  double width_x = 0.0;
  double width_y = 0.0;
  DownMode mode = DownMode::area;
  NoiseFamily noise = NoiseFamily::gaussian;
  double gaussian_level = 0.0;  // used when noise == gaussian
  double poisson_scale = 0.0;   // used when noise == poisson
};

DegradationDraw draw_degradation(const DegradationConfig& cfg, Rng& rng);

struct Degraded {
  Image lr;  // clamped to [0,1]
  Image y0;  // lr upsampled back to the HR grid
  DegradationDraw draw;
};

// Blur, downsample, noise, clamp, upsample. Noise is drawn from `rng`.
Degraded apply_degradation(const Image& hr, const DegradationConfig& cfg,
                           const DegradationDraw& draw, Rng& rng);
// Same with explicit standard-normal noise; requires draw.noise == gaussian.
Degraded apply_degradation(const Image& hr, const DegradationConfig& cfg,
                           const DegradationDraw& draw, const Image& xi);

// draw_degradation followed by apply_degradation on the same stream.
Degraded degrade(const Image& hr, const DegradationConfig& cfg, Rng& rng);

}  // namespace resshift
