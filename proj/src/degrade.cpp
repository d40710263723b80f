#include "resshift/degrade.hpp"

#include <algorithm>
#include <cmath>

#include "resshift/error.hpp"

namespace resshift {

const char* to_string(DownMode mode) {
  switch (mode) {
    case DownMode::area: return "area";
    case DownMode::bilinear: return "bilinear";
    case DownMode::bicubic: return "bicubic";
  }
  return "?";
}

const char* to_string(KernelFamily family) {
  return family == KernelFamily::isotropic ? "iso" : "aniso";
}

const char* to_string(NoiseFamily family) {
  return family == NoiseFamily::gaussian ? "gaussian" : "poisson";
}

DownMode parse_down_mode(const std::string& name) {
  if (name == "area") return DownMode::area;
  if (name == "bilinear") return DownMode::bilinear;
  if (name == "bicubic") return DownMode::bicubic;
  throw InvalidParameter("unknown downsampling mode '" + name + "'");
}

namespace {

bool is_probability(double p) { return p >= 0.0 && p <= 1.0; }

void require_range(double lo, double hi, const char* what) {
  if (!(lo <= hi) || !std::isfinite(lo) || !std::isfinite(hi)) {
    throw InvalidParameter(std::string("degradation: empty or non-finite ") + what + " range");
  }
}

}  // namespace

void DegradationConfig::validate() const {
  if (kernel_size <= 0 || kernel_size % 2 == 0) {
    throw InvalidParameter("degradation: kernel_size must be odd and positive");
  }
  if (!is_probability(iso_prob)) throw InvalidParameter("degradation: iso_prob outside [0,1]");
  if (!is_probability(gaussian_prob)) {
    throw InvalidParameter("degradation: gaussian_prob outside [0,1]");
  }
  require_range(width_min, width_max, "kernel width");
  if (width_min <= 0.0) throw InvalidParameter("degradation: kernel widths must be positive");
  require_range(gaussian_level_min, gaussian_level_max, "gaussian level");
  if (gaussian_level_min < 0.0) throw InvalidParameter("degradation: negative noise level");
  require_range(poisson_scale_min, poisson_scale_max, "poisson scale");
  if (poisson_scale_min <= 0.0) throw InvalidParameter("degradation: poisson scale must be positive");
  if (down_modes.empty()) throw InvalidParameter("degradation: no downsampling modes");
  if (scale_factor <= 0) throw InvalidParameter("degradation: scale_factor must be positive");
}

BlurKernel gaussian_kernel(double width_x, double width_y, int size) {
  if (!(width_x > 0.0) || !(width_y > 0.0)) {
    throw InvalidParameter("gaussian_kernel: widths must be positive");
  }
  if (size <= 0 || size % 2 == 0) throw InvalidParameter("gaussian_kernel: size must be odd");
  BlurKernel k{size, std::vector<double>(static_cast<std::size_t>(size) * size)};
  const int c = size / 2;
  double sum = 0.0;
  for (int i = 0; i < size; ++i) {
    for (int j = 0; j < size; ++j) {
      const double dy = i - c;
      const double dx = j - c;
      const double v =
          std::exp(-(dx * dx / (2.0 * width_x * width_x) + dy * dy / (2.0 * width_y * width_y)));
      k.taps[static_cast<std::size_t>(i) * size + j] = v;
      sum += v;
    }
  }
  for (double& v : k.taps) v /= sum;
  return k;
}

namespace {

int reflect101(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * n - 2 - i;
  }
  return i;
}

}  // namespace

Image convolve(const Image& img, const BlurKernel& kernel) {
  const int r = kernel.size / 2;
  if (r >= img.height() || r >= img.width()) {
    throw ShapeError("convolve: kernel of size " + std::to_string(kernel.size) +
                     " exceeds reflect-padded image " + img.shape().str());
  }
  Image out(img.shape());
  const int h = img.height();
  const int w = img.width();
  // Tabulated reflected indices for offsets -r..r around every coordinate.
  std::vector<int> ry(static_cast<std::size_t>(h) * kernel.size);
  std::vector<int> rx(static_cast<std::size_t>(w) * kernel.size);
  for (int y = 0; y < h; ++y) {
    for (int i = 0; i < kernel.size; ++i) ry[y * kernel.size + i] = reflect101(y - (i - r), h);
  }
  for (int x = 0; x < w; ++x) {
    for (int j = 0; j < kernel.size; ++j) rx[x * kernel.size + j] = reflect101(x - (j - r), w);
  }
  for (int c = 0; c < img.channels(); ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int i = 0; i < kernel.size; ++i) {
          const int sy = ry[y * kernel.size + i];
          for (int j = 0; j < kernel.size; ++j) {
            acc += kernel.at(i, j) * img.at(c, sy, rx[x * kernel.size + j]);
          }
        }
        out.at(c, y, x) = acc;
      }
    }
  }
  return out;
}

namespace {

struct Tap {
  int index;
  double weight;
};

double cubic_weight(double d) {
  constexpr double a = -0.5;
  d = std::abs(d);
  if (d <= 1.0) return ((a + 2.0) * d - (a + 3.0)) * d * d + 1.0;
  if (d < 2.0) return (((d - 5.0) * d + 8.0) * d - 4.0) * a;
  return 0.0;
}

// Taps for each output coordinate along one axis of length n_in.
std::vector<std::vector<Tap>> axis_taps(int n_in, int n_out, int factor, DownMode mode) {
  std::vector<std::vector<Tap>> taps(n_out);
  for (int d = 0; d < n_out; ++d) {
    const double src = (d + 0.5) * factor - 0.5;
    auto& t = taps[d];
    if (mode == DownMode::bilinear) {
      const double s = std::max(src, 0.0);
      const int i0 = std::min(static_cast<int>(std::floor(s)), n_in - 1);
      const int i1 = std::min(i0 + 1, n_in - 1);
      const double f = s - i0;
      t.push_back({i0, 1.0 - f});
      t.push_back({i1, f});
    } else {
      const int i0 = static_cast<int>(std::floor(src));
      const double f = src - i0;
      for (int k = -1; k <= 2; ++k) {
        t.push_back({std::clamp(i0 + k, 0, n_in - 1), cubic_weight(k - f)});
      }
    }
  }
  return taps;
}

Image area_downsample(const Image& img, int factor) {
  const Shape s{img.channels(), img.height() / factor, img.width() / factor};
  Image out(s);
  const double inv = 1.0 / (static_cast<double>(factor) * factor);
  for (int c = 0; c < s.channels; ++c) {
    for (int y = 0; y < s.height; ++y) {
      for (int x = 0; x < s.width; ++x) {
        double acc = 0.0;
        for (int i = 0; i < factor; ++i) {
          for (int j = 0; j < factor; ++j) acc += img.at(c, y * factor + i, x * factor + j);
        }
        out.at(c, y, x) = acc * inv;
      }
    }
  }
  return out;
}

}  // namespace

Image downsample(const Image& img, int factor, DownMode mode) {
  if (factor <= 0) throw InvalidParameter("downsample: factor must be positive");
  if (img.height() % factor != 0 || img.width() % factor != 0) {
    throw ShapeError("downsample: " + img.shape().str() + " not divisible by " +
                     std::to_string(factor));
  }
  if (factor == 1) return img;
  if (mode == DownMode::area) return area_downsample(img, factor);

  const int ho = img.height() / factor;
  const int wo = img.width() / factor;
  const auto tx = axis_taps(img.width(), wo, factor, mode);
  const auto ty = axis_taps(img.height(), ho, factor, mode);
  // Horizontal pass then vertical pass.
  Image mid({img.channels(), img.height(), wo});
  for (int c = 0; c < img.channels(); ++c) {
    for (int y = 0; y < img.height(); ++y) {
      for (int x = 0; x < wo; ++x) {
        double acc = 0.0;
        for (const Tap& t : tx[x]) acc += t.weight * img.at(c, y, t.index);
        mid.at(c, y, x) = acc;
      }
    }
  }
  Image out({img.channels(), ho, wo});
  for (int c = 0; c < img.channels(); ++c) {
    for (int y = 0; y < ho; ++y) {
      for (int x = 0; x < wo; ++x) {
        double acc = 0.0;
        for (const Tap& t : ty[y]) acc += t.weight * mid.at(c, t.index, x);
        out.at(c, y, x) = acc;
      }
    }
  }
  return out;
}

Image upsample_nearest(const Image& img, int factor) {
  if (factor <= 0) throw InvalidParameter("upsample_nearest: factor must be positive");
  Image out({img.channels(), img.height() * factor, img.width() * factor});
  for (int c = 0; c < img.channels(); ++c) {
    for (int y = 0; y < out.height(); ++y) {
      for (int x = 0; x < out.width(); ++x) out.at(c, y, x) = img.at(c, y / factor, x / factor);
    }
  }
  return out;
}

Image add_gaussian_noise(const Image& img, double level, const Image& xi) {
  require_same_shape(img, xi, "add_gaussian_noise");
  Image out = img;
  const double sigma = level / 255.0;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += sigma * xi[i];
  return out;
}

Image add_gaussian_noise(const Image& img, double level, Rng& rng) {
  return add_gaussian_noise(img, level, standard_normal(img.shape(), rng));
}

Image add_poisson_noise(const Image& img, double scale, Rng& rng) {
  if (!(scale > 0.0)) throw InvalidParameter("add_poisson_noise: scale must be positive");
  Image out(img.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double mean = std::max(img[i], 0.0) / scale;
    out[i] = static_cast<double>(rng.poisson(mean)) * scale;
  }
  return out;
}

DegradationDraw draw_degradation(const DegradationConfig& cfg, Rng& rng) {
  DegradationDraw d;
  d.family = rng.uniform() < cfg.iso_prob ? KernelFamily::isotropic : KernelFamily::anisotropic;
  d.width_x = rng.uniform(cfg.width_min, cfg.width_max);
  d.width_y = d.family == KernelFamily::isotropic ? d.width_x
                                                  : rng.uniform(cfg.width_min, cfg.width_max);
  d.mode = cfg.down_modes[rng.below(cfg.down_modes.size())];
  d.noise = rng.uniform() < cfg.gaussian_prob ? NoiseFamily::gaussian : NoiseFamily::poisson;
  if (d.noise == NoiseFamily::gaussian) {
    d.gaussian_level = rng.uniform(cfg.gaussian_level_min, cfg.gaussian_level_max);
  } else {
    d.poisson_scale = rng.uniform(cfg.poisson_scale_min, cfg.poisson_scale_max);
  }
  return d;
}

namespace {

Image blur_and_downsample(const Image& hr, const DegradationConfig& cfg,
                          const DegradationDraw& draw) {
  cfg.validate();
  if (hr.height() % cfg.scale_factor != 0 || hr.width() % cfg.scale_factor != 0) {
    throw ShapeError("degrade: " + hr.shape().str() + " not divisible by scale factor " +
                     std::to_string(cfg.scale_factor));
  }
  const BlurKernel k = gaussian_kernel(draw.width_x, draw.width_y, cfg.kernel_size);
  return downsample(convolve(hr, k), cfg.scale_factor, draw.mode);
}

Degraded finish(Image noisy, const DegradationConfig& cfg, const DegradationDraw& draw) {
  Degraded out;
  out.lr = noisy.clamped(0.0, 1.0);
  out.y0 = upsample_nearest(out.lr, cfg.scale_factor);
  out.draw = draw;
  return out;
}

}  // namespace

Degraded apply_degradation(const Image& hr, const DegradationConfig& cfg,
                           const DegradationDraw& draw, Rng& rng) {
  Image low = blur_and_downsample(hr, cfg, draw);
  Image noisy = draw.noise == NoiseFamily::gaussian
                    ? add_gaussian_noise(low, draw.gaussian_level, rng)
                    : add_poisson_noise(low, draw.poisson_scale, rng);
  return finish(std::move(noisy), cfg, draw);
}

Degraded apply_degradation(const Image& hr, const DegradationConfig& cfg,
                           const DegradationDraw& draw, const Image& xi) {
  if (draw.noise != NoiseFamily::gaussian) {
    throw InvalidParameter("apply_degradation: explicit noise requires the gaussian family");
  }
  Image low = blur_and_downsample(hr, cfg, draw);
  return finish(add_gaussian_noise(low, draw.gaussian_level, xi), cfg, draw);
}

Degraded degrade(const Image& hr, const DegradationConfig& cfg, Rng& rng) {
  const DegradationDraw draw = draw_degradation(cfg, rng);
  return apply_degradation(hr, cfg, draw, rng);
}

}  // namespace resshift
