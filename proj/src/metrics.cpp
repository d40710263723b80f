#include "resshift/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>

#include "resshift/error.hpp"

namespace resshift {

double mse(const Image& a, const Image& b) {
  require_same_shape(a, b, "mse");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

double psnr_from_mse(double m) {
  if (m <= 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / m));
}

double psnr(const Image& a, const Image& b) { return psnr_from_mse(mse(a, b)); }

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

std::array<double, kWindow> gaussian_window() {
  std::array<double, kWindow> w{};
  double sum = 0.0;
  for (int i = 0; i < kWindow; ++i) {
    const double d = i - kWindow / 2;
    w[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
    sum += w[i];
  }
  for (double& v : w) v /= sum;
  return w;
}

}  // namespace

double ssim(const Image& a, const Image& b) {
  require_same_shape(a, b, "ssim");
  if (a.height() < kWindow || a.width() < kWindow) {
    throw ShapeError("ssim: image " + a.shape().str() + " smaller than the 11x11 window");
  }
  const auto g = gaussian_window();
  const int ho = a.height() - kWindow + 1;
  const int wo = a.width() - kWindow + 1;
  double total = 0.0;
  for (int c = 0; c < a.channels(); ++c) {
    double channel_sum = 0.0;
    for (int y = 0; y < ho; ++y) {
      for (int x = 0; x < wo; ++x) {
        double ma = 0.0, mb = 0.0, saa = 0.0, sbb = 0.0, sab = 0.0;
        for (int i = 0; i < kWindow; ++i) {
          for (int j = 0; j < kWindow; ++j) {
            const double w = g[i] * g[j];
            const double va = a.at(c, y + i, x + j);
            const double vb = b.at(c, y + i, x + j);
            ma += w * va;
            mb += w * vb;
            saa += w * va * va;
            sbb += w * vb * vb;
            sab += w * va * vb;
          }
        }
        const double var_a = saa - ma * ma;
        const double var_b = sbb - mb * mb;
        const double cov = sab - ma * mb;
        channel_sum += ((2.0 * ma * mb + kC1) * (2.0 * cov + kC2)) /
                       ((ma * ma + mb * mb + kC1) * (var_a + var_b + kC2));
      }
    }
    total += channel_sum / (static_cast<double>(ho) * wo);
  }
  return total / a.channels();
}

MetricReport evaluate_pair(const Image& estimate, const Image& reference) {
  MetricReport r;
  r.mse = mse(estimate, reference);
  r.psnr_db = psnr_from_mse(r.mse);
  r.ssim = ssim(estimate, reference);
  return r;
}

MetricReport mean_report(std::span<const ReportRow> rows) {
  MetricReport m;
  if (rows.empty()) return m;
  for (const auto& r : rows) {
    m.psnr_db += r.metrics.psnr_db;
    m.ssim += r.metrics.ssim;
    m.mse += r.metrics.mse;
  }
  const double n = static_cast<double>(rows.size());
  m.psnr_db /= n;
  m.ssim /= n;
  m.mse /= n;
  return m;
}

namespace {

void write_row(std::ostream& os, const std::string& index, const MetricReport& m) {
  char buf[128];
  std::snprintf(buf, sizeof buf, ",%.17g,%.17g,%.17g\n", m.psnr_db, m.ssim, m.mse);
  os << index << buf;
}

}  // namespace

void write_report_csv(std::ostream& os, std::span<const ReportRow> rows) {
  os << "index,psnr,ssim,mse\n";
  for (const auto& r : rows) write_row(os, r.index, r.metrics);
  write_row(os, "mean", mean_report(rows));
}

}  // namespace resshift
