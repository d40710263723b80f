#pragma once

#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "resshift/image.hpp"

namespace resshift {

// Reported when mse == 0.
inline constexpr double kPsnrCap = 99.0;

double mse(const Image& a, const Image& b);
// 10 log10(1 / mse) for peak 1.0, capped at kPsnrCap.
double psnr(const Image& a, const Image& b);
double psnr_from_mse(double mse);

/// Mean local SSIM over all valid positions of an 11x11 Gaussian window
/// (sigma 1.5) with C1 = 0.01^2 and C2 = 0.03^2, averaged over channels.
/// Throws ShapeError when the image is smaller than the window.
double ssim(const Image& a, const Image& b);

struct MetricReport {
  double psnr_db = 0.0;
  double ssim = 0.0;
  double mse = 0.0;
};

MetricReport evaluate_pair(const Image& estimate, const Image& reference);

struct ReportRow {
  std::string index;
  MetricReport metrics;
};

// Component-wise mean; psnr is the mean of the per-image values.
MetricReport mean_report(std::span<const ReportRow> rows);

// `index,psnr,ssim,mse` header, one row per entry, then a `mean` row.
void write_report_csv(std::ostream& os, std::span<const ReportRow> rows);

}  // namespace resshift
