#include <cmath>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "resshift/error.hpp"
#include "resshift/metrics.hpp"

using namespace resshift;
using testutil::random_image;

TEST_CASE("mse") {
  Rng rng(1);
  const Image a = random_image({1, 12, 12}, rng), b = random_image({1, 12, 12}, rng);
  CHECK(mse(a, a) == 0.0);
  CHECK(mse(Image({1, 4, 4}, 0.0), Image({1, 4, 4}, 0.5)) == 0.25);
  CHECK(mse(a, b) == mse(b, a));
  CHECK_THROWS_AS(mse(a, Image({1, 4, 4})), ShapeError);
}

TEST_CASE("psnr") {
  Rng rng(2);
  const Image a = random_image({1, 12, 12}, rng);
  CHECK(psnr(a, a) == kPsnrCap);
  CHECK(psnr(Image({1, 4, 4}, 0.2), Image({1, 4, 4}, 0.3)) == doctest::Approx(20.0).epsilon(1e-12));
  double prev = -1e9;
  for (double m : {1.0, 0.1, 0.01, 1e-4, 1e-8}) {
    CHECK(psnr_from_mse(m) > prev);
    prev = psnr_from_mse(m);
  }
}

TEST_CASE("ssim") {
  Rng rng(3);
  const Image a = random_image({3, 16, 16}, rng), b = random_image({3, 16, 16}, rng);
  CHECK(ssim(a, a) == 1.0);
  CHECK(ssim(a, b) == doctest::Approx(ssim(b, a)).epsilon(1e-15));
  CHECK(ssim(a, b) < 0.5);
  // Constants 0 and 1: the luminance term is C1 / (1 + C1).
  const double c1 = 1e-4;
  CHECK(ssim(Image({1, 11, 11}, 0.0), Image({1, 11, 11}, 1.0)) ==
        doctest::Approx(c1 / (1 + c1)).epsilon(1e-10));
  CHECK_THROWS_AS(ssim(Image({1, 10, 12}), Image({1, 10, 12})), ShapeError);
}

TEST_CASE("ssim on a single window matches the direct formula") {
  // An 11x11 image has exactly one window position.
  Rng rng(4);
  const Image a = random_image({1, 11, 11}, rng), b = random_image({1, 11, 11}, rng);
  double wsum = 0, w[11][11];
  for (int y = 0; y < 11; ++y)
    for (int x = 0; x < 11; ++x) {
      w[y][x] = std::exp(-((x - 5.0) * (x - 5.0) + (y - 5.0) * (y - 5.0)) / (2 * 1.5 * 1.5));
      wsum += w[y][x];
    }
  double ma = 0, mb = 0;
  for (int y = 0; y < 11; ++y)
    for (int x = 0; x < 11; ++x) {
      ma += w[y][x] / wsum * a.at(0, y, x);
      mb += w[y][x] / wsum * b.at(0, y, x);
    }
  double va = 0, vb = 0, cov = 0;
  for (int y = 0; y < 11; ++y)
    for (int x = 0; x < 11; ++x) {
      const double k = w[y][x] / wsum;
      va += k * (a.at(0, y, x) - ma) * (a.at(0, y, x) - ma);
      vb += k * (b.at(0, y, x) - mb) * (b.at(0, y, x) - mb);
      cov += k * (a.at(0, y, x) - ma) * (b.at(0, y, x) - mb);
    }
  const double c1 = 1e-4, c2 = 9e-4;
  const double expected =
      (2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
  CHECK(ssim(a, b) == doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("report csv") {
  std::vector<ReportRow> rows = {{"a", {20.0, 0.5, 0.01}}, {"b", {30.0, 0.7, 0.001}}};
  const auto mean = mean_report(rows);
  CHECK(mean.psnr_db == 25.0);
  CHECK(mean.ssim == doctest::Approx(0.6));
  std::ostringstream os;
  write_report_csv(os, rows);
  const std::string s = os.str();
  CHECK(s.rfind("index,psnr,ssim,mse\na,20,", 0) == 0);
  CHECK(s.find("\nmean,25,") != std::string::npos);
  CHECK(std::count(s.begin(), s.end(), '\n') == 4);
  const auto self = evaluate_pair(Image({1, 12, 12}, 0.3), Image({1, 12, 12}, 0.3));
  CHECK(self.psnr_db == kPsnrCap);
  CHECK(self.ssim == 1.0);
}
