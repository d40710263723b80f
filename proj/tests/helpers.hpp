#pragma once

#include <cmath>
#include <filesystem>
#include <string>

#include "resshift/image.hpp"
#include "resshift/rng.hpp"

namespace testutil {

inline resshift::Image random_image(resshift::Shape shape, resshift::Rng& rng, double lo = 0.0,
                                    double hi = 1.0) {
  resshift::Image img(shape);
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = rng.uniform(lo, hi);
  return img;
}

// A fresh, empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("resshift_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testutil
