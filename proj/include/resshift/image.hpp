#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "resshift/rng.hpp"

namespace resshift {

struct Shape {
  int channels = 0;
  int height = 0;
  int width = 0;

  std::size_t size() const {
    return static_cast<std::size_t>(channels) * static_cast<std::size_t>(height) *
           static_cast<std::size_t>(width);
  }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

/// Rank-3 real array in (channel, row, column) order.
///
/// Training images live in [0,1]; intermediate diffusion states are unbounded.
class Image {
 public:
  Image() = default;
  explicit Image(Shape shape, double fill = 0.0);
  Image(Shape shape, std::vector<double> data);

  const Shape& shape() const { return shape_; }
  int channels() const { return shape_.channels; }
  int height() const { return shape_.height; }
  int width() const { return shape_.width; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& at(int c, int y, int x) {
    return data_[(static_cast<std::size_t>(c) * shape_.height + y) * shape_.width + x];
  }
  double at(int c, int y, int x) const {
    return data_[(static_cast<std::size_t>(c) * shape_.height + y) * shape_.width + x];
  }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  bool all_finite() const;
  bool within(double lo, double hi) const;
  Image clamped(double lo = 0.0, double hi = 1.0) const;

  bool operator==(const Image&) const = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

// Throws ShapeError naming `context` when shapes differ.
void require_same_shape(const Image& a, const Image& b, const char* context);

Image operator+(const Image& a, const Image& b);
Image operator-(const Image& a, const Image& b);
Image operator*(double s, const Image& a);

// Standard normals drawn in row-major element order.
Image standard_normal(Shape shape, Rng& rng);

}  // namespace resshift
