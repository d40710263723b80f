#include "resshift/image.hpp"

#include <algorithm>
#include <cmath>

#include "resshift/error.hpp"

namespace resshift {

std::string Shape::str() const {
  return std::to_string(channels) + "x" + std::to_string(height) + "x" + std::to_string(width);
}

Image::Image(Shape shape, double fill) : shape_(shape), data_(shape.size(), fill) {
  if (shape.channels <= 0 || shape.height <= 0 || shape.width <= 0) {
    throw ShapeError("image dimensions must be positive, got " + shape.str());
  }
}

Image::Image(Shape shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
  if (shape.channels <= 0 || shape.height <= 0 || shape.width <= 0) {
    throw ShapeError("image dimensions must be positive, got " + shape.str());
  }
  if (data_.size() != shape.size()) {
    throw ShapeError("image data length " + std::to_string(data_.size()) +
                     " does not match shape " + shape.str());
  }
}

bool Image::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

bool Image::within(double lo, double hi) const {
  return std::all_of(data_.begin(), data_.end(), [=](double v) { return v >= lo && v <= hi; });
}

Image Image::clamped(double lo, double hi) const {
  Image out = *this;
  for (double& v : out.data_) v = std::clamp(v, lo, hi);
  return out;
}

void require_same_shape(const Image& a, const Image& b, const char* context) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(context) + ": shape mismatch " + a.shape().str() + " vs " +
                     b.shape().str());
  }
}

Image operator+(const Image& a, const Image& b) {
  require_same_shape(a, b, "operator+");
  Image out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

Image operator-(const Image& a, const Image& b) {
  require_same_shape(a, b, "operator-");
  Image out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
  return out;
}

Image operator*(double s, const Image& a) {
  Image out = a;
  for (double& v : out.values()) v *= s;
  return out;
}

Image standard_normal(Shape shape, Rng& rng) {
  Image out(shape);
  for (double& v : out.values()) v = rng.normal();
  return out;
}

}  // namespace resshift
