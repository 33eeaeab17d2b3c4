#include "blindsr/image.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "blindsr/errors.hpp"

namespace blindsr {

namespace {

void check_dims(int channels, int height, int width) {
  if (channels != 1 && channels != 3) {
    throw DimensionError("image channels must be 1 or 3, got " +
                         std::to_string(channels));
  }
  if (height < 1 || width < 1) {
    throw DimensionError("image height and width must be >= 1");
  }
}

}  // namespace

Image::Image(int channels, int height, int width, double fill)
    : channels_(channels), height_(height), width_(width) {
  check_dims(channels, height, width);
  data_.assign(static_cast<std::size_t>(channels) * height * width, fill);
}

Image Image::from_data(int channels, int height, int width,
                       std::vector<double> data) {
  check_dims(channels, height, width);
  if (data.size() != static_cast<std::size_t>(channels) * height * width) {
    throw DimensionError("image data size does not match channels*height*width");
  }
  Image img;
  img.channels_ = channels;
  img.height_ = height;
  img.width_ = width;
  img.data_ = std::move(data);
  if (!img.all_finite()) throw DomainError("image contains non-finite values");
  return img;
}

bool Image::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

Image& Image::operator+=(const Image& rhs) {
  require_same_shape(*this, rhs, "image +=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += rhs.data_[i];
  return *this;
}

Image& Image::operator-=(const Image& rhs) {
  require_same_shape(*this, rhs, "image -=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= rhs.data_[i];
  return *this;
}

Image& Image::operator*=(double s) noexcept {
  for (double& v : data_) v *= s;
  return *this;
}

Image operator+(Image lhs, const Image& rhs) { return lhs += rhs; }
Image operator-(Image lhs, const Image& rhs) { return lhs -= rhs; }
Image operator*(double s, Image img) { return img *= s; }

double dot(const Image& a, const Image& b) {
  require_same_shape(a, b, "dot");
  auto da = a.data();
  auto db = b.data();
  return std::inner_product(da.begin(), da.end(), db.begin(), 0.0);
}

double squared_norm(const Image& a) { return dot(a, a); }

double norm(const Image& a) { return std::sqrt(squared_norm(a)); }

void axpy(double alpha, const Image& x, Image& y) {
  require_same_shape(x, y, "axpy");
  auto dx = x.data();
  auto dy = y.data();
  for (std::size_t i = 0; i < dx.size(); ++i) dy[i] += alpha * dx[i];
}

void require_same_shape(const Image& a, const Image& b, const char* what) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(what) + ": shape mismatch (" +
                         std::to_string(a.channels()) + "x" +
                         std::to_string(a.height()) + "x" +
                         std::to_string(a.width()) + " vs " +
                         std::to_string(b.channels()) + "x" +
                         std::to_string(b.height()) + "x" +
                         std::to_string(b.width()) + ")");
  }
}

}  // namespace blindsr
