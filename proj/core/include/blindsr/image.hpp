#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace blindsr {

/// Dense channels x height x width grid of doubles, row-major per channel.
///
/// Holds both high-resolution estimates and low-resolution observations.
/// Values are nominally in [0, 1] but the container only enforces finiteness
/// at construction from external data (noise and deconvolution may leave the
/// nominal range; clamping happens when writing 8-bit files).
class Image {
 public:
  Image() = default;
  Image(int channels, int height, int width, double fill = 0.0);

  /// Takes ownership of `data`; throws DimensionError on a size mismatch and
  /// DomainError if any entry is not finite.
  static Image from_data(int channels, int height, int width,
                         std::vector<double> data);

  int channels() const noexcept { return channels_; }
  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t plane_size() const noexcept {
    return static_cast<std::size_t>(height_) * static_cast<std::size_t>(width_);
  }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(int c, int i, int j) noexcept {
    return data_[index(c, i, j)];
  }
  double operator()(int c, int i, int j) const noexcept {
    return data_[index(c, i, j)];
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::span<double> plane(int c) noexcept {
    return std::span<double>(data_).subspan(c * plane_size(), plane_size());
  }
  std::span<const double> plane(int c) const noexcept {
    return std::span<const double>(data_).subspan(c * plane_size(),
                                                  plane_size());
  }

  bool same_shape(const Image& other) const noexcept {
    return channels_ == other.channels_ && height_ == other.height_ &&
           width_ == other.width_;
  }
  bool all_finite() const noexcept;

  Image& operator+=(const Image& rhs);
  Image& operator-=(const Image& rhs);
  Image& operator*=(double s) noexcept;

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t index(int c, int i, int j) const noexcept {
    return (static_cast<std::size_t>(c) * height_ + i) * width_ + j;
  }

  int channels_ = 0;
  int height_ = 0;
  int width_ = 0;
  std::vector<double> data_;
};

Image operator+(Image lhs, const Image& rhs);
Image operator-(Image lhs, const Image& rhs);
Image operator*(double s, Image img);

double dot(const Image& a, const Image& b);
double squared_norm(const Image& a);
double norm(const Image& a);
/// y += alpha * x
void axpy(double alpha, const Image& x, Image& y);

/// Throws DimensionError naming `what` unless shapes agree.
void require_same_shape(const Image& a, const Image& b, const char* what);

}  // namespace blindsr
