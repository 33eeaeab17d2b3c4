#include "blindsr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "blindsr/errors.hpp"
#include "blindsr/ops.hpp"

namespace blindsr {

namespace {

constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

std::vector<double> gaussian_window(int size, double sigma) {
  std::vector<double> w(size);
  const int r = size / 2;
  double sum = 0.0;
  for (int i = 0; i < size; ++i) {
    const double d = i - r;
    w[i] = std::exp(-d * d / (2.0 * sigma * sigma));
    sum += w[i];
  }
  for (double& v : w) v /= sum;
  return w;
}

// Separable 'valid' filtering of one plane.
std::vector<double> filter_valid(const double* src, int h, int w,
                                 const std::vector<double>& win) {
  const int n = static_cast<int>(win.size());
  const int wo = w - n + 1;
  const int ho = h - n + 1;
  std::vector<double> tmp(static_cast<std::size_t>(h) * wo);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < wo; ++j) {
      double v = 0.0;
      for (int q = 0; q < n; ++q) v += win[q] * src[i * w + j + q];
      tmp[static_cast<std::size_t>(i) * wo + j] = v;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(ho) * wo);
  for (int i = 0; i < ho; ++i) {
    for (int j = 0; j < wo; ++j) {
      double v = 0.0;
      for (int q = 0; q < n; ++q) v += win[q] * tmp[(i + q) * wo + j];
      out[static_cast<std::size_t>(i) * wo + j] = v;
    }
  }
  return out;
}

double ssim_plane(std::span<const double> a, std::span<const double> b, int h,
                  int w) {
  int size = std::min({11, h, w});
  if (size % 2 == 0) --size;
  const auto win = gaussian_window(size, 1.5);

  const std::size_t n = a.size();
  std::vector<double> aa(n), bb(n), ab(n);
  for (std::size_t i = 0; i < n; ++i) {
    aa[i] = a[i] * a[i];
    bb[i] = b[i] * b[i];
    ab[i] = a[i] * b[i];
  }
  const auto mu_a = filter_valid(a.data(), h, w, win);
  const auto mu_b = filter_valid(b.data(), h, w, win);
  const auto e_aa = filter_valid(aa.data(), h, w, win);
  const auto e_bb = filter_valid(bb.data(), h, w, win);
  const auto e_ab = filter_valid(ab.data(), h, w, win);

  double total = 0.0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double ma = mu_a[i];
    const double mb = mu_b[i];
    const double va = e_aa[i] - ma * ma;
    const double vb = e_bb[i] - mb * mb;
    const double cov = e_ab[i] - ma * mb;
    total += ((2.0 * ma * mb + kC1) * (2.0 * cov + kC2)) /
             ((ma * ma + mb * mb + kC1) * (va + vb + kC2));
  }
  return total / static_cast<double>(mu_a.size());
}

}  // namespace

Image rgb_to_y(const Image& rgb) {
  if (rgb.channels() == 1) return rgb;
  Image y(1, rgb.height(), rgb.width());
  auto r = rgb.plane(0);
  auto g = rgb.plane(1);
  auto b = rgb.plane(2);
  auto out = y.plane(0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = (16.0 + 65.481 * r[i] + 128.553 * g[i] + 24.966 * b[i]) / 255.0;
  }
  return y;
}

double mse(const Image& a, const Image& b) {
  require_same_shape(a, b, "mse");
  auto da = a.data();
  auto db = b.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < da.size(); ++i) {
    const double d = da[i] - db[i];
    acc += d * d;
  }
  return acc / static_cast<double>(da.size());
}

double psnr(const Image& a, const Image& b) {
  const double m = mse(a, b);
  if (m < 1e-10) return kPsnrCapDb;
  return 10.0 * std::log10(1.0 / m);
}

double ssim(const Image& a, const Image& b) {
  require_same_shape(a, b, "ssim");
  double total = 0.0;
  for (int c = 0; c < a.channels(); ++c) {
    total += ssim_plane(a.plane(c), b.plane(c), a.height(), a.width());
  }
  return total / a.channels();
}

Image shave_border(const Image& x, int border) {
  if (border <= 0) return x;
  if (2 * border >= x.height() || 2 * border >= x.width()) {
    throw DimensionError("border crop removes the whole image");
  }
  return crop(x, border, border, x.height() - 2 * border,
              x.width() - 2 * border);
}

}  // namespace blindsr
