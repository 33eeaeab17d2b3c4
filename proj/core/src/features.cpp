#include "blindsr/features.hpp"

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <mutex>
#include <vector>

#include "blindsr/metrics.hpp"

namespace blindsr {

namespace {

// FFTW planning is not thread-safe.
std::mutex& fftw_plan_mutex() {
  static std::mutex m;
  return m;
}

double high_frequency_ratio(std::span<const double> plane, int h, int w) {
  const int wc = w / 2 + 1;
  std::vector<double> in(plane.begin(), plane.end());
  std::vector<std::complex<double>> out(static_cast<std::size_t>(h) * wc);
  fftw_plan plan;
  {
    std::lock_guard lock(fftw_plan_mutex());
    plan = fftw_plan_dft_r2c_2d(h, w, in.data(),
                                reinterpret_cast<fftw_complex*>(out.data()),
                                FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard lock(fftw_plan_mutex());
    fftw_destroy_plan(plan);
  }

  double total = 0.0;
  double high = 0.0;
  for (int ky = 0; ky < h; ++ky) {
    const double fy = static_cast<double>(ky <= h / 2 ? ky : ky - h) / h;
    for (int kx = 0; kx < wc; ++kx) {
      if (ky == 0 && kx == 0) continue;
      const double fx = static_cast<double>(kx) / w;
      // Columns 1..ceil(w/2)-1 stand for a conjugate pair.
      const bool paired = kx > 0 && !(w % 2 == 0 && kx == w / 2);
      const double p =
          std::norm(out[static_cast<std::size_t>(ky) * wc + kx]) *
          (paired ? 2.0 : 1.0);
      total += p;
      if (std::hypot(fx, fy) > 0.25) high += p;
    }
  }
  return total > 0.0 ? high / total : 0.0;
}

}  // namespace

FeatureVector extract_features(const Image& y) {
  const Image luma = rgb_to_y(y);
  const int h = luma.height();
  const int w = luma.width();
  const double n = static_cast<double>(luma.size());
  auto v = luma.plane(0);

  double mean = 0.0;
  for (double a : v) mean += a;
  mean /= n;
  double var = 0.0;
  double gx = 0.0;
  double gy = 0.0;
  double lap = 0.0;
  for (int i = 0; i < h; ++i) {
    const int up = (i + h - 1) % h;
    const int down = (i + 1) % h;
    for (int j = 0; j < w; ++j) {
      const int left = (j + w - 1) % w;
      const int right = (j + 1) % w;
      const double c = luma(0, i, j);
      var += (c - mean) * (c - mean);
      gx += std::abs(luma(0, i, right) - c);
      gy += std::abs(luma(0, down, j) - c);
      lap += std::abs(luma(0, up, j) + luma(0, down, j) + luma(0, i, left) +
                      luma(0, i, right) - 4.0 * c);
    }
  }
  FeatureVector f;
  f.psi = {mean,    std::sqrt(var / n), gx / n, gy / n, lap / n,
           high_frequency_ratio(v, h, w)};
  return f;
}

}  // namespace blindsr
