#include "blindsr/ops.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "blindsr/errors.hpp"

namespace blindsr {

namespace {

void require_scale(int scale) {
  if (scale < 1) throw DomainError("scale factor must be >= 1");
}

void require_divisible(const Image& x, int scale) {
  if (x.height() % scale != 0 || x.width() % scale != 0) {
    throw DimensionError("image dimensions " + std::to_string(x.height()) +
                         "x" + std::to_string(x.width()) +
                         " are not divisible by scale " +
                         std::to_string(scale));
  }
}

void require_kernel_fits(int height, int width, const Kernel& k,
                         BoundaryMode boundary) {
  if (boundary == BoundaryMode::kReplicate &&
      (k.support() > height || k.support() > width)) {
    throw DimensionError("kernel support " + std::to_string(k.support()) +
                         " exceeds image size " + std::to_string(height) +
                         "x" + std::to_string(width) +
                         " under replicate boundary");
  }
}

// Source index of position p in a signal of length n extended by r on each
// side.
std::vector<int> extension_map(int n, int r, BoundaryMode boundary) {
  std::vector<int> map(static_cast<std::size_t>(n + 2 * r));
  for (int p = 0; p < n + 2 * r; ++p) {
    const int t = p - r;
    map[p] = boundary == BoundaryMode::kCircular ? ((t % n) + n) % n
                                                 : std::clamp(t, 0, n - 1);
  }
  return map;
}

std::vector<double> flipped(const Kernel& k) {
  auto g = k.grid();
  return std::vector<double>(g.rbegin(), g.rend());
}

// out(i, j) = sum_{a,b} kf(a, b) * xp(s*i + a, s*j + b), where xp is the
// boundary-extended input and kf the flipped kernel.
Image blur_stride(const Image& x, const Kernel& k, int s,
                  BoundaryMode boundary) {
  require_scale(s);
  require_divisible(x, s);
  require_kernel_fits(x.height(), x.width(), k, boundary);

  const int h = x.height();
  const int w = x.width();
  const int p = k.support();
  const int r = k.radius();
  const int hp = h + 2 * r;
  const int wp = w + 2 * r;
  const int ho = h / s;
  const int wo = w / s;
  const auto rows = extension_map(h, r, boundary);
  const auto cols = extension_map(w, r, boundary);
  const auto kf = flipped(k);

  Image out(x.channels(), ho, wo);
  std::vector<double> padded(static_cast<std::size_t>(hp) * wp);
  for (int c = 0; c < x.channels(); ++c) {
    auto src = x.plane(c);
    for (int i = 0; i < hp; ++i) {
      const double* srow = src.data() + static_cast<std::size_t>(rows[i]) * w;
      double* prow = padded.data() + static_cast<std::size_t>(i) * wp;
      for (int j = 0; j < wp; ++j) prow[j] = srow[cols[j]];
    }
    auto dst = out.plane(c);
    for (int i = 0; i < ho; ++i) {
      double* orow = dst.data() + static_cast<std::size_t>(i) * wo;
      for (int a = 0; a < p; ++a) {
        const double* prow =
            padded.data() + static_cast<std::size_t>(s * i + a) * wp;
        for (int b = 0; b < p; ++b) {
          const double wgt = kf[static_cast<std::size_t>(a) * p + b];
          if (wgt == 0.0) continue;
          const double* in = prow + b;
          if (s == 1) {
            for (int j = 0; j < wo; ++j) orow[j] += wgt * in[j];
          } else {
            for (int j = 0; j < wo; ++j) orow[j] += wgt * in[s * j];
          }
        }
      }
    }
  }
  return out;
}

Image blur_stride_adjoint(const Image& u, const Kernel& k, int s,
                          BoundaryMode boundary) {
  require_scale(s);
  const int h = u.height() * s;
  const int w = u.width() * s;
  require_kernel_fits(h, w, k, boundary);

  const int p = k.support();
  const int r = k.radius();
  const int hp = h + 2 * r;
  const int wp = w + 2 * r;
  const int ho = u.height();
  const int wo = u.width();
  const auto rows = extension_map(h, r, boundary);
  const auto cols = extension_map(w, r, boundary);
  const auto kf = flipped(k);

  Image out(u.channels(), h, w);
  std::vector<double> padded(static_cast<std::size_t>(hp) * wp);
  for (int c = 0; c < u.channels(); ++c) {
    std::fill(padded.begin(), padded.end(), 0.0);
    auto src = u.plane(c);
    for (int i = 0; i < ho; ++i) {
      const double* urow = src.data() + static_cast<std::size_t>(i) * wo;
      for (int a = 0; a < p; ++a) {
        double* prow = padded.data() + static_cast<std::size_t>(s * i + a) * wp;
        for (int b = 0; b < p; ++b) {
          const double wgt = kf[static_cast<std::size_t>(a) * p + b];
          if (wgt == 0.0) continue;
          double* acc = prow + b;
          if (s == 1) {
            for (int j = 0; j < wo; ++j) acc[j] += wgt * urow[j];
          } else {
            for (int j = 0; j < wo; ++j) acc[s * j] += wgt * urow[j];
          }
        }
      }
    }
    auto dst = out.plane(c);
    for (int i = 0; i < hp; ++i) {
      double* drow = dst.data() + static_cast<std::size_t>(rows[i]) * w;
      const double* prow = padded.data() + static_cast<std::size_t>(i) * wp;
      for (int j = 0; j < wp; ++j) drow[cols[j]] += prow[j];
    }
  }
  return out;
}

double cubic_weight(double t) {
  constexpr double a = -0.5;
  t = std::abs(t);
  if (t <= 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
  if (t < 2.0) return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
  return 0.0;
}

struct Taps {
  std::array<int, 4> index;
  std::array<double, 4> weight;
};

std::vector<Taps> bicubic_taps(int n_in, int scale) {
  std::vector<Taps> taps(static_cast<std::size_t>(n_in) * scale);
  for (int o = 0; o < n_in * scale; ++o) {
    const int base = o / scale;
    const double t = static_cast<double>(o % scale) / scale;
    Taps& tp = taps[o];
    for (int q = 0; q < 4; ++q) {
      tp.index[q] = std::clamp(base - 1 + q, 0, n_in - 1);
      tp.weight[q] = cubic_weight(t - (q - 1));
    }
  }
  return taps;
}

}  // namespace

std::string_view to_string(BoundaryMode mode) noexcept {
  return mode == BoundaryMode::kCircular ? "circular" : "replicate";
}

BoundaryMode parse_boundary_mode(std::string_view name) {
  if (name == "circular") return BoundaryMode::kCircular;
  if (name == "replicate") return BoundaryMode::kReplicate;
  throw DomainError("unknown boundary mode: " + std::string(name));
}

Image conv2d(const Image& x, const Kernel& k, BoundaryMode boundary) {
  return blur_stride(x, k, 1, boundary);
}

Image conv2d_adjoint(const Image& u, const Kernel& k, BoundaryMode boundary) {
  return blur_stride_adjoint(u, k, 1, boundary);
}

Image downsample(const Image& z, int scale) {
  require_scale(scale);
  require_divisible(z, scale);
  const int ho = z.height() / scale;
  const int wo = z.width() / scale;
  Image out(z.channels(), ho, wo);
  for (int c = 0; c < z.channels(); ++c) {
    for (int i = 0; i < ho; ++i) {
      for (int j = 0; j < wo; ++j) out(c, i, j) = z(c, scale * i, scale * j);
    }
  }
  return out;
}

Image downsample_adjoint(const Image& u, int scale) {
  require_scale(scale);
  Image out(u.channels(), u.height() * scale, u.width() * scale);
  for (int c = 0; c < u.channels(); ++c) {
    for (int i = 0; i < u.height(); ++i) {
      for (int j = 0; j < u.width(); ++j) {
        out(c, scale * i, scale * j) = u(c, i, j);
      }
    }
  }
  return out;
}

Image blur_downsample(const Image& x, const Kernel& k, int scale,
                      BoundaryMode boundary) {
  return blur_stride(x, k, scale, boundary);
}

Image blur_downsample_adjoint(const Image& u, const Kernel& k, int scale,
                              BoundaryMode boundary) {
  return blur_stride_adjoint(u, k, scale, boundary);
}

Image upsample_bicubic(const Image& y, int scale) {
  require_scale(scale);
  if (scale == 1) return y;
  const int h = y.height();
  const int w = y.width();
  const auto row_taps = bicubic_taps(h, scale);
  const auto col_taps = bicubic_taps(w, scale);
  Image out(y.channels(), h * scale, w * scale);
  std::vector<double> tmp(static_cast<std::size_t>(h) * w * scale);
  for (int c = 0; c < y.channels(); ++c) {
    // Horizontal pass: h x (w*s).
    for (int i = 0; i < h; ++i) {
      for (int j = 0; j < w * scale; ++j) {
        const Taps& t = col_taps[j];
        double v = 0.0;
        for (int q = 0; q < 4; ++q) v += t.weight[q] * y(c, i, t.index[q]);
        tmp[static_cast<std::size_t>(i) * w * scale + j] = v;
      }
    }
    for (int i = 0; i < h * scale; ++i) {
      const Taps& t = row_taps[i];
      for (int j = 0; j < w * scale; ++j) {
        double v = 0.0;
        for (int q = 0; q < 4; ++q) {
          v += t.weight[q] *
               tmp[static_cast<std::size_t>(t.index[q]) * w * scale + j];
        }
        out(c, i, j) = std::clamp(v, 0.0, 1.0);
      }
    }
  }
  return out;
}

Image crop(const Image& x, int top, int left, int height, int width) {
  if (top < 0 || left < 0 || height < 1 || width < 1 ||
      top + height > x.height() || left + width > x.width()) {
    throw DimensionError("crop window outside image");
  }
  Image out(x.channels(), height, width);
  for (int c = 0; c < x.channels(); ++c) {
    for (int i = 0; i < height; ++i) {
      for (int j = 0; j < width; ++j) out(c, i, j) = x(c, top + i, left + j);
    }
  }
  return out;
}

Image center_crop_to_multiple(const Image& x, int scale) {
  require_scale(scale);
  const int h = x.height() / scale * scale;
  const int w = x.width() / scale * scale;
  if (h < 1 || w < 1) {
    throw DimensionError("image smaller than scale factor");
  }
  return crop(x, (x.height() - h) / 2, (x.width() - w) / 2, h, w);
}

Image shift_circular(const Image& x, int dy, int dx) {
  Image out(x.channels(), x.height(), x.width());
  const int h = x.height();
  const int w = x.width();
  for (int c = 0; c < x.channels(); ++c) {
    for (int i = 0; i < h; ++i) {
      const int si = (((i - dy) % h) + h) % h;
      for (int j = 0; j < w; ++j) {
        out(c, i, j) = x(c, si, (((j - dx) % w) + w) % w);
      }
    }
  }
  return out;
}

}  // namespace blindsr
