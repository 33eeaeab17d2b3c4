#include "blindsr/kernel.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>
#include <sstream>

#include "blindsr/errors.hpp"
#include "blindsr/io_util.hpp"

namespace blindsr {

namespace {

void require_positive_finite(std::span<const double> v, const char* what) {
  if (v.empty()) throw DomainError(std::string(what) + " must be non-empty");
  for (double x : v) {
    if (!std::isfinite(x) || x <= 0.0) {
      throw DomainError(std::string(what) + " entries must be finite and > 0");
    }
  }
}

}  // namespace

BandwidthVector::BandwidthVector(std::vector<double> b2) : b2_(std::move(b2)) {
  require_positive_finite(b2_, "bandwidth vector");
}

ExponentialParams::ExponentialParams(std::vector<double> rates)
    : rates_(std::move(rates)) {
  require_positive_finite(rates_, "exponential rates");
}

ExponentialParams ExponentialParams::uniform(std::size_t components,
                                             double rate) {
  return ExponentialParams(std::vector<double>(components, rate));
}

Kernel::Kernel() : support_(1), grid_{1.0} {}

Kernel::Kernel(int support, std::vector<double> grid)
    : support_(support), grid_(std::move(grid)) {}

Kernel Kernel::from_grid(int support, std::vector<double> grid) {
  if (support < 1 || support % 2 == 0) {
    throw DimensionError("kernel support must be odd and >= 1");
  }
  if (grid.size() != static_cast<std::size_t>(support) * support) {
    throw DimensionError("kernel grid size does not match support");
  }
  double sum = 0.0;
  for (double v : grid) {
    if (!std::isfinite(v) || v < 0.0) {
      throw DomainError("kernel entries must be finite and nonnegative");
    }
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw DomainError("kernel must sum to one (got " + std::to_string(sum) +
                      ")");
  }
  return Kernel(support, std::move(grid));
}

MixtureKernel::MixtureKernel(int support, std::vector<double> grid,
                             BandwidthVector source_b2)
    : Kernel(support, std::move(grid)), source_b2_(std::move(source_b2)) {}

MixtureKernel make_mixture_kernel(const BandwidthVector& b2, int support) {
  if (support < 1 || support % 2 == 0) {
    throw DimensionError("kernel support must be odd and >= 1");
  }
  if (b2.size() == 0) throw DomainError("bandwidth vector must be non-empty");
  const int r = support / 2;
  const double inv_l = 1.0 / static_cast<double>(b2.size());
  std::vector<double> grid(static_cast<std::size_t>(support) * support, 0.0);
  for (std::size_t l = 0; l < b2.size(); ++l) {
    const double var = b2[l];
    const double scale = inv_l / (2.0 * std::numbers::pi * var);
    for (int i = 0; i < support; ++i) {
      const double py = i - r;
      for (int j = 0; j < support; ++j) {
        const double px = j - r;
        grid[static_cast<std::size_t>(i) * support + j] +=
            scale * std::exp(-(px * px + py * py) / (2.0 * var));
      }
    }
  }
  const double sum = std::accumulate(grid.begin(), grid.end(), 0.0);
  if (!(sum > 0.0) || !std::isfinite(sum)) {
    throw NumericalError("mixture kernel has no finite mass");
  }
  for (double& v : grid) v /= sum;
  return MixtureKernel(support, std::move(grid), b2);
}

BandwidthVector sample_bandwidths(const ExponentialParams& rate,
                                  std::span<const double> xi) {
  if (xi.size() != rate.size()) {
    throw DimensionError("uniform draw count must match component count");
  }
  std::vector<double> b2(rate.size());
  for (std::size_t l = 0; l < rate.size(); ++l) {
    if (!(xi[l] >= 0.0 && xi[l] < 1.0)) {
      throw DomainError("uniform draws must lie in [0, 1)");
    }
    b2[l] = std::max(-std::log1p(-xi[l]) / rate[l], kBandwidthFloor);
  }
  return BandwidthVector(std::move(b2));
}

std::vector<double> sample_bandwidths_derivative(const ExponentialParams& rate,
                                                 std::span<const double> xi) {
  if (xi.size() != rate.size()) {
    throw DimensionError("uniform draw count must match component count");
  }
  std::vector<double> d(rate.size(), 0.0);
  for (std::size_t l = 0; l < rate.size(); ++l) {
    if (!(xi[l] >= 0.0 && xi[l] < 1.0)) {
      throw DomainError("uniform draws must lie in [0, 1)");
    }
    const double raw = -std::log1p(-xi[l]) / rate[l];
    if (raw > kBandwidthFloor) d[l] = std::log1p(-xi[l]) / (rate[l] * rate[l]);
  }
  return d;
}

double kl_exponential(const ExponentialParams& q, const ExponentialParams& p) {
  if (q.size() != p.size() || q.size() == 0) {
    throw DomainError("KL requires rate vectors of equal, nonzero length");
  }
  double kl = 0.0;
  for (std::size_t l = 0; l < q.size(); ++l) {
    const double ratio = p[l] / q[l];
    kl += -std::log(ratio) + ratio - 1.0;
  }
  return kl;
}

std::vector<double> kl_exponential_gradient(const ExponentialParams& q,
                                            const ExponentialParams& p) {
  if (q.size() != p.size() || q.size() == 0) {
    throw DomainError("KL requires rate vectors of equal, nonzero length");
  }
  std::vector<double> g(q.size());
  for (std::size_t l = 0; l < q.size(); ++l) {
    g[l] = 1.0 / q[l] - p[l] / (q[l] * q[l]);
  }
  return g;
}

BandwidthVector posterior_mean_bandwidth(const ExponentialParams& rate) {
  if (rate.size() == 0) throw DomainError("rate vector must be non-empty");
  std::vector<double> mean(rate.size());
  for (std::size_t l = 0; l < rate.size(); ++l) mean[l] = 1.0 / rate[l];
  return BandwidthVector(std::move(mean));
}

std::string format_kernel_text(const Kernel& k) {
  std::string out = std::to_string(k.support()) + " " +
                    std::to_string(k.support()) + "\n";
  char buf[32];
  for (int i = 0; i < k.support(); ++i) {
    for (int j = 0; j < k.support(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", k.at(i, j));
      if (j > 0) out += ' ';
      out += buf;
    }
    out += '\n';
  }
  return out;
}

Kernel parse_kernel_text(const std::string& text) {
  std::istringstream in(text);
  int rows = 0;
  int cols = 0;
  if (!(in >> rows >> cols)) throw IoError("kernel text: missing header");
  if (rows != cols) throw DimensionError("kernel text: kernel must be square");
  if (rows < 1 || rows > 4096) throw DimensionError("kernel text: bad size");
  std::vector<double> grid(static_cast<std::size_t>(rows) * cols);
  for (double& v : grid) {
    if (!(in >> v)) throw IoError("kernel text: truncated grid");
  }
  return Kernel::from_grid(rows, std::move(grid));
}

void write_kernel_text(const std::filesystem::path& path, const Kernel& k) {
  write_file_atomic(path, format_kernel_text(k));
}

Kernel read_kernel_text(const std::filesystem::path& path) {
  return parse_kernel_text(read_file(path));
}

Kernel resize_kernel_support(const Kernel& k, int support) {
  if (support < 1 || support % 2 == 0) {
    throw DimensionError("kernel support must be odd and >= 1");
  }
  if (support == k.support()) return k;
  const int offset = (support - k.support()) / 2;
  std::vector<double> grid(static_cast<std::size_t>(support) * support, 0.0);
  for (int i = 0; i < k.support(); ++i) {
    for (int j = 0; j < k.support(); ++j) {
      const int ti = i + offset;
      const int tj = j + offset;
      const double v = k.at(i, j);
      if (ti < 0 || tj < 0 || ti >= support || tj >= support) {
        if (v != 0.0) {
          throw DimensionError("kernel support mismatch: cannot trim nonzero "
                               "entries to support " + std::to_string(support));
        }
        continue;
      }
      grid[static_cast<std::size_t>(ti) * support + tj] = v;
    }
  }
  return Kernel::from_grid(support, std::move(grid));
}

}  // namespace blindsr
