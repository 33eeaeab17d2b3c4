#include "blindsr/degradation.hpp"

#include <cmath>
#include <iostream>
#include <numbers>
#include <numeric>

#include "blindsr/errors.hpp"
#include "blindsr/parallel.hpp"
#include "blindsr/png_io.hpp"

namespace blindsr {

namespace fs = std::filesystem;

void DegradationConfig::validate() const {
  if (scale < 1) throw DomainError("scale must be >= 1");
  if (!(sigma_n >= 0.0) || !std::isfinite(sigma_n)) {
    throw DomainError("sigma_n must be finite and >= 0");
  }
  if (support < 1 || support % 2 == 0) {
    throw DimensionError("kernel support must be odd and >= 1");
  }
}

Image degrade(const Image& x, const Kernel& k, const DegradationConfig& cfg,
              Rng& rng) {
  cfg.validate();
  Image y = blur_downsample(x, k, cfg.scale, cfg.boundary);
  if (cfg.sigma_n > 0.0) {
    std::normal_distribution<double> noise(0.0, cfg.sigma_n);
    for (double& v : y.data()) v += noise(rng);
  }
  return y;
}

double gaussian_log_density(const Image& y, const Image& mean, double sigma_n) {
  if (!(sigma_n > 0.0)) {
    throw DomainError("likelihood requires sigma_n > 0");
  }
  require_same_shape(y, mean, "log-likelihood");
  auto dy = y.data();
  auto dm = mean.data();
  double sq = 0.0;
  for (std::size_t i = 0; i < dy.size(); ++i) {
    const double r = dy[i] - dm[i];
    sq += r * r;
  }
  const double var = sigma_n * sigma_n;
  const double n = static_cast<double>(dy.size());
  return -0.5 * n * std::log(2.0 * std::numbers::pi * var) - sq / (2.0 * var);
}

double log_likelihood(const Image& y, const Image& x, const Kernel& k,
                      const DegradationConfig& cfg) {
  cfg.validate();
  if (!(cfg.sigma_n > 0.0)) {
    throw DomainError("likelihood requires sigma_n > 0");
  }
  return gaussian_log_density(y, blur_downsample(x, k, cfg.scale, cfg.boundary),
                              cfg.sigma_n);
}

double log_likelihood(const Image& y, const Image& x, const BandwidthVector& b2,
                      const DegradationConfig& cfg) {
  cfg.validate();
  return log_likelihood(y, x, make_mixture_kernel(b2, cfg.support), cfg);
}

Kernel make_anisotropic_kernel(double var_major, double var_minor,
                               double theta, int support) {
  if (!(var_major > 0.0) || !(var_minor > 0.0)) {
    throw DomainError("anisotropic variances must be > 0");
  }
  if (support < 1 || support % 2 == 0) {
    throw DimensionError("kernel support must be odd and >= 1");
  }
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  // Inverse covariance of R diag(var_major, var_minor) R^T.
  const double a = c * c / var_major + s * s / var_minor;
  const double b = c * s * (1.0 / var_major - 1.0 / var_minor);
  const double d = s * s / var_major + c * c / var_minor;
  const int r = support / 2;
  std::vector<double> grid(static_cast<std::size_t>(support) * support);
  for (int i = 0; i < support; ++i) {
    const double py = i - r;
    for (int j = 0; j < support; ++j) {
      const double px = j - r;
      grid[static_cast<std::size_t>(i) * support + j] =
          std::exp(-0.5 * (a * px * px + 2.0 * b * px * py + d * py * py));
    }
  }
  const double sum = std::accumulate(grid.begin(), grid.end(), 0.0);
  for (double& v : grid) v /= sum;
  return Kernel::from_grid(support, std::move(grid));
}

BandwidthVector draw_record_bandwidths(const ExponentialParams& prior,
                                       std::uint64_t seed, std::size_t index) {
  Rng rng(derive_seed(seed, "record-bandwidth", index));
  std::vector<double> xi(prior.size());
  for (double& v : xi) v = uniform01(rng);
  return sample_bandwidths(prior, xi);
}

std::vector<DatasetRecord> synth_dataset(const std::vector<fs::path>& hr_images,
                                         const DegradationConfig& cfg,
                                         const fs::path& out_dir,
                                         const SynthOptions& options) {
  cfg.validate();
  if (hr_images.empty()) throw DomainError("synth: no HR images given");
  if (options.prior.size() == 0) throw DomainError("synth: empty prior");

  std::vector<std::optional<DatasetRecord>> results(hr_images.size());
  std::mutex log_mutex;
  parallel_for(hr_images.size(), options.jobs, [&](std::size_t index) {
    const fs::path& src = hr_images[index];
    Image hr;
    try {
      hr = center_crop_to_multiple(read_png(src), cfg.scale);
    } catch (const std::exception& e) {
      std::lock_guard lock(log_mutex);
      std::cerr << "warning: skipping " << src.string() << ": " << e.what()
                << '\n';
      return;
    }
    DatasetRecord rec;
    rec.id = src.stem().string();
    Kernel kernel;
    if (options.anisotropic) {
      Rng krng(derive_seed(cfg.seed, "record-anisotropic", index));
      const double u1 = uniform01(krng);
      const double u2 = uniform01(krng);
      const double theta = uniform01(krng) * std::numbers::pi;
      const double rate_minor = options.prior[std::min<std::size_t>(1, options.prior.size() - 1)];
      const double v1 = std::max(-std::log1p(-u1) / options.prior[0], kBandwidthFloor);
      const double v2 = std::max(-std::log1p(-u2) / rate_minor, kBandwidthFloor);
      kernel = make_anisotropic_kernel(std::max(v1, v2), std::min(v1, v2),
                                       theta, cfg.support);
    } else {
      BandwidthVector b2 = draw_record_bandwidths(options.prior, cfg.seed, index);
      kernel = make_mixture_kernel(b2, cfg.support);
      rec.b2_true = std::move(b2);
    }
    Rng noise_rng(derive_seed(cfg.seed, "record-noise", index));
    const Image lr = degrade(hr, kernel, cfg, noise_rng);

    rec.lr_path = fs::path("lr") / (rec.id + ".png");
    rec.hr_path = fs::path("hr") / (rec.id + ".png");
    rec.kernel_path = fs::path("kernels") / (rec.id + ".txt");
    write_png(out_dir / rec.lr_path, lr);
    write_png(out_dir / *rec.hr_path, hr);
    write_kernel_text(out_dir / *rec.kernel_path, kernel);
    results[index] = std::move(rec);
  });

  std::vector<DatasetRecord> records;
  for (auto& r : results) {
    if (r) records.push_back(std::move(*r));
  }
  write_manifest(out_dir / "manifest.jsonl", records);
  return records;
}

}  // namespace blindsr
