#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "blindsr/image.hpp"
#include "blindsr/kernel.hpp"
#include "blindsr/ops.hpp"
#include "blindsr/rng.hpp"

namespace blindsr {

/// Observation model settings: y = downsample(conv2d(x, k), scale) + sigma_n g.
struct DegradationConfig {
  int scale = 2;
  double sigma_n = 0.01;
  int support = 21;
  BoundaryMode boundary = BoundaryMode::kReplicate;
  std::uint64_t seed = 0;

  /// Throws DomainError / DimensionError on s < 1, sigma_n < 0 or even P.
  void validate() const;
};

/// Blur, decimate, then add i.i.d. N(0, sigma_n^2) noise drawn from `rng`.
/// No clamping: noise may leave [0, 1].
Image degrade(const Image& x, const Kernel& k, const DegradationConfig& cfg,
              Rng& rng);

/// Gaussian log-density sum_i [-0.5 ln(2 pi s^2) - (y_i - mean_i)^2 / (2 s^2)].
double gaussian_log_density(const Image& y, const Image& mean, double sigma_n);

/// log p(y | x, b^2) with the mixture kernel of support cfg.support.
/// Throws DomainError when sigma_n == 0.
double log_likelihood(const Image& y, const Image& x, const BandwidthVector& b2,
                      const DegradationConfig& cfg);
double log_likelihood(const Image& y, const Image& x, const Kernel& k,
                      const DegradationConfig& cfg);

/// Rotated anisotropic Gaussian, normalized to unit sum. Used to stress the
/// isotropic mixture model with off-model blur.
Kernel make_anisotropic_kernel(double var_major, double var_minor,
                               double theta, int support);

/// One entry of a dataset manifest. Paths are stored relative to the
/// manifest's directory.
struct DatasetRecord {
  std::string id;
  std::filesystem::path lr_path;
  std::optional<std::filesystem::path> hr_path;
  std::optional<std::filesystem::path> kernel_path;
  std::optional<BandwidthVector> b2_true;

  bool labeled() const noexcept { return hr_path.has_value(); }
  bool has_kernel() const noexcept { return kernel_path.has_value(); }

  friend bool operator==(const DatasetRecord&, const DatasetRecord&) = default;
};

std::string serialize_record(const DatasetRecord& record);
DatasetRecord parse_record(const std::string& line);
std::string serialize_manifest(const std::vector<DatasetRecord>& records);
std::vector<DatasetRecord> parse_manifest(const std::string& text);
void write_manifest(const std::filesystem::path& path,
                    const std::vector<DatasetRecord>& records);
std::vector<DatasetRecord> read_manifest(const std::filesystem::path& path);

struct SynthOptions {
  ExponentialParams prior = ExponentialParams::uniform(3, 0.5);
  bool anisotropic = false;
  int jobs = 1;
};

/// b^2 ~ Exp(prior) for record `index`, drawn from the record's own stream.
BandwidthVector draw_record_bandwidths(const ExponentialParams& prior,
                                       std::uint64_t seed, std::size_t index);

/// For each HR image: center-crop to a multiple of the scale, draw b^2 from
/// the prior (or an anisotropic kernel), degrade, and write
/// out_dir/{hr,lr,kernels}/<id>.* plus out_dir/manifest.jsonl.
/// Unreadable images are skipped with a warning on stderr. Each record uses
/// its own RNG stream derived from (cfg.seed, index), so the result does not
/// depend on `jobs`.
std::vector<DatasetRecord> synth_dataset(
    const std::vector<std::filesystem::path>& hr_images,
    const DegradationConfig& cfg, const std::filesystem::path& out_dir,
    const SynthOptions& options);

}  // namespace blindsr
