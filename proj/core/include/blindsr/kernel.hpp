#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace blindsr {

/// Bandwidth floor in pixel^2 applied to reparameterized draws.
inline constexpr double kBandwidthFloor = 1e-8;

/// Squared bandwidths b^2 (pixel^2) of the L mixture components.
class BandwidthVector {
 public:
  BandwidthVector() = default;
  /// Throws DomainError if empty or if any entry is not finite and positive.
  explicit BandwidthVector(std::vector<double> b2);

  std::size_t size() const noexcept { return b2_.size(); }
  double operator[](std::size_t l) const noexcept { return b2_[l]; }
  std::span<const double> values() const noexcept { return b2_; }

  friend bool operator==(const BandwidthVector&,
                         const BandwidthVector&) = default;

 private:
  std::vector<double> b2_;
};

/// Rates of independent exponential distributions over each b^2_l
/// (pdf rate * exp(-rate * t)). Used for both the prior and the
/// variational posterior.
class ExponentialParams {
 public:
  ExponentialParams() = default;
  explicit ExponentialParams(std::vector<double> rates);
  static ExponentialParams uniform(std::size_t components, double rate);

  std::size_t size() const noexcept { return rates_.size(); }
  double operator[](std::size_t l) const noexcept { return rates_[l]; }
  std::span<const double> values() const noexcept { return rates_; }

  friend bool operator==(const ExponentialParams&,
                         const ExponentialParams&) = default;

 private:
  std::vector<double> rates_;
};

/// Odd-sized square blur kernel with nonnegative entries summing to one.
class Kernel {
 public:
  /// 1x1 identity kernel.
  Kernel();

  /// Validates the grid: odd support, finite nonnegative entries, and a sum
  /// within 1e-9 of one. Throws DimensionError / DomainError.
  static Kernel from_grid(int support, std::vector<double> grid);

  int support() const noexcept { return support_; }
  int radius() const noexcept { return support_ / 2; }
  double at(int i, int j) const noexcept {
    return grid_[static_cast<std::size_t>(i) * support_ + j];
  }
  std::span<const double> grid() const noexcept { return grid_; }

  friend bool operator==(const Kernel&, const Kernel&) = default;

 protected:
  Kernel(int support, std::vector<double> grid);

  int support_ = 1;
  std::vector<double> grid_;
};

/// Kernel built from an isotropic Gaussian mixture; keeps its bandwidths.
class MixtureKernel : public Kernel {
 public:
  MixtureKernel(int support, std::vector<double> grid,
                BandwidthVector source_b2);

  const BandwidthVector& source_b2() const noexcept { return source_b2_; }

 private:
  BandwidthVector source_b2_;
};

/// Evaluates (1/L) sum_l exp(-(px^2+py^2)/(2 b_l^2)) / (2 pi b_l^2) on integer
/// offsets of a `support` x `support` grid, then renormalizes to unit sum.
MixtureKernel make_mixture_kernel(const BandwidthVector& b2, int support);

/// Inverse-CDF reparameterization b^2_l = -ln(1 - xi_l) / rate_l, floored at
/// kBandwidthFloor. Requires xi_l in [0, 1).
BandwidthVector sample_bandwidths(const ExponentialParams& rate,
                                  std::span<const double> xi);

/// d b^2_l / d rate_l at the given uniform; zero where the floor is active.
std::vector<double> sample_bandwidths_derivative(
    const ExponentialParams& rate, std::span<const double> xi);

/// KL(Exp(q) || Exp(p)) summed over components.
double kl_exponential(const ExponentialParams& q, const ExponentialParams& p);

/// d KL / d q_l = 1/q_l - p_l/q_l^2.
std::vector<double> kl_exponential_gradient(const ExponentialParams& q,
                                            const ExponentialParams& p);

/// Mean of each exponential, 1 / rate_l.
BandwidthVector posterior_mean_bandwidth(const ExponentialParams& rate);

// Kernel text format: "P P" header then P rows of P values, %.17g.
std::string format_kernel_text(const Kernel& k);
Kernel parse_kernel_text(const std::string& text);
void write_kernel_text(const std::filesystem::path& path, const Kernel& k);
Kernel read_kernel_text(const std::filesystem::path& path);

/// Zero-pads (centered) or rejects a kernel so that its support equals
/// `support`. Shrinking is only allowed when the trimmed border is zero.
Kernel resize_kernel_support(const Kernel& k, int support);

}  // namespace blindsr
