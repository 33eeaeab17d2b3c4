#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "blindsr/degradation.hpp"
#include "blindsr/image.hpp"
#include "blindsr/kernel.hpp"

namespace blindsr {

/// Monte Carlo value of the evidence lower bound with its two terms.
struct ElboEstimate {
  double value = 0.0;      ///< data_term - kl_term (nats)
  double data_term = 0.0;  ///< mean log-likelihood over the draws
  double kl_term = 0.0;    ///< KL(q || prior)
  int n_mc = 0;
  double std_error = 0.0;  ///< standard error of data_term
};

/// Fixed n_mc x L table of uniforms in [0, 1) (common random numbers).
class McDraws {
 public:
  /// Throws DomainError if any entry lies outside [0, 1) or n_mc < 1.
  McDraws(int n_mc, int components, std::vector<double> xi);
  /// Latin-hypercube table: each column has one draw per stratum of width
  /// 1/n_mc, in a seeded random order.
  static McDraws generate(int n_mc, int components, std::uint64_t seed);

  int n_mc() const noexcept { return n_mc_; }
  int components() const noexcept { return components_; }
  std::span<const double> row(int m) const noexcept {
    return std::span<const double>(xi_).subspan(
        static_cast<std::size_t>(m) * components_, components_);
  }

 private:
  int n_mc_;
  int components_;
  std::vector<double> xi_;
};

/// data_term = mean_m log p(y | x, sample_bandwidths(lambda_hat, xi_m)),
/// kl_term = KL(Exp(lambda_hat) || Exp(lambda_prior)).
ElboEstimate elbo(const Image& y, const Image& x,
                  const ExponentialParams& lambda_hat,
                  const ExponentialParams& lambda_prior,
                  const DegradationConfig& cfg, const McDraws& draws);

/// Gradient of the ELBO with respect to the HR image (the KL term does not
/// depend on x).
Image grad_elbo_x(const Image& y, const Image& x,
                  const ExponentialParams& lambda_hat,
                  const DegradationConfig& cfg, const McDraws& draws);

/// Pathwise gradient with respect to lambda_hat. The derivative of the
/// log-likelihood along each b^2_l is a central difference with step
/// 1e-4 * b^2_l, chained with d b^2_l / d lambda_hat_l; the KL part is exact.
std::vector<double> grad_elbo_lambda(const Image& y, const Image& x,
                                     const ExponentialParams& lambda_hat,
                                     const ExponentialParams& lambda_prior,
                                     const DegradationConfig& cfg,
                                     const McDraws& draws);

struct QuadratureGrid {
  double b2_min = kBandwidthFloor;
  double b2_max = 20.0;
  int nodes = 200;
};

/// log integral p(y | x, b^2) p(b^2) db^2 by trapezoidal quadrature in
/// log-sum-exp form over [b2_min, b2_max]^L, nodes evenly spaced in
/// sqrt(b^2). Supports L <= 2 only (UnsupportedError otherwise).
double marginal_log_likelihood_quadrature(const Image& y, const Image& x,
                                          const ExponentialParams& lambda_prior,
                                          const DegradationConfig& cfg,
                                          const QuadratureGrid& grid);

}  // namespace blindsr
