#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "blindsr/degradation.hpp"
#include "blindsr/elbo.hpp"
#include "blindsr/features.hpp"
#include "blindsr/image.hpp"
#include "blindsr/kernel.hpp"

namespace blindsr {

/// Learnable parameters of the amortized estimators.
///
/// The bandwidth predictor maps the 6 LR features through an affine layer
/// (weights, bias) and a softplus to posterior rates. The restorer runs a
/// fixed number of CG iterations on the regularized deconvolution problem
/// with ridge weight softplus(log_ridge).
struct EstimatorParams {
  int components = 3;
  int support = 21;
  std::vector<double> weights;  ///< components x kFeatureCount, row-major
  std::vector<double> bias;     ///< components
  double log_ridge = -6.9;
  int cg_steps = 5;

  static EstimatorParams zeros(int components, int support, int cg_steps = 5,
                               double log_ridge = -6.9);

  std::size_t parameter_count() const noexcept {
    return weights.size() + bias.size() + 1;
  }
  /// weights, then bias, then log_ridge.
  std::vector<double> flatten() const;
  void assign(std::span<const double> flat);
  void validate() const;

  friend bool operator==(const EstimatorParams&,
                         const EstimatorParams&) = default;
};

std::string serialize_params(const EstimatorParams& params);
EstimatorParams parse_params(const std::string& text);
void write_params(const std::filesystem::path& path,
                  const EstimatorParams& params);
EstimatorParams read_params(const std::filesystem::path& path);

double softplus(double z) noexcept;
double softplus_inverse(double v);

/// softplus(W psi(y) + c) + 1e-6 per component.
ExponentialParams predict_lambda(const EstimatorParams& params,
                                 const Image& y);

/// Exactly params.cg_steps CG iterations from bicubic(y) with the kernel
/// k_{b2} and ridge softplus(log_ridge).
Image restore(const EstimatorParams& params, const Image& y,
              const BandwidthVector& b2, const DegradationConfig& cfg);

struct LossWeights {
  double alpha_g = 1.0;
  double alpha_r = 1.0;
  void validate() const;
};

struct LabeledSample {
  Image x;
  Image y;
  std::optional<Kernel> kernel;
};

struct TrainingSet {
  std::vector<LabeledSample> labeled;
  std::vector<Image> unlabeled;
};

/// -(1/|batch|) sum_y [mean_m log p(y | x_m, b2_m) - KL(q_y || prior)] with
/// b2_m reparameterized from predict_lambda(y) and x_m = restore(y, b2_m).
double loss_gem(const EstimatorParams& params, std::span<const Image> batch,
                const ExponentialParams& lambda_prior,
                const DegradationConfig& cfg, const McDraws& draws);

/// Batch mean of the per-pixel MSE between x and restore(y, b2_m), averaged
/// over the draws.
double loss_sup(const EstimatorParams& params,
                std::span<const LabeledSample> batch,
                const DegradationConfig& cfg, const McDraws& draws);

/// loss_sup plus the batch mean of ||k - k_{b2_m}||_F^2 (ground-truth kernels
/// zero-padded to the model support).
double loss_sup_kernel(const EstimatorParams& params,
                       std::span<const LabeledSample> batch,
                       const DegradationConfig& cfg, const McDraws& draws);

/// alpha_g * loss_gem(labeled LR + unlabeled LR) + alpha_r * supervised term.
/// The supervised term includes the kernel penalty for samples that carry a
/// ground-truth kernel.
double total_loss(const EstimatorParams& params, const TrainingSet& data,
                  const LossWeights& weights,
                  const ExponentialParams& lambda_prior,
                  const DegradationConfig& cfg, const McDraws& draws);

/// Fraction of unlabeled samples, M / (M + N).
double unsupervised_rate(std::size_t labeled, std::size_t unlabeled);

struct TrainConfig {
  int epochs = 30;
  int batch_size = 8;
  double learning_rate = 0.0002;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double adam_epsilon = 1e-8;
  std::uint64_t seed = 0;
  int n_mc = 2;
  double fd_step = 1e-4;
  double divergence_threshold = 1e6;

  void validate() const;
};

struct TrainResult {
  EstimatorParams params;
  /// curve[0] is the initial loss; curve[e] the loss after epoch e, both
  /// measured on the full data with one fixed reporting draw table.
  std::vector<double> curve;
  double eta = 0.0;
  int steps = 0;
};

/// Central finite-difference gradient of total_loss over all parameters.
std::vector<double> finite_difference_gradient(
    const EstimatorParams& params, const TrainingSet& batch,
    const LossWeights& weights, const ExponentialParams& lambda_prior,
    const DegradationConfig& cfg, const McDraws& draws, double step);

/// Adam on total_loss with finite-difference gradients. Each epoch shuffles
/// the union of labeled and unlabeled samples into minibatches and draws a
/// fresh table of uniforms. Throws DivergenceError if a loss is non-finite
/// or exceeds the divergence threshold.
TrainResult train(const TrainingSet& data, const LossWeights& weights,
                  const TrainConfig& train_cfg, EstimatorParams init,
                  const ExponentialParams& lambda_prior,
                  const DegradationConfig& cfg);

}  // namespace blindsr
