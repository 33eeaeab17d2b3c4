#include "blindsr/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "blindsr/errors.hpp"
#include "blindsr/gem.hpp"
#include "blindsr/io_util.hpp"
#include "blindsr/metrics.hpp"
#include "blindsr/ops.hpp"
#include "blindsr/rng.hpp"

namespace blindsr {

namespace {

void require_support(const EstimatorParams& params,
                     const DegradationConfig& cfg) {
  if (params.support != cfg.support) {
    throw DimensionError("estimator kernel support " +
                         std::to_string(params.support) +
                         " does not match degradation support " +
                         std::to_string(cfg.support));
  }
}

double kernel_distance(const Kernel& a, const Kernel& b) {
  auto ga = a.grid();
  auto gb = b.grid();
  double acc = 0.0;
  for (std::size_t i = 0; i < ga.size(); ++i) {
    const double d = ga[i] - gb[i];
    acc += d * d;
  }
  return acc;
}

// Per-sample supervised terms, averaged over the draws.
struct SupTerms {
  double image = 0.0;
  double kernel = 0.0;
};

SupTerms supervised_terms(const EstimatorParams& params,
                          const LabeledSample& s, const DegradationConfig& cfg,
                          const McDraws& draws, bool with_kernel) {
  const ExponentialParams rate = predict_lambda(params, s.y);
  std::optional<Kernel> truth;
  if (with_kernel) {
    if (!s.kernel) throw DomainError("kernel-supervised sample lacks a kernel");
    truth = resize_kernel_support(*s.kernel, params.support);
  }
  SupTerms t;
  for (int m = 0; m < draws.n_mc(); ++m) {
    const BandwidthVector b2 = sample_bandwidths(rate, draws.row(m));
    const Image xr = restore(params, s.y, b2, cfg);
    require_same_shape(s.x, xr, "supervised loss");
    t.image += mse(s.x, xr);
    if (truth) {
      t.kernel += kernel_distance(*truth, make_mixture_kernel(b2, params.support));
    }
  }
  t.image /= draws.n_mc();
  t.kernel /= draws.n_mc();
  return t;
}

}  // namespace

EstimatorParams EstimatorParams::zeros(int components, int support,
                                       int cg_steps, double log_ridge) {
  EstimatorParams p;
  p.components = components;
  p.support = support;
  p.weights.assign(static_cast<std::size_t>(components) * kFeatureCount, 0.0);
  p.bias.assign(components, 0.0);
  p.cg_steps = cg_steps;
  p.log_ridge = log_ridge;
  p.validate();
  return p;
}

std::vector<double> EstimatorParams::flatten() const {
  std::vector<double> flat(weights);
  flat.insert(flat.end(), bias.begin(), bias.end());
  flat.push_back(log_ridge);
  return flat;
}

void EstimatorParams::assign(std::span<const double> flat) {
  if (flat.size() != parameter_count()) {
    throw DimensionError("parameter vector has the wrong length");
  }
  std::copy_n(flat.begin(), weights.size(), weights.begin());
  std::copy_n(flat.begin() + weights.size(), bias.size(), bias.begin());
  log_ridge = flat.back();
}

void EstimatorParams::validate() const {
  if (components < 1) throw DomainError("estimator needs >= 1 component");
  if (support < 1 || support % 2 == 0) {
    throw DimensionError("estimator kernel support must be odd");
  }
  if (weights.size() != static_cast<std::size_t>(components) * kFeatureCount ||
      bias.size() != static_cast<std::size_t>(components)) {
    throw DimensionError("estimator parameter shapes do not match L");
  }
  if (cg_steps < 1) throw DomainError("restorer needs >= 1 CG step");
  auto finite = [](double v) { return std::isfinite(v); };
  if (!std::all_of(weights.begin(), weights.end(), finite) ||
      !std::all_of(bias.begin(), bias.end(), finite) || !finite(log_ridge)) {
    throw DomainError("estimator parameters must be finite");
  }
}

std::string serialize_params(const EstimatorParams& params) {
  nlohmann::json j;
  j["L"] = params.components;
  j["P"] = params.support;
  j["T"] = params.cg_steps;
  j["W"] = params.weights;
  j["c"] = params.bias;
  j["log_ridge"] = params.log_ridge;
  return j.dump(2) + "\n";
}

EstimatorParams parse_params(const std::string& text) {
  EstimatorParams p;
  try {
    const auto j = nlohmann::json::parse(text);
    p.components = j.at("L").get<int>();
    p.support = j.at("P").get<int>();
    p.cg_steps = j.at("T").get<int>();
    p.weights = j.at("W").get<std::vector<double>>();
    p.bias = j.at("c").get<std::vector<double>>();
    p.log_ridge = j.at("log_ridge").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("params: ") + e.what());
  }
  p.validate();
  return p;
}

void write_params(const std::filesystem::path& path,
                  const EstimatorParams& params) {
  write_file_atomic(path, serialize_params(params));
}

EstimatorParams read_params(const std::filesystem::path& path) {
  return parse_params(read_file(path));
}

double softplus(double z) noexcept {
  return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
}

double softplus_inverse(double v) {
  if (!(v > 0.0)) throw DomainError("softplus inverse needs v > 0");
  return v > 30.0 ? v + std::log(-std::expm1(-v)) : std::log(std::expm1(v));
}

ExponentialParams predict_lambda(const EstimatorParams& params,
                                 const Image& y) {
  params.validate();
  const FeatureVector f = extract_features(y);
  std::vector<double> rates(params.components);
  for (int l = 0; l < params.components; ++l) {
    double z = params.bias[l];
    for (int q = 0; q < kFeatureCount; ++q) {
      z += params.weights[static_cast<std::size_t>(l) * kFeatureCount + q] *
           f.psi[q];
    }
    rates[l] = softplus(z) + 1e-6;
  }
  return ExponentialParams(std::move(rates));
}

Image restore(const EstimatorParams& params, const Image& y,
              const BandwidthVector& b2, const DegradationConfig& cfg) {
  params.validate();
  require_support(params, cfg);
  const Image anchor = upsample_bicubic(y, cfg.scale);
  const std::vector<Kernel> kernels{make_mixture_kernel(b2, params.support)};
  CgResult cg = solve_deconvolution(y, kernels, anchor, anchor,
                                    softplus(params.log_ridge), cfg,
                                    params.cg_steps, 0.0);
  if (!cg.x.all_finite()) throw NumericalError("restorer output not finite");
  return std::move(cg.x);
}

void LossWeights::validate() const {
  if (!(alpha_g >= 0.0) || !(alpha_r >= 0.0)) {
    throw DomainError("loss weights must be >= 0");
  }
  if (alpha_g == 0.0 && alpha_r == 0.0) {
    throw DomainError("at least one loss weight must be positive");
  }
}

double loss_gem(const EstimatorParams& params, std::span<const Image> batch,
                const ExponentialParams& lambda_prior,
                const DegradationConfig& cfg, const McDraws& draws) {
  if (batch.empty()) throw DomainError("loss_gem: empty batch");
  require_support(params, cfg);
  double total = 0.0;
  for (const Image& y : batch) {
    const ExponentialParams rate = predict_lambda(params, y);
    double data = 0.0;
    for (int m = 0; m < draws.n_mc(); ++m) {
      const BandwidthVector b2 = sample_bandwidths(rate, draws.row(m));
      data += log_likelihood(y, restore(params, y, b2, cfg), b2, cfg);
    }
    total += data / draws.n_mc() - kl_exponential(rate, lambda_prior);
  }
  return -total / static_cast<double>(batch.size());
}

double loss_sup(const EstimatorParams& params,
                std::span<const LabeledSample> batch,
                const DegradationConfig& cfg, const McDraws& draws) {
  if (batch.empty()) throw DomainError("loss_sup: empty batch");
  double total = 0.0;
  for (const auto& s : batch) {
    total += supervised_terms(params, s, cfg, draws, false).image;
  }
  return total / static_cast<double>(batch.size());
}

double loss_sup_kernel(const EstimatorParams& params,
                       std::span<const LabeledSample> batch,
                       const DegradationConfig& cfg, const McDraws& draws) {
  if (batch.empty()) throw DomainError("loss_sup_kernel: empty batch");
  double total = 0.0;
  for (const auto& s : batch) {
    const SupTerms t = supervised_terms(params, s, cfg, draws, true);
    total += t.image + t.kernel;
  }
  return total / static_cast<double>(batch.size());
}

double total_loss(const EstimatorParams& params, const TrainingSet& data,
                  const LossWeights& weights,
                  const ExponentialParams& lambda_prior,
                  const DegradationConfig& cfg, const McDraws& draws) {
  weights.validate();
  if (data.labeled.empty() && data.unlabeled.empty()) {
    throw DomainError("total_loss: both datasets are empty");
  }
  double loss = 0.0;
  if (weights.alpha_g > 0.0) {
    std::vector<Image> lr;
    lr.reserve(data.labeled.size() + data.unlabeled.size());
    for (const auto& s : data.labeled) lr.push_back(s.y);
    lr.insert(lr.end(), data.unlabeled.begin(), data.unlabeled.end());
    loss += weights.alpha_g * loss_gem(params, lr, lambda_prior, cfg, draws);
  }
  if (weights.alpha_r > 0.0 && !data.labeled.empty()) {
    double sup = 0.0;
    double kern = 0.0;
    std::size_t n_kernel = 0;
    for (const auto& s : data.labeled) {
      const SupTerms t =
          supervised_terms(params, s, cfg, draws, s.kernel.has_value());
      sup += t.image;
      if (s.kernel) {
        kern += t.kernel;
        ++n_kernel;
      }
    }
    double term = sup / static_cast<double>(data.labeled.size());
    if (n_kernel > 0) term += kern / static_cast<double>(n_kernel);
    loss += weights.alpha_r * term;
  }
  return loss;
}

double unsupervised_rate(std::size_t labeled, std::size_t unlabeled) {
  if (labeled + unlabeled == 0) throw DomainError("no training samples");
  return static_cast<double>(unlabeled) /
         static_cast<double>(labeled + unlabeled);
}

void TrainConfig::validate() const {
  if (epochs < 0) throw DomainError("epochs must be >= 0");
  if (batch_size < 1) throw DomainError("batch_size must be >= 1");
  if (!(learning_rate >= 0.0)) throw DomainError("learning_rate must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw DomainError("Adam betas must lie in [0, 1)");
  }
  if (n_mc < 1) throw DomainError("n_mc must be >= 1");
  if (!(fd_step > 0.0)) throw DomainError("fd_step must be > 0");
}

std::vector<double> finite_difference_gradient(
    const EstimatorParams& params, const TrainingSet& batch,
    const LossWeights& weights, const ExponentialParams& lambda_prior,
    const DegradationConfig& cfg, const McDraws& draws, double step) {
  const std::vector<double> base = params.flatten();
  std::vector<double> grad(base.size());
  EstimatorParams probe = params;
  std::vector<double> flat = base;
  for (std::size_t j = 0; j < base.size(); ++j) {
    flat[j] = base[j] + step;
    probe.assign(flat);
    const double up = total_loss(probe, batch, weights, lambda_prior, cfg, draws);
    flat[j] = base[j] - step;
    probe.assign(flat);
    const double down =
        total_loss(probe, batch, weights, lambda_prior, cfg, draws);
    flat[j] = base[j];
    grad[j] = (up - down) / (2.0 * step);
  }
  return grad;
}

TrainResult train(const TrainingSet& data, const LossWeights& weights,
                  const TrainConfig& train_cfg, EstimatorParams init,
                  const ExponentialParams& lambda_prior,
                  const DegradationConfig& cfg) {
  train_cfg.validate();
  weights.validate();
  init.validate();
  require_support(init, cfg);
  if (static_cast<int>(lambda_prior.size()) != init.components) {
    throw DimensionError("prior and estimator differ in component count");
  }
  const std::size_t n_lab = data.labeled.size();
  const std::size_t n_unl = data.unlabeled.size();
  if (weights.alpha_g == 0.0 && n_lab == 0) {
    throw DomainError("purely supervised training needs labeled data");
  }

  TrainResult result;
  result.eta = unsupervised_rate(n_lab, n_unl);
  result.params = std::move(init);

  const McDraws report_draws = McDraws::generate(
      train_cfg.n_mc, result.params.components,
      derive_seed(train_cfg.seed, "train-report-draws"));
  auto check = [&](double loss, const char* where) {
    if (!std::isfinite(loss) || loss > train_cfg.divergence_threshold) {
      throw DivergenceError(std::string("training diverged (") + where +
                            ", loss=" + std::to_string(loss) + ")");
    }
    return loss;
  };
  result.curve.push_back(check(total_loss(result.params, data, weights,
                                          lambda_prior, cfg, report_draws),
                               "initial"));

  const std::size_t n_params = result.params.parameter_count();
  std::vector<double> m1(n_params, 0.0);
  std::vector<double> m2(n_params, 0.0);
  std::vector<std::size_t> order(n_lab + n_unl);

  for (int epoch = 0; epoch < train_cfg.epochs; ++epoch) {
    const McDraws draws = McDraws::generate(
        train_cfg.n_mc, result.params.components,
        derive_seed(train_cfg.seed, "train-epoch-draws", epoch));
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(train_cfg.seed, "train-shuffle", epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(train_cfg.batch_size)) {
      const std::size_t stop =
          std::min(order.size(), start + static_cast<std::size_t>(train_cfg.batch_size));
      TrainingSet batch;
      for (std::size_t k = start; k < stop; ++k) {
        const std::size_t idx = order[k];
        if (idx < n_lab) {
          batch.labeled.push_back(data.labeled[idx]);
        } else {
          batch.unlabeled.push_back(data.unlabeled[idx - n_lab]);
        }
      }
      // A supervised-only objective has nothing to fit on an unlabeled batch.
      if (weights.alpha_g == 0.0 && batch.labeled.empty()) continue;

      const auto grad =
          finite_difference_gradient(result.params, batch, weights,
                                     lambda_prior, cfg, draws,
                                     train_cfg.fd_step);
      ++result.steps;
      const double bc1 = 1.0 - std::pow(train_cfg.beta1, result.steps);
      const double bc2 = 1.0 - std::pow(train_cfg.beta2, result.steps);
      std::vector<double> flat = result.params.flatten();
      for (std::size_t j = 0; j < n_params; ++j) {
        if (!std::isfinite(grad[j])) {
          throw DivergenceError("training diverged (non-finite gradient)");
        }
        m1[j] = train_cfg.beta1 * m1[j] + (1.0 - train_cfg.beta1) * grad[j];
        m2[j] = train_cfg.beta2 * m2[j] +
                (1.0 - train_cfg.beta2) * grad[j] * grad[j];
        flat[j] -= train_cfg.learning_rate * (m1[j] / bc1) /
                   (std::sqrt(m2[j] / bc2) + train_cfg.adam_epsilon);
      }
      result.params.assign(flat);
    }
    result.curve.push_back(check(total_loss(result.params, data, weights,
                                            lambda_prior, cfg, report_draws),
                                 "epoch"));
  }
  return result;
}

}  // namespace blindsr
