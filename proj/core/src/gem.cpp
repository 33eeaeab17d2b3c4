#include "blindsr/gem.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <sstream>

#include "blindsr/errors.hpp"
#include "blindsr/ops.hpp"
#include "blindsr/rng.hpp"

namespace blindsr {

namespace {

constexpr double kArmijo = 1e-4;
constexpr int kMaxBacktracks = 40;

std::string dump_rates(std::span<const double> rates,
                       std::span<const double> grad) {
  std::ostringstream os;
  os.precision(17);
  os << "lambda_hat=[";
  for (std::size_t i = 0; i < rates.size(); ++i) os << (i ? "," : "") << rates[i];
  os << "] gradient=[";
  for (std::size_t i = 0; i < grad.size(); ++i) os << (i ? "," : "") << grad[i];
  os << "]";
  return os.str();
}

ExponentialParams exp_of(const std::vector<double>& log_rates) {
  std::vector<double> r(log_rates.size());
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = std::exp(log_rates[i]);
  return ExponentialParams(std::move(r));
}

std::vector<Kernel> sampled_kernels(const ExponentialParams& lambda_hat,
                                    const McDraws& draws, int support) {
  std::vector<Kernel> kernels;
  kernels.reserve(draws.n_mc());
  for (int m = 0; m < draws.n_mc(); ++m) {
    kernels.push_back(make_mixture_kernel(
        sample_bandwidths(lambda_hat, draws.row(m)), support));
  }
  return kernels;
}

}  // namespace

void GemConfig::validate() const {
  if (max_outer < 0) throw DomainError("max_outer must be >= 0");
  if (e_steps < 0) throw DomainError("e_steps must be >= 0");
  if (m_cg_iters < 0) {
    throw DomainError("CG iteration caps must be >= 0");
  }
  if (!(tol_rel > 0.0)) throw DomainError("tol_rel must be > 0");
  if (!(ridge >= 0.0) || !std::isfinite(ridge)) {
    throw DomainError("ridge must be finite and >= 0");
  }
  if (n_mc < 1) throw DomainError("n_mc must be >= 1");
  if (lambda_prior.size() == 0) throw DomainError("prior rates are empty");
  if (lambda_init && lambda_init->size() != lambda_prior.size()) {
    throw DomainError("lambda_init and prior differ in component count");
  }
  degradation.validate();
  if (!(degradation.sigma_n > 0.0)) {
    throw DomainError("the solver needs sigma_n > 0");
  }
}

CgResult solve_deconvolution(const Image& y, std::span<const Kernel> kernels,
                             const Image& x0, const Image& anchor,
                             double ridge, const DegradationConfig& cfg,
                             int max_iters, double rel_tol) {
  if (kernels.empty()) throw DomainError("deconvolution needs >= 1 kernel");
  require_same_shape(x0, anchor, "deconvolution start/anchor");
  const double data_w =
      1.0 / (static_cast<double>(kernels.size()) * cfg.sigma_n * cfg.sigma_n);
  const double ridge_w = 2.0 * ridge;

  auto apply = [&](const Image& v) {
    Image out(v.channels(), v.height(), v.width());
    for (const Kernel& k : kernels) {
      axpy(data_w,
           blur_downsample_adjoint(
               blur_downsample(v, k, cfg.scale, cfg.boundary), k, cfg.scale,
               cfg.boundary),
           out);
    }
    if (ridge_w > 0.0) axpy(ridge_w, v, out);
    return out;
  };

  Image rhs(x0.channels(), x0.height(), x0.width());
  for (const Kernel& k : kernels) {
    axpy(data_w, blur_downsample_adjoint(y, k, cfg.scale, cfg.boundary), rhs);
  }
  if (ridge_w > 0.0) axpy(ridge_w, anchor, rhs);
  return conjugate_gradient(apply, rhs, x0, max_iters, rel_tol);
}

ExponentialParams e_step(const Image& y, const Image& x,
                         const ExponentialParams& lambda_in,
                         const ExponentialParams& lambda_prior,
                         const GemConfig& cfg, const McDraws& draws) {
  const DegradationConfig& dcfg = cfg.degradation;
  std::vector<double> theta(lambda_in.size());
  for (std::size_t l = 0; l < theta.size(); ++l) {
    theta[l] = std::log(lambda_in[l]);
  }
  ExponentialParams current = lambda_in;
  double f_cur = elbo(y, x, current, lambda_prior, dcfg, draws).value;
  double step = 1.0;

  for (int it = 0; it < cfg.e_steps; ++it) {
    const auto g = grad_elbo_lambda(y, x, current, lambda_prior, dcfg, draws);
    std::vector<double> g_theta(g.size());
    double gn2 = 0.0;
    for (std::size_t l = 0; l < g.size(); ++l) {
      g_theta[l] = g[l] * current[l];
      gn2 += g_theta[l] * g_theta[l];
    }
    if (!std::isfinite(gn2)) {
      throw NumericalError("e_step: non-finite gradient; " +
                           dump_rates(current.values(), g));
    }
    const double gn = std::sqrt(gn2);
    if (gn == 0.0) break;

    bool accepted = false;
    double t = std::min(1.0, 2.0 * step);
    for (int bt = 0; bt < kMaxBacktracks; ++bt, t *= 0.5) {
      std::vector<double> trial(theta.size());
      for (std::size_t l = 0; l < theta.size(); ++l) {
        trial[l] = theta[l] + t * g_theta[l] / gn;
      }
      ExponentialParams cand = exp_of(trial);
      const double f_new = elbo(y, x, cand, lambda_prior, dcfg, draws).value;
      if (std::isfinite(f_new) && f_new >= f_cur + kArmijo * t * gn) {
        theta = std::move(trial);
        current = std::move(cand);
        f_cur = f_new;
        step = t;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
  }
  return current;
}

MStepResult m_step(const Image& y, const ExponentialParams& lambda_hat,
                   const Image& x_in, const GemConfig& cfg,
                   const McDraws& draws) {
  const DegradationConfig& dcfg = cfg.degradation;
  const Image anchor = upsample_bicubic(y, dcfg.scale);
  const auto kernels = sampled_kernels(lambda_hat, draws, dcfg.support);
  CgResult cg = solve_deconvolution(y, kernels, x_in, anchor, cfg.ridge, dcfg,
                                    cfg.m_cg_iters, 1e-8);
  MStepResult result;
  result.cg_iterations = cg.iterations;
  result.cg_breakdown = cg.breakdown;

  // The ELBO carries no ridge term; keep the step only where it does not
  // lower the bound.
  const double f_in =
      elbo(y, x_in, lambda_hat, cfg.lambda_prior, dcfg, draws).value;
  Image direction = cg.x - x_in;
  double t = 1.0;
  for (int bt = 0; bt <= kMaxBacktracks; ++bt, t *= 0.5) {
    Image cand = x_in;
    axpy(t, direction, cand);
    const double f_new =
        elbo(y, cand, lambda_hat, cfg.lambda_prior, dcfg, draws).value;
    if (std::isfinite(f_new) && f_new >= f_in && cand.all_finite()) {
      result.x = std::move(cand);
      return result;
    }
  }
  result.x = x_in;
  return result;
}

GemState solve_blind(const Image& y, const GemConfig& cfg) {
  cfg.validate();
  const DegradationConfig& dcfg = cfg.degradation;
  if (!y.all_finite()) throw DomainError("observation has non-finite values");

  GemState state;
  state.x_hat = upsample_bicubic(y, dcfg.scale);
  state.lambda_hat = cfg.initial_rates();
  const McDraws draws =
      McDraws::generate(cfg.n_mc, static_cast<int>(cfg.lambda_prior.size()),
                        derive_seed(cfg.seed, "gem-draws"));
  state.initial =
      elbo(y, state.x_hat, state.lambda_hat, cfg.lambda_prior, dcfg, draws);
  double f_prev = state.initial.value;

  for (int outer = 0; outer < cfg.max_outer; ++outer) {
    state.lambda_hat = e_step(y, state.x_hat, state.lambda_hat,
                              cfg.lambda_prior, cfg, draws);
    state.elbo_trace.push_back(
        elbo(y, state.x_hat, state.lambda_hat, cfg.lambda_prior, dcfg, draws));

    MStepResult m = m_step(y, state.lambda_hat, state.x_hat, cfg, draws);
    state.cg_warning = state.cg_warning || m.cg_breakdown;
    state.x_hat = std::move(m.x);
    state.elbo_trace.push_back(
        elbo(y, state.x_hat, state.lambda_hat, cfg.lambda_prior, dcfg, draws));
    state.outer_iter = outer + 1;

    const double f_now = state.elbo_trace.back().value;
    const double rel =
        std::abs(f_now - f_prev) / std::max(std::abs(f_prev), 1e-300);
    f_prev = f_now;
    if (rel < cfg.tol_rel) break;
  }
  if (state.cg_warning) {
    std::cerr << "warning: conjugate gradient breakdown during M-step; "
                 "kept the last stable iterate\n";
  }
  if (!state.x_hat.all_finite()) {
    throw NumericalError("solve_blind produced a non-finite image");
  }
  return state;
}

Image solve_nonblind(const Image& y, const BandwidthVector& b2,
                     const GemConfig& cfg) {
  cfg.validate();
  const DegradationConfig& dcfg = cfg.degradation;
  const Image anchor = upsample_bicubic(y, dcfg.scale);
  const std::vector<Kernel> kernels{make_mixture_kernel(b2, dcfg.support)};
  CgResult cg = solve_deconvolution(y, kernels, anchor, anchor, cfg.ridge,
                                    dcfg, cfg.m_cg_iters, 1e-8);
  if (cg.breakdown) {
    std::cerr << "warning: conjugate gradient breakdown in non-blind solve\n";
  }
  if (!cg.x.all_finite()) {
    throw NumericalError("solve_nonblind produced a non-finite image");
  }
  return std::move(cg.x);
}

}  // namespace blindsr
