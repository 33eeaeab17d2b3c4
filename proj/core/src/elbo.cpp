#include "blindsr/elbo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "blindsr/errors.hpp"
#include "blindsr/rng.hpp"

namespace blindsr {

namespace {

void require_likelihood_config(const DegradationConfig& cfg) {
  cfg.validate();
  if (!(cfg.sigma_n > 0.0)) throw DomainError("ELBO requires sigma_n > 0");
}

void require_components(const ExponentialParams& rate, const McDraws& draws) {
  if (static_cast<int>(rate.size()) != draws.components()) {
    throw DimensionError("draw table width does not match component count");
  }
}

double log_sum_exp(const std::vector<double>& v) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double a : v) mx = std::max(mx, a);
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double a : v) s += std::exp(a - mx);
  return mx + std::log(s);
}

}  // namespace

McDraws::McDraws(int n_mc, int components, std::vector<double> xi)
    : n_mc_(n_mc), components_(components), xi_(std::move(xi)) {
  if (n_mc < 1) throw DomainError("Monte Carlo draw table must be non-empty");
  if (components < 1) throw DomainError("draw table needs >= 1 component");
  if (xi_.size() != static_cast<std::size_t>(n_mc) * components) {
    throw DimensionError("draw table size mismatch");
  }
  for (double v : xi_) {
    if (!(v >= 0.0 && v < 1.0)) throw DomainError("draws must lie in [0, 1)");
  }
}

McDraws McDraws::generate(int n_mc, int components, std::uint64_t seed) {
  if (n_mc < 1 || components < 1) {
    throw DomainError("Monte Carlo draw table must be non-empty");
  }
  // Latin hypercube: row m of each column falls in its own stratum
  // [k/n, (k+1)/n), with the strata shuffled independently per column.
  Rng rng(seed);
  std::vector<double> xi(static_cast<std::size_t>(n_mc) * components);
  std::vector<int> perm(n_mc);
  for (int l = 0; l < components; ++l) {
    for (int m = 0; m < n_mc; ++m) perm[m] = m;
    for (int m = n_mc - 1; m > 0; --m) {
      const int k = std::min(m, static_cast<int>(uniform01(rng) * (m + 1)));
      std::swap(perm[m], perm[k]);
    }
    for (int m = 0; m < n_mc; ++m) {
      const double v = (perm[m] + uniform01(rng)) / n_mc;
      xi[static_cast<std::size_t>(m) * components + l] =
          std::min(v, std::nextafter(1.0, 0.0));
    }
  }
  return McDraws(n_mc, components, std::move(xi));
}

ElboEstimate elbo(const Image& y, const Image& x,
                  const ExponentialParams& lambda_hat,
                  const ExponentialParams& lambda_prior,
                  const DegradationConfig& cfg, const McDraws& draws) {
  require_likelihood_config(cfg);
  require_components(lambda_hat, draws);
  std::vector<double> ll(draws.n_mc());
  for (int m = 0; m < draws.n_mc(); ++m) {
    ll[m] = log_likelihood(y, x, sample_bandwidths(lambda_hat, draws.row(m)),
                           cfg);
  }
  ElboEstimate est;
  est.n_mc = draws.n_mc();
  double mean = 0.0;
  for (double v : ll) mean += v;
  mean /= est.n_mc;
  if (est.n_mc > 1) {
    double var = 0.0;
    for (double v : ll) var += (v - mean) * (v - mean);
    var /= (est.n_mc - 1);
    est.std_error = std::sqrt(var / est.n_mc);
  }
  est.data_term = mean;
  est.kl_term = kl_exponential(lambda_hat, lambda_prior);
  est.value = est.data_term - est.kl_term;
  return est;
}

Image grad_elbo_x(const Image& y, const Image& x,
                  const ExponentialParams& lambda_hat,
                  const DegradationConfig& cfg, const McDraws& draws) {
  require_likelihood_config(cfg);
  require_components(lambda_hat, draws);
  Image grad(x.channels(), x.height(), x.width());
  const double weight = 1.0 / (draws.n_mc() * cfg.sigma_n * cfg.sigma_n);
  for (int m = 0; m < draws.n_mc(); ++m) {
    const MixtureKernel k = make_mixture_kernel(
        sample_bandwidths(lambda_hat, draws.row(m)), cfg.support);
    Image residual = y - blur_downsample(x, k, cfg.scale, cfg.boundary);
    axpy(weight,
         blur_downsample_adjoint(residual, k, cfg.scale, cfg.boundary), grad);
  }
  return grad;
}

std::vector<double> grad_elbo_lambda(const Image& y, const Image& x,
                                     const ExponentialParams& lambda_hat,
                                     const ExponentialParams& lambda_prior,
                                     const DegradationConfig& cfg,
                                     const McDraws& draws) {
  require_likelihood_config(cfg);
  require_components(lambda_hat, draws);
  const std::size_t n_comp = lambda_hat.size();
  std::vector<double> grad(n_comp, 0.0);
  for (int m = 0; m < draws.n_mc(); ++m) {
    const BandwidthVector b2 = sample_bandwidths(lambda_hat, draws.row(m));
    const auto db2 = sample_bandwidths_derivative(lambda_hat, draws.row(m));
    for (std::size_t l = 0; l < n_comp; ++l) {
      if (db2[l] == 0.0) continue;
      const double h = 1e-4 * b2[l];
      std::vector<double> plus(b2.values().begin(), b2.values().end());
      std::vector<double> minus = plus;
      plus[l] += h;
      minus[l] -= h;
      const double dll =
          (log_likelihood(y, x, BandwidthVector(std::move(plus)), cfg) -
           log_likelihood(y, x, BandwidthVector(std::move(minus)), cfg)) /
          (2.0 * h);
      grad[l] += dll * db2[l];
    }
  }
  const auto dkl = kl_exponential_gradient(lambda_hat, lambda_prior);
  for (std::size_t l = 0; l < n_comp; ++l) {
    grad[l] = grad[l] / draws.n_mc() - dkl[l];
  }
  return grad;
}

double marginal_log_likelihood_quadrature(const Image& y, const Image& x,
                                          const ExponentialParams& lambda_prior,
                                          const DegradationConfig& cfg,
                                          const QuadratureGrid& grid) {
  require_likelihood_config(cfg);
  const std::size_t n_comp = lambda_prior.size();
  if (n_comp > 2) {
    throw UnsupportedError("quadrature supports at most 2 mixture components");
  }
  if (grid.nodes < 2 || !(grid.b2_min > 0.0) || !(grid.b2_max > grid.b2_min)) {
    throw DomainError("quadrature grid needs >= 2 nodes on a positive range");
  }
  // Trapezoid rule in b = sqrt(b^2), so db^2 = 2 b db; nodes crowd toward
  // small bandwidths where the kernel changes fastest.
  const int n = grid.nodes;
  const double b_min = std::sqrt(grid.b2_min);
  const double h = (std::sqrt(grid.b2_max) - b_min) / (n - 1);
  std::vector<double> nodes(n);
  std::vector<double> log_w(n);
  for (int i = 0; i < n; ++i) {
    const double b = b_min + h * i;
    nodes[i] = b * b;
    log_w[i] = std::log(((i == 0 || i == n - 1) ? 0.5 * h : h) * 2.0 * b);
  }
  auto log_prior = [&](std::size_t l, double t) {
    return std::log(lambda_prior[l]) - lambda_prior[l] * t;
  };

  std::vector<double> terms;
  if (n_comp == 1) {
    terms.reserve(n);
    for (int i = 0; i < n; ++i) {
      terms.push_back(log_w[i] + log_prior(0, nodes[i]) +
                      log_likelihood(y, x, BandwidthVector({nodes[i]}), cfg));
    }
  } else {
    terms.reserve(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        terms.push_back(
            log_w[i] + log_w[j] + log_prior(0, nodes[i]) +
            log_prior(1, nodes[j]) +
            log_likelihood(y, x, BandwidthVector({nodes[i], nodes[j]}), cfg));
      }
    }
  }
  return log_sum_exp(terms);
}

}  // namespace blindsr
