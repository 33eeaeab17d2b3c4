#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "blindsr/degradation.hpp"
#include "blindsr/elbo.hpp"
#include "blindsr/image.hpp"
#include "blindsr/kernel.hpp"
#include "blindsr/linear_solvers.hpp"

namespace blindsr {

struct GemConfig {
  int max_outer = 50;
  int e_steps = 3;
  int m_cg_iters = 20;
  double tol_rel = 1e-5;
  double ridge = 1e-3;
  int n_mc = 8;
  std::uint64_t seed = 0;
  ExponentialParams lambda_prior = ExponentialParams::uniform(3, 0.5);
  /// Starting posterior rates; defaults to the prior when unset.
  std::optional<ExponentialParams> lambda_init;
  DegradationConfig degradation;

  void validate() const;
  const ExponentialParams& initial_rates() const {
    return lambda_init ? *lambda_init : lambda_prior;
  }
};

struct GemState {
  Image x_hat;
  ExponentialParams lambda_hat;
  /// ELBO at the starting point (before any half-step).
  ElboEstimate initial;
  /// One entry per completed half-step (E, M, E, M, ...).
  std::vector<ElboEstimate> elbo_trace;
  int outer_iter = 0;
  /// Set when some M-step hit a CG breakdown.
  bool cg_warning = false;
};

/// Backtracking (Armijo, c = 1e-4) ascent of the fixed-draw ELBO over
/// log(lambda_hat), `cfg.e_steps` iterations. Never returns rates with a
/// lower ELBO than `lambda_in`. Throws NumericalError on a non-finite
/// gradient.
ExponentialParams e_step(const Image& y, const Image& x,
                         const ExponentialParams& lambda_in,
                         const ExponentialParams& lambda_prior,
                         const GemConfig& cfg, const McDraws& draws);

struct MStepResult {
  Image x;
  int cg_iterations = 0;
  bool cg_breakdown = false;
};

/// Partial maximization over x: warm-started CG on
///   (1/n) sum_m ||y - D K_m x||^2 / (2 sigma^2) + ridge ||x - bicubic(y)||^2
/// capped at cfg.m_cg_iters iterations (residual tolerance 1e-8). If the
/// ridge term makes the ELBO drop, the step toward the CG iterate is halved
/// until it does not.
MStepResult m_step(const Image& y, const ExponentialParams& lambda_hat,
                   const Image& x_in, const GemConfig& cfg,
                   const McDraws& draws);

/// Alternates e_step and m_step from x = bicubic(y), lambda = lambda_init,
/// on one fixed draw table, until the relative ELBO change over an outer
/// iteration drops below tol_rel or max_outer is reached.
GemState solve_blind(const Image& y, const GemConfig& cfg);

/// One M-step with the kernel fixed at k_{b2}: CG from bicubic(y), capped at
/// cfg.m_cg_iters.
Image solve_nonblind(const Image& y, const BandwidthVector& b2,
                     const GemConfig& cfg);

/// Shared least-squares core: minimizes
///   (1/n) sum_k ||y - D K_k x||^2 / (2 sigma^2) + ridge ||x - anchor||^2
/// by CG from x0.
CgResult solve_deconvolution(const Image& y, std::span<const Kernel> kernels,
                             const Image& x0, const Image& anchor,
                             double ridge, const DegradationConfig& cfg,
                             int max_iters, double rel_tol);

}  // namespace blindsr
