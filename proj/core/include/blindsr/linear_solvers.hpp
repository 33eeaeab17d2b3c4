#pragma once

#include <functional>

#include "blindsr/image.hpp"

namespace blindsr {

struct CgResult {
  Image x;
  int iterations = 0;
  double relative_residual = 0.0;
  /// Nonpositive or non-finite curvature was met; x is the last good iterate.
  bool breakdown = false;
};

/// Conjugate gradient for a symmetric positive (semi-)definite operator,
/// warm-started at x0. Stops after `max_iters` iterations or once
/// ||r|| <= rel_tol * ||rhs||. rel_tol = 0 runs the full iteration count
/// (used by the fixed-depth restorer).
CgResult conjugate_gradient(const std::function<Image(const Image&)>& apply,
                            const Image& rhs, Image x0, int max_iters,
                            double rel_tol);

}  // namespace blindsr
