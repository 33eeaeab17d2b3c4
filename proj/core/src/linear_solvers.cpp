#include "blindsr/linear_solvers.hpp"

#include <cmath>

namespace blindsr {

CgResult conjugate_gradient(const std::function<Image(const Image&)>& apply,
                            const Image& rhs, Image x0, int max_iters,
                            double rel_tol) {
  CgResult result;
  result.x = std::move(x0);
  Image r = rhs - apply(result.x);
  Image p = r;
  double rr = squared_norm(r);
  const double rhs_norm = norm(rhs);
  const double target = rel_tol * rhs_norm;
  auto rel = [&](double rr_now) {
    return rhs_norm > 0.0 ? std::sqrt(rr_now) / rhs_norm : std::sqrt(rr_now);
  };
  result.relative_residual = rel(rr);

  for (int it = 0; it < max_iters; ++it) {
    if (rr == 0.0 || std::sqrt(rr) <= target) break;
    const Image ap = apply(p);
    const double pap = dot(p, ap);
    if (!(pap > 0.0) || !std::isfinite(pap)) {
      result.breakdown = true;
      break;
    }
    const double alpha = rr / pap;
    axpy(alpha, p, result.x);
    axpy(-alpha, ap, r);
    const double rr_next = squared_norm(r);
    if (!std::isfinite(rr_next)) {
      axpy(-alpha, p, result.x);
      result.breakdown = true;
      break;
    }
    const double beta = rr_next / rr;
    rr = rr_next;
    p *= beta;
    p += r;
    result.iterations = it + 1;
    result.relative_residual = rel(rr);
  }
  return result;
}

}  // namespace blindsr
