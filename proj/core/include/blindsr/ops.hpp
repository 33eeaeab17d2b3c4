#pragma once

#include <string>
#include <string_view>

#include "blindsr/image.hpp"
#include "blindsr/kernel.hpp"

namespace blindsr {

enum class BoundaryMode { kCircular, kReplicate };

std::string_view to_string(BoundaryMode mode) noexcept;
/// Accepts "circular" or "replicate"; throws DomainError otherwise.
BoundaryMode parse_boundary_mode(std::string_view name);

/// "Same"-size convolution of every channel with `k`:
///   out(i, j) = sum_{u,v} k(u + r, v + r) * x(i - u, j - v)
/// Off-image samples follow `boundary`. With replicate boundaries the kernel
/// must not be larger than the image.
Image conv2d(const Image& x, const Kernel& k, BoundaryMode boundary);

/// Exact adjoint of conv2d: correlation with `k` followed by folding the
/// boundary extension back onto the pixels it was copied from.
Image conv2d_adjoint(const Image& u, const Kernel& k, BoundaryMode boundary);

/// Keeps the top-left sample of every s x s block.
Image downsample(const Image& z, int scale);

/// Zero-filled upsampling onto an (H*s, W*s) grid; adjoint of downsample.
Image downsample_adjoint(const Image& u, int scale);

/// downsample(conv2d(x, k), s) evaluated only on the retained grid.
Image blur_downsample(const Image& x, const Kernel& k, int scale,
                      BoundaryMode boundary);

/// conv2d_adjoint(downsample_adjoint(u, s), k) without materializing the
/// zero-filled intermediate.
Image blur_downsample_adjoint(const Image& u, const Kernel& k, int scale,
                              BoundaryMode boundary);

/// Catmull-Rom (a = -0.5) bicubic upsampling by an integer factor, clamped
/// to [0, 1]. Output pixel (i, j) samples the input at (i / s, j / s) so that
/// downsample(upsample_bicubic(y, s), s) == y for y in [0, 1].
Image upsample_bicubic(const Image& y, int scale);

Image crop(const Image& x, int top, int left, int height, int width);

/// Center crop to the largest height/width divisible by `scale`.
Image center_crop_to_multiple(const Image& x, int scale);

/// Cyclic shift by (dy, dx) whole pixels.
Image shift_circular(const Image& x, int dy, int dx);

}  // namespace blindsr
