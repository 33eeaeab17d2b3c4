#pragma once

#include "blindsr/image.hpp"

namespace blindsr {

inline constexpr double kPsnrCapDb = 100.0;

/// BT.601 video-range luma, Y = (16 + 65.481 R + 128.553 G + 24.966 B) / 255.
/// Single-channel input is returned unchanged.
Image rgb_to_y(const Image& rgb);

double mse(const Image& a, const Image& b);

/// 10 log10(1 / MSE) for unit dynamic range; 100 dB once MSE < 1e-10.
double psnr(const Image& a, const Image& b);

/// Mean local SSIM with an 11x11 Gaussian window (sigma 1.5),
/// C1 = 0.01^2, C2 = 0.03^2, over windows fully inside the image. Images
/// smaller than 11 pixels use the largest odd window that fits. Multi-channel
/// input averages the per-channel scores.
double ssim(const Image& a, const Image& b);

/// Drops `border` pixels from every side; border 0 returns the input.
Image shave_border(const Image& x, int border);

}  // namespace blindsr
