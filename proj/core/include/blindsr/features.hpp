#pragma once

#include <array>

#include "blindsr/image.hpp"

namespace blindsr {

inline constexpr int kFeatureCount = 6;

/// Global statistics of the luma of an LR image:
///   0 mean intensity, 1 intensity std, 2 mean |horizontal difference|,
///   3 mean |vertical difference|, 4 mean |4-neighbour Laplacian|,
///   5 fraction of non-DC Fourier power beyond half the Nyquist radius.
/// Differences wrap around, so every entry is invariant to cyclic shifts.
struct FeatureVector {
  std::array<double, kFeatureCount> psi{};
};

FeatureVector extract_features(const Image& y);

}  // namespace blindsr
