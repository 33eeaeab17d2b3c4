#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace blindsr {

using Rng = std::mt19937_64;

/// Stable child seed for (master, purpose); identical across runs/platforms.
std::uint64_t derive_seed(std::uint64_t master, std::string_view purpose);
std::uint64_t derive_seed(std::uint64_t master, std::string_view purpose,
                          std::uint64_t index);

/// Uniform double in [0, 1) from the top 53 bits of one draw.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace blindsr
