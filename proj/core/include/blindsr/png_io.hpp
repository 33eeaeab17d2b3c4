#pragma once

#include <filesystem>

#include "blindsr/image.hpp"

namespace blindsr {

/// Reads an 8-bit PNG as a 1-channel (grayscale sources) or 3-channel image
/// scaled to [0, 1]. Alpha is dropped. Throws IoError.
Image read_png(const std::filesystem::path& path);

/// Clamps to [0, 1], rounds to 8 bits and writes atomically.
void write_png(const std::filesystem::path& path, const Image& img);

}  // namespace blindsr
