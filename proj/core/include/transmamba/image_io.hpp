#pragma once

#include <filesystem>

#include "transmamba/tensor.hpp"

namespace transmamba {

/// Decodes an 8-bit PNG (any colour type is converted to RGB) or a binary
/// PPM (P6, maxval <= 255) into a [3 x H x W] tensor in [0, 1].
Tensor load_image(const std::filesystem::path& path);

/// Writes a [3 x H x W] tensor as 8-bit RGB; the format follows the
/// extension (.png or .ppm). Values are clamped and rounded to v*255.
void save_image(const std::filesystem::path& path, const Tensor& image);

bool is_image_path(const std::filesystem::path& path);

}  // namespace transmamba
