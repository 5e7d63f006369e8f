#pragma once

#include <filesystem>

#include "tugs/image.hpp"

namespace tugs {

double srgb_to_linear(double s);
double linear_to_srgb(double l);

/// Decodes an 8- or 16-bit PNG (gray, gray+alpha, rgb, or rgba) to a linear
/// H x W x 3 image. 8-bit samples are sRGB-decoded; 16-bit samples are
/// treated as linear and divided by 65535.
Image read_png(const std::filesystem::path& path);

/// Writes a linear image as 16-bit rgb PNG, clamping to [0, 1]. The write is
/// atomic (temp file + rename).
void write_png16(const std::filesystem::path& path, const Image& img);

}  // namespace tugs
