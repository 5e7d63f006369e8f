#pragma once

#include "tugs/image.hpp"

namespace tugs {

/// 10 * log10(1 / MSE) over all pixels and channels, values on [0, 1].
/// Identical images report +infinity.
double psnr(const Image& a, const Image& b);

}  // namespace tugs
