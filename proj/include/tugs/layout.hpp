#pragma once

namespace tugs {

// Fixed layout of one Gaussian's raw parameter row. The opacity offset is
// shared with the factor-side opacity computation in tensor.hpp, so both
// sides of the representation agree on which template row is opacity.
struct GaussianLayout {
  static constexpr int kPosition = 0;  // 3: world-space position
  static constexpr int kLogScale = 3;  // 3: log of per-axis scale
  static constexpr int kRotation = 6;  // 4: quaternion (w, x, y, z)
  static constexpr int kOpacity = 10;  // 1: opacity logit
  static constexpr int kSh = 11;       // 48: SH coefficients, 16 x 3 row-major
  static constexpr int kShCoeffCount = 16;
  static constexpr int kChannels = 3;
  static constexpr int kParamCount = 59;

  static constexpr int sh_index(int coeff, int channel) {
    return kSh + coeff * kChannels + channel;
  }
};

}  // namespace tugs
