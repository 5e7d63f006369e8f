#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "tugs/image.hpp"

namespace tugs {

// Learnable medium: backscatter color at infinity plus the 1x1 convolution
// (3 weights, 3 biases) that maps the medium depth map to per-channel
// backscatter rates.
struct MediumParams {
  Eigen::Vector3d gamma_inf{0.1, 0.2, 0.3};
  Eigen::Vector3d conv_weight{1.0, 1.0, 1.0};
  Eigen::Vector3d conv_bias{0.0, 0.0, 0.0};
};

/// gamma_inf set per the training defaults, conv weights seeded uniform in
/// [0, 1), biases zero.
MediumParams default_medium_params(std::uint64_t seed);

/// B_c = gamma_inf_c * (1 - exp(-relu(w_c * z + b_c))) per pixel.
Image backscatter_image(const Image& z_alpha, const MediumParams& m);

/// I = J * exp(-relu(F_alpha) * z_alpha) + B. Shapes must agree.
Image compose_underwater(const Image& j, const Image& f_alpha,
                         const Image& z_alpha, const Image& b);

/// Fog model used by the synthetic generator:
/// I = J * exp(-alpha_c z) + gamma_inf_c * (1 - exp(-alpha_c z)).
Image compose_fog(const Image& j, const Image& z,
                  const Eigen::Vector3d& alpha_c,
                  const Eigen::Vector3d& gamma_inf);

struct AmeGrads {
  Image d_j;        // H x W x 3
  Image d_f_alpha;  // H x W x 3
  Image d_z_alpha;  // H x W
  Eigen::Vector3d d_gamma_inf = Eigen::Vector3d::Zero();
  Eigen::Vector3d d_conv_weight = Eigen::Vector3d::Zero();
  Eigen::Vector3d d_conv_bias = Eigen::Vector3d::Zero();
};

/// Analytic backward of the backscatter + composition chain. `d_i` is the
/// loss gradient at the composed image; `d_b_extra`, when non-empty, is an
/// additional gradient arriving directly at the backscatter image (the
/// direct-signal losses consume D = G - B). ReLU gradients are 0 at and
/// below zero pre-activations.
AmeGrads ame_backward(const Image& j, const Image& f_alpha,
                      const Image& z_alpha, const MediumParams& m,
                      const Image& d_i, const Image& d_b_extra = {});

}  // namespace tugs
