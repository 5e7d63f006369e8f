#pragma once

#include <Eigen/Dense>
#include <optional>

#include "tugs/camera.hpp"
#include "tugs/gaussian.hpp"
#include "tugs/image.hpp"

namespace tugs {

// Front-to-back compositing rules shared by the tiled path and the oracle.
inline constexpr double kAlphaClamp = 0.99;
inline constexpr double kAlphaSkip = 1.0 / 255.0;
inline constexpr double kMinTransmittance = 1e-4;
inline constexpr double kCovDilation = 0.3;
inline constexpr int kTileSize = 16;

struct RenderOutput {
  Image color;  // H x W x 3
  Image depth;  // H x W, alpha-weighted camera depth
  Image alpha;  // H x W, accumulated opacity
};

struct ScreenGaussian {
  Eigen::Vector2d mean2d;   // pixels
  Eigen::Matrix2d cov2d;    // dilated by kCovDilation * I
  double depth = 0.0;       // camera-space z
  Eigen::Vector3d color;    // SH-evaluated rgb at the view direction
  double alpha_base = 0.0;  // activated opacity
  double cutoff_radius = 0.0;  // pixels; beyond it alpha falls under kAlphaSkip
};

/// Perspective projection of one activated Gaussian. Returns nullopt when the
/// Gaussian is culled: behind the near plane, never above the alpha skip
/// threshold, or with its screen extent entirely off-frame.
std::optional<ScreenGaussian> project(const ActivatedGaussian& g,
                                      const Camera& cam);

/// Tile-based forward rasterization of an N x 59 parameter slice. Gaussians
/// composite front to back in ascending depth order (ties broken by row
/// index); per-pixel alpha is clamped at kAlphaClamp, contributions under
/// kAlphaSkip are dropped, and compositing stops once transmittance falls
/// below kMinTransmittance. Background is black.
RenderOutput render(const Eigen::MatrixXd& slice, const Camera& cam);

/// Reference renderer: per pixel, walks every Gaussian with no tiling and no
/// early loop exit, applying the same compositing rules. Test oracle only.
RenderOutput render_oracle(const Eigen::MatrixXd& slice, const Camera& cam);

struct RenderBackwardResult {
  Eigen::MatrixXd param_grad;     // N x 59, d loss / d raw parameters
  Eigen::VectorXd pos_grad_norm;  // N, |d loss / d mean2d| per Gaussian
  Eigen::VectorXd visible;        // N, 1 where the Gaussian was rasterized
};

/// Gradients of the loss whose image-space gradients are d_color (H x W x 3)
/// and d_depth (H x W) with respect to every raw Gaussian parameter. Culled
/// rows get zero gradient.
RenderBackwardResult render_backward(const Eigen::MatrixXd& slice,
                                     const Camera& cam, const Image& d_color,
                                     const Image& d_depth);

}  // namespace tugs
