#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <cstdint>

#include "tugs/layout.hpp"

namespace tugs {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double logit(double p) { return std::log(p / (1.0 - p)); }

struct ActivatedGaussian {
  Eigen::Vector3d position;
  Eigen::Vector3d scale;     // componentwise > 0
  Eigen::Vector4d rotation;  // unit quaternion (w, x, y, z)
  double opacity = 0.0;      // in (0, 1)
  Eigen::Matrix<double, GaussianLayout::kShCoeffCount, 3> sh;
};

/// Decodes one raw parameter row: scale = exp, rotation = normalize,
/// opacity = sigmoid, position and SH pass through. A near-zero quaternion
/// is replaced by identity and counted.
ActivatedGaussian activate(const Eigen::Ref<const Eigen::VectorXd>& raw);
std::uint64_t quaternion_degeneracy_count();

Eigen::Matrix3d quat_to_rotation(const Eigen::Vector4d& unit_quat);

/// Sigma = R S S^T R^T for a unit quaternion and positive scales.
Eigen::Matrix3d covariance(const Eigen::Vector3d& scale,
                           const Eigen::Vector4d& unit_quat);

/// exp(-1/2 (x - mean)^T cov^-1 (x - mean)); 1 at the mean. The covariance
/// is regularized by 1e-8 * I before inversion.
double eval_gaussian(const Eigen::Vector3d& x, const Eigen::Vector3d& mean,
                     const Eigen::Matrix3d& cov);

/// Real SH basis values for degrees 0..3 at a unit direction.
std::array<double, 16> sh_basis(const Eigen::Vector3d& dir);

/// Per-basis gradients with respect to the (unnormalized) direction entries.
std::array<Eigen::Vector3d, 16> sh_basis_gradient(const Eigen::Vector3d& dir);

/// Per channel: dot(basis, coefficients) + 0.5, clamped at 0 from below.
Eigen::Vector3d sh_color(
    const Eigen::Matrix<double, GaussianLayout::kShCoeffCount, 3>& sh,
    const Eigen::Vector3d& view_dir);

}  // namespace tugs
