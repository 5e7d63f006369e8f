#include "tugs/camera.hpp"

#include <stdexcept>

namespace tugs {

void Camera::validate() const {
  if (width < 1 || height < 1)
    throw std::invalid_argument("camera: non-positive image size");
  if (fx <= 0.0 || fy <= 0.0)
    throw std::invalid_argument("camera: focal lengths must be positive");
  if (near <= 0.0) throw std::invalid_argument("camera: near must be positive");
  const Eigen::Matrix3d r = rotation();
  const double dev =
      (r * r.transpose() - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  if (dev > 1e-4)
    throw std::invalid_argument(
        "camera: rotation block not orthonormal (deviation " +
        std::to_string(dev) + ")");
}

Eigen::Matrix4d look_at(const Eigen::Vector3d& eye,
                        const Eigen::Vector3d& target,
                        const Eigen::Vector3d& up) {
  const Eigen::Vector3d forward = (target - eye).normalized();
  Eigen::Vector3d right = forward.cross(up);
  if (right.norm() < 1e-9) right = forward.cross(Eigen::Vector3d(0, 1, 0));
  right.normalize();
  const Eigen::Vector3d down = forward.cross(right).normalized();

  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.block<1, 3>(0, 0) = right.transpose();
  m.block<1, 3>(1, 0) = down.transpose();
  m.block<1, 3>(2, 0) = forward.transpose();
  m.topRightCorner<3, 1>() = -m.topLeftCorner<3, 3>() * eye;
  return m;
}

}  // namespace tugs
