#pragma once

#include <Eigen/Dense>

namespace tugs {

// Pinhole camera: x right, y down, z forward in camera space.
struct Camera {
  int width = 0;
  int height = 0;
  double fx = 0.0, fy = 0.0, cx = 0.0, cy = 0.0;
  Eigen::Matrix4d world_to_camera = Eigen::Matrix4d::Identity();
  double near = 0.01;

  Eigen::Matrix3d rotation() const {
    return world_to_camera.topLeftCorner<3, 3>();
  }
  Eigen::Vector3d translation() const {
    return world_to_camera.topRightCorner<3, 1>();
  }
  Eigen::Vector3d center() const {
    return -rotation().transpose() * translation();
  }

  /// Throws std::invalid_argument when intrinsics are non-positive or the
  /// rotation block is not orthonormal within 1e-4.
  void validate() const;
};

/// World-to-camera pose for an eye looking at a target, world up +z.
Eigen::Matrix4d look_at(const Eigen::Vector3d& eye,
                        const Eigen::Vector3d& target,
                        const Eigen::Vector3d& up = {0, 0, 1});

}  // namespace tugs
