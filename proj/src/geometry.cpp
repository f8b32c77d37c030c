// Copyright 2026 The stylenerf Authors
// SPDX-License-Identifier: Apache-2.0

#include "stylenerf/geometry.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "stylenerf/error.hpp"

namespace stylenerf {

void Ray::validate() const {
  require(origin.allFinite() && direction.allFinite(), "ray: non-finite origin or direction");
  require(std::abs(direction.norm() - 1.0) <= 1e-6, "ray: direction is not unit length");
  require(near >= 0.0 && near < far, "ray: require 0 <= near < far");
}

CameraPose CameraPose::from_matrix(const Mat4& camera_to_world, double focal, int height,
                                   int width) {
  CameraPose pose;
  pose.rotation = camera_to_world.topLeftCorner<3, 3>();
  pose.translation = camera_to_world.topRightCorner<3, 1>();
  pose.focal = focal;
  pose.height = height;
  pose.width = width;
  return pose;
}

Mat4 CameraPose::matrix() const {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = rotation;
  m.topRightCorner<3, 1>() = translation;
  return m;
}

CameraPose CameraPose::resized(int new_height, int new_width) const {
  CameraPose out = *this;
  out.focal = focal * static_cast<double>(new_width) / static_cast<double>(width);
  out.height = new_height;
  out.width = new_width;
  return out;
}

void CameraPose::validate() const {
  require(rotation.allFinite() && translation.allFinite(), "camera pose: non-finite entries");
  const double ortho_err = (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
  if (ortho_err > 1e-5) {
    std::ostringstream os;
    os << "camera pose: rotation is not orthonormal (max |R^T R - I| = " << ortho_err << ")";
    throw ValidationError(os.str());
  }
  const double det = rotation.determinant();
  if (std::abs(det - 1.0) > 1e-5) {
    std::ostringstream os;
    os << "camera pose: rotation determinant is " << det << ", expected +1";
    throw ValidationError(os.str());
  }
  require(focal > 0.0 && height > 0 && width > 0, "camera pose: intrinsics must be positive");
}

double focal_from_fov(double fov_x_radians, int width) {
  require(fov_x_radians > 0.0 && fov_x_radians < std::numbers::pi, "fov must lie in (0, pi)");
  return 0.5 * width / std::tan(0.5 * fov_x_radians);
}

Ray pixel_ray(const CameraPose& pose, double x, double y, double near, double far) {
  const Vec3 cam_dir((x - 0.5 * pose.width) / pose.focal, -(y - 0.5 * pose.height) / pose.focal,
                     -1.0);
  Ray ray;
  ray.origin = pose.translation;
  ray.direction = (pose.rotation * cam_dir).normalized();
  ray.near = near;
  ray.far = far;
  return ray;
}

std::vector<Ray> generate_rays(const CameraPose& pose, double near, double far) {
  pose.validate();
  require(near >= 0.0 && near < far, "generate_rays: require 0 <= near < far");
  std::vector<Ray> rays;
  rays.reserve(static_cast<std::size_t>(pose.height) * pose.width);
  for (int j = 0; j < pose.height; ++j) {
    for (int i = 0; i < pose.width; ++i) {
      rays.push_back(pixel_ray(pose, i + 0.5, j + 0.5, near, far));
    }
  }
  return rays;
}

CameraPose look_at(const Vec3& eye, const Vec3& target, const Vec3& world_up, double focal,
                   int height, int width) {
  const Vec3 forward = (target - eye).normalized();
  Vec3 up_hint = world_up.normalized();
  if (std::abs(forward.dot(up_hint)) > 1.0 - 1e-9) {
    up_hint = std::abs(forward.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  }
  const Vec3 right = forward.cross(up_hint).normalized();
  const Vec3 up = right.cross(forward);
  CameraPose pose;
  pose.rotation.col(0) = right;
  pose.rotation.col(1) = up;
  pose.rotation.col(2) = -forward;
  pose.translation = eye;
  pose.focal = focal;
  pose.height = height;
  pose.width = width;
  return pose;
}

CameraPose orbit_pose(double azimuth_deg, double elevation_deg, double radius, double focal,
                      int height, int width) {
  require(radius > 0.0, "orbit radius must be positive");
  const double az = azimuth_deg * std::numbers::pi / 180.0;
  const double el = elevation_deg * std::numbers::pi / 180.0;
  const Vec3 eye(radius * std::cos(el) * std::cos(az), radius * std::cos(el) * std::sin(az),
                 radius * std::sin(el));
  return look_at(eye, Vec3::Zero(), Vec3::UnitZ(), focal, height, width);
}

}  // namespace stylenerf
