// Copyright 2026 The stylenerf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

#include <vector>

namespace stylenerf {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

struct Ray {
  Vec3 origin = Vec3::Zero();
  Vec3 direction = -Vec3::UnitZ();  // unit length
  double near = 0.0;
  double far = 1.0;

  void validate() const;
};

/// Pinhole camera. The camera looks down its local -z axis with +y up and +x
/// right; `rotation` maps camera axes to world axes and `translation` is the
/// camera center in world space. Pixel (i, j) has its center at (i + 0.5, j + 0.5)
/// and the principal point sits at (width / 2, height / 2).
struct CameraPose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  double focal = 1.0;
  int height = 1;
  int width = 1;

  static CameraPose from_matrix(const Mat4& camera_to_world, double focal, int height, int width);
  Mat4 matrix() const;

  // Same extrinsics at a different resolution; focal scales with width.
  CameraPose resized(int new_height, int new_width) const;

  // Throws ValidationError unless rotation is orthonormal with det +1 (1e-5)
  // and the intrinsics are positive.
  void validate() const;
};

double focal_from_fov(double fov_x_radians, int width);

// Ray through continuous image coordinates (x, y).
Ray pixel_ray(const CameraPose& pose, double x, double y, double near, double far);

// One ray per pixel, row-major (index = row * width + col).
std::vector<Ray> generate_rays(const CameraPose& pose, double near, double far);

CameraPose look_at(const Vec3& eye, const Vec3& target, const Vec3& world_up, double focal,
                   int height, int width);

// Camera on a sphere around the origin (z up), looking at the origin.
CameraPose orbit_pose(double azimuth_deg, double elevation_deg, double radius, double focal,
                      int height, int width);

}  // namespace stylenerf
