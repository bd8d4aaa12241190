/*
 * Copyright (c) 2026, The mvgc Authors. All rights reserved.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace mvgc {

// Pinhole intrinsics in pixels. Pixel centers are integer coordinates.
struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  Eigen::Matrix3d matrix() const;
  Eigen::Matrix3d inverse_matrix() const;
  void validate() const;

  bool operator==(const CameraIntrinsics&) const = default;
};

// Rigid motion x -> R x + t.
struct RigidTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static RigidTransform identity() { return {}; }

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const {
    return rotation * p + translation;
  }
  // (a * b)(x) = a(b(x)).
  RigidTransform operator*(const RigidTransform& rhs) const;
  RigidTransform inverse() const;
  void validate(double tol = 1e-9) const;

  bool operator==(const RigidTransform& o) const {
    return rotation == o.rotation && translation == o.translation;
  }
};

// Extrinsics map camera coordinates (+x right, +y down, +z optical axis) to
// the ego/common frame (+x forward, +y left, +z up).
struct CameraView {
  std::string id;
  CameraIntrinsics intrinsics;
  RigidTransform extrinsics;

  Eigen::Vector3d center() const { return extrinsics.translation; }
  Eigen::Vector3d optical_axis() const { return extrinsics.rotation.col(2); }

  bool operator==(const CameraView&) const = default;
};

struct CameraRig {
  std::vector<CameraView> views;
  std::vector<std::pair<std::string, std::string>> adjacency;

  void validate() const;
  // Index of the view with this id; throws kInvalidRig when absent.
  std::size_t index_of(std::string_view id) const;

  bool operator==(const CameraRig&) const = default;
};

enum class ShiftMode { kHeight, kPitch, kAll, kCustom };

ShiftMode parse_shift_mode(std::string_view name);
std::string_view to_string(ShiftMode mode);

// Installation perturbation. Translations are in the ego frame (meters);
// angles in radians, applied about the camera's local axes. In kAll mode dz
// and dyaw take the sign of the side the camera faces (left +, right -).
struct ShiftSpec {
  ShiftMode mode = ShiftMode::kCustom;
  double dx = 0.0;
  double dy = 0.0;
  double dz = 0.0;
  double dpitch = 0.0;
  double dyaw = 0.0;

  static ShiftSpec height(double dz);
  static ShiftSpec pitch(double dpitch);
  // The combined CARLA-style target: x -0.12 m, y +0.65 m, z +/-0.2 m,
  // yaw +/-5 deg.
  static ShiftSpec all_axes();

  void validate() const;
  bool is_zero() const;
};

// Camera at the given ego position looking along ego heading `yaw`, tilted
// down by `pitch` (radians).
RigidTransform camera_pose(const Eigen::Vector3d& position, double yaw,
                           double pitch);

// Rotations about the camera's own axes, positive pitch tilts the optical
// axis down and positive yaw turns it left (toward ego +y for a level
// camera).
Eigen::Matrix3d local_pitch_rotation(double dpitch);
Eigen::Matrix3d local_yaw_rotation(double dyaw);

struct Projection {
  Eigen::Vector2d pixel;
  double depth = 0.0;
};

Projection project(const CameraView& view, const Eigen::Vector3d& point_cam);
Eigen::Vector3d backproject(const CameraView& view,
                            const Eigen::Vector2d& pixel, double depth);

// Maps src-camera coordinates to dst-camera coordinates.
RigidTransform relative_transform(const CameraView& src,
                                  const CameraView& dst);

// Preset layouts: "nuscenes6", "front3", "mono1".
CameraRig make_preset_rig(std::string_view name);
std::vector<std::string> preset_names();

CameraRig perturb_rig(const CameraRig& rig, const ShiftSpec& shift);

struct DepthScaleShift {
  double d0 = 0.0;
  double d1 = 0.0;
  double delta = 0.0;
};

// Straight-line distance to a ground point `ground_range` meters away from
// the camera foot, for mounting heights h0 and h0 + dh.
DepthScaleShift depth_scale_shift(double ground_range, double h0, double dh);

// Camera expressed in a world frame given the ego pose (ego -> world).
CameraView view_in_world(const CameraView& view, const RigidTransform& ego_pose);

// Preset constants shared by docs and tests.
namespace preset {
inline constexpr int kWidth = 352;
inline constexpr int kHeight = 128;
inline constexpr double kHorizontalFovDeg = 90.0;
inline constexpr double kMountHeight = 1.5;
inline constexpr double kMountRadius = 0.5;
inline constexpr double kPitchDeg = 12.0;
inline constexpr double kYawSpacingDeg = 60.0;
}  // namespace preset

}  // namespace mvgc
