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

#include "mvgc/camgeom.hpp"

#include <cmath>
#include <numbers>
#include <set>

#include <Eigen/Geometry>

#include "mvgc/error.hpp"

namespace mvgc {

namespace {

constexpr double kDegenerateZ = 1e-9;

double deg(double d) { return d * std::numbers::pi / 180.0; }

// +1 for cameras facing the ego's left half, -1 for the right half. Cameras
// facing exactly forward or backward count as left.
double side_sign(const CameraView& view) {
  const double lateral = view.optical_axis().y();
  return lateral < -1e-9 ? -1.0 : 1.0;
}

CameraIntrinsics preset_intrinsics() {
  CameraIntrinsics k;
  k.width = preset::kWidth;
  k.height = preset::kHeight;
  k.cx = preset::kWidth / 2.0;
  k.cy = preset::kHeight / 2.0;
  k.fx = k.cx / std::tan(deg(preset::kHorizontalFovDeg) / 2.0);
  k.fy = k.fx;
  return k;
}

CameraView ring_camera(std::string id, double yaw_deg) {
  const double yaw = deg(yaw_deg);
  const Eigen::Vector3d position(preset::kMountRadius * std::cos(yaw),
                                 preset::kMountRadius * std::sin(yaw),
                                 preset::kMountHeight);
  return CameraView{std::move(id), preset_intrinsics(),
                    camera_pose(position, yaw, deg(preset::kPitchDeg))};
}

}  // namespace

Eigen::Matrix3d CameraIntrinsics::matrix() const {
  Eigen::Matrix3d k;
  k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
  return k;
}

Eigen::Matrix3d CameraIntrinsics::inverse_matrix() const {
  Eigen::Matrix3d k;
  k << 1.0 / fx, 0.0, -cx / fx, 0.0, 1.0 / fy, -cy / fy, 0.0, 0.0, 1.0;
  return k;
}

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0) || !std::isfinite(fx) || !std::isfinite(fy)) {
    throw Error(ErrorCode::kInvalidRig, "focal lengths must be positive");
  }
  if (width <= 0 || height <= 0) {
    throw Error(ErrorCode::kInvalidRig, "image size must be positive");
  }
  if (!(cx > 0.0 && cx < width) || !(cy > 0.0 && cy < height)) {
    throw Error(ErrorCode::kInvalidRig, "principal point outside the image");
  }
}

RigidTransform RigidTransform::operator*(const RigidTransform& rhs) const {
  return RigidTransform{rotation * rhs.rotation,
                        rotation * rhs.translation + translation};
}

RigidTransform RigidTransform::inverse() const {
  const Eigen::Matrix3d rt = rotation.transpose();
  return RigidTransform{rt, -(rt * translation)};
}

void RigidTransform::validate(double tol) const {
  if (!rotation.allFinite() || !translation.allFinite()) {
    throw Error(ErrorCode::kInvalidRig, "non-finite transform");
  }
  const double ortho =
      (rotation.transpose() * rotation - Eigen::Matrix3d::Identity())
          .cwiseAbs()
          .maxCoeff();
  if (ortho > tol || std::abs(rotation.determinant() - 1.0) > tol) {
    throw Error(ErrorCode::kInvalidRig, "rotation is not a proper rotation");
  }
}

void CameraRig::validate() const {
  if (views.empty()) throw Error(ErrorCode::kInvalidRig, "rig has no views");
  std::set<std::string> ids;
  for (const auto& v : views) {
    if (!ids.insert(v.id).second) {
      throw Error(ErrorCode::kInvalidRig, "duplicate view id " + v.id);
    }
    v.intrinsics.validate();
    v.extrinsics.validate();
  }
  for (const auto& [a, b] : adjacency) {
    if (a == b) throw Error(ErrorCode::kInvalidRig, "self adjacency " + a);
    if (!ids.count(a) || !ids.count(b)) {
      throw Error(ErrorCode::kInvalidRig, "adjacency references unknown view");
    }
  }
}

std::size_t CameraRig::index_of(std::string_view id) const {
  for (std::size_t i = 0; i < views.size(); ++i) {
    if (views[i].id == id) return i;
  }
  throw Error(ErrorCode::kInvalidRig, "no view named " + std::string(id));
}

ShiftMode parse_shift_mode(std::string_view name) {
  if (name == "height") return ShiftMode::kHeight;
  if (name == "pitch") return ShiftMode::kPitch;
  if (name == "all") return ShiftMode::kAll;
  if (name == "custom") return ShiftMode::kCustom;
  throw Error(ErrorCode::kInvalidShift, "unknown shift mode " + std::string(name));
}

std::string_view to_string(ShiftMode mode) {
  switch (mode) {
    case ShiftMode::kHeight: return "height";
    case ShiftMode::kPitch: return "pitch";
    case ShiftMode::kAll: return "all";
    case ShiftMode::kCustom: return "custom";
  }
  return "custom";
}

ShiftSpec ShiftSpec::height(double dz) {
  ShiftSpec s;
  s.mode = ShiftMode::kHeight;
  s.dz = dz;
  return s;
}

ShiftSpec ShiftSpec::pitch(double dpitch) {
  ShiftSpec s;
  s.mode = ShiftMode::kPitch;
  s.dpitch = dpitch;
  return s;
}

ShiftSpec ShiftSpec::all_axes() {
  ShiftSpec s;
  s.mode = ShiftMode::kAll;
  s.dx = -0.12;
  s.dy = 0.65;
  s.dz = 0.2;
  s.dyaw = deg(5.0);
  return s;
}

void ShiftSpec::validate() const {
  for (double v : {dx, dy, dz, dpitch, dyaw}) {
    if (!std::isfinite(v)) {
      throw Error(ErrorCode::kInvalidShift, "non-finite shift component");
    }
  }
  if (mode == ShiftMode::kHeight &&
      (dx != 0.0 || dy != 0.0 || dpitch != 0.0 || dyaw != 0.0)) {
    throw Error(ErrorCode::kInvalidShift, "height mode only allows dz");
  }
  if (mode == ShiftMode::kPitch &&
      (dx != 0.0 || dy != 0.0 || dz != 0.0 || dyaw != 0.0)) {
    throw Error(ErrorCode::kInvalidShift, "pitch mode only allows dpitch");
  }
}

bool ShiftSpec::is_zero() const {
  return dx == 0.0 && dy == 0.0 && dz == 0.0 && dpitch == 0.0 && dyaw == 0.0;
}

RigidTransform camera_pose(const Eigen::Vector3d& position, double yaw,
                           double pitch) {
  const Eigen::Vector3d forward(std::cos(pitch) * std::cos(yaw),
                                std::cos(pitch) * std::sin(yaw),
                                -std::sin(pitch));
  const Eigen::Vector3d right(std::sin(yaw), -std::cos(yaw), 0.0);
  const Eigen::Vector3d down = forward.cross(right);
  RigidTransform t;
  t.rotation.col(0) = right;
  t.rotation.col(1) = down;
  t.rotation.col(2) = forward;
  t.translation = position;
  return t;
}

Eigen::Matrix3d local_pitch_rotation(double dpitch) {
  // Rotation about camera +x by -dpitch: +z tips toward +y (down).
  return Eigen::AngleAxisd(-dpitch, Eigen::Vector3d::UnitX()).toRotationMatrix();
}

Eigen::Matrix3d local_yaw_rotation(double dyaw) {
  // Rotation about camera +y (down) by -dyaw: +z tips toward -x (left).
  return Eigen::AngleAxisd(-dyaw, Eigen::Vector3d::UnitY()).toRotationMatrix();
}

Projection project(const CameraView& view, const Eigen::Vector3d& point_cam) {
  const double z = point_cam.z();
  if (!(z > kDegenerateZ)) {
    throw Error(ErrorCode::kDegenerateDepth, "point at or behind the camera");
  }
  const auto& k = view.intrinsics;
  return Projection{{k.fx * point_cam.x() / z + k.cx,
                     k.fy * point_cam.y() / z + k.cy},
                    z};
}

Eigen::Vector3d backproject(const CameraView& view,
                            const Eigen::Vector2d& pixel, double depth) {
  if (!(depth > 0.0)) {
    throw Error(ErrorCode::kDegenerateDepth, "depth must be positive");
  }
  const auto& k = view.intrinsics;
  return {(pixel.x() - k.cx) * depth / k.fx, (pixel.y() - k.cy) * depth / k.fy,
          depth};
}

RigidTransform relative_transform(const CameraView& src,
                                  const CameraView& dst) {
  if (src.extrinsics == dst.extrinsics) return RigidTransform::identity();
  return dst.extrinsics.inverse() * src.extrinsics;
}

std::vector<std::string> preset_names() { return {"nuscenes6", "front3", "mono1"}; }

CameraRig make_preset_rig(std::string_view name) {
  CameraRig rig;
  const double s = preset::kYawSpacingDeg;
  if (name == "nuscenes6") {
    rig.views = {ring_camera("CAM_FRONT", 0.0),
                 ring_camera("CAM_FRONT_LEFT", s),
                 ring_camera("CAM_BACK_LEFT", 2 * s),
                 ring_camera("CAM_BACK", 180.0),
                 ring_camera("CAM_BACK_RIGHT", -2 * s),
                 ring_camera("CAM_FRONT_RIGHT", -s)};
    for (std::size_t i = 0; i < rig.views.size(); ++i) {
      rig.adjacency.emplace_back(rig.views[i].id,
                                 rig.views[(i + 1) % rig.views.size()].id);
    }
  } else if (name == "front3") {
    rig.views = {ring_camera("CAM_FRONT", 0.0),
                 ring_camera("CAM_FRONT_LEFT", s),
                 ring_camera("CAM_FRONT_RIGHT", -s)};
    rig.adjacency = {{"CAM_FRONT", "CAM_FRONT_LEFT"},
                     {"CAM_FRONT_RIGHT", "CAM_FRONT"}};
  } else if (name == "mono1") {
    rig.views = {ring_camera("CAM_FRONT", 0.0)};
  } else {
    std::string known;
    for (const auto& n : preset_names()) known += (known.empty() ? "" : ", ") + n;
    throw Error(ErrorCode::kUnknownPreset,
                "unknown preset '" + std::string(name) + "' (known: " + known + ")");
  }
  return rig;
}

CameraRig perturb_rig(const CameraRig& rig, const ShiftSpec& shift) {
  shift.validate();
  CameraRig out = rig;
  for (auto& view : out.views) {
    const double sign = shift.mode == ShiftMode::kAll ? side_sign(view) : 1.0;
    auto& ext = view.extrinsics;
    ext.translation += Eigen::Vector3d(shift.dx, shift.dy, sign * shift.dz);
    if (shift.dpitch != 0.0 || shift.dyaw != 0.0) {
      ext.rotation = ext.rotation * local_yaw_rotation(sign * shift.dyaw) *
                     local_pitch_rotation(shift.dpitch);
    }
  }
  return out;
}

DepthScaleShift depth_scale_shift(double ground_range, double h0, double dh) {
  const double h1 = h0 + dh;
  DepthScaleShift r;
  r.d0 = std::sqrt(ground_range * ground_range + h0 * h0);
  r.d1 = std::sqrt(ground_range * ground_range + h1 * h1);
  r.delta = r.d1 - r.d0;
  return r;
}

CameraView view_in_world(const CameraView& view, const RigidTransform& ego_pose) {
  CameraView out = view;
  out.extrinsics = ego_pose * view.extrinsics;
  return out;
}

}  // namespace mvgc
