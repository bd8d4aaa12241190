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

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "mvgc/camgeom.hpp"
#include "mvgc/consist.hpp"
#include "mvgc/evalkit.hpp"
#include "mvgc/raster.hpp"
#include "mvgc/warp.hpp"

namespace mvgc {

// Box resting on the ground, yawed about world z. Center is the volume
// center, so its z equals h / 2.
struct BoxObject {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  double l = 4.0;
  double w = 1.8;
  double h = 1.5;
  double yaw = 0.0;
  Rgb albedo = Rgb::Constant(0.5);
  std::string cls = "car";
  std::string id;

  bool operator==(const BoxObject&) const = default;
};

struct SphereObject {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  double radius = 1.0;
  Rgb albedo = Rgb::Constant(0.5);

  bool operator==(const SphereObject&) const = default;
};

// Ground albedo: base * (1 + amplitude * sin(k u + phase_u) * sin(k v +
// phase_v)) with k = 2 pi / wavelength, where (u, v) are world (x, y)
// rotated by `rotation`. Shorter wavelengths alias near the horizon.
struct GroundSpec {
  Rgb albedo{0.45, 0.42, 0.38};
  double texture_amplitude = 0.35;
  double texture_wavelength = 20.0;
  double rotation = 0.0;
  Eigen::Vector2d phase = Eigen::Vector2d::Zero();

  bool operator==(const GroundSpec&) const = default;
};

// Static world with a moving ego. Objects are in world coordinates; the
// trajectory holds the ego -> world pose per frame.
struct SceneSpec {
  std::uint64_t seed = 0;
  int frames = 1;
  GroundSpec ground;
  std::vector<BoxObject> boxes;
  std::vector<SphereObject> spheres;
  std::vector<RigidTransform> trajectory;
  Eigen::Vector3d light = Eigen::Vector3d(0.3, 0.2, 1.0).normalized();
  double ambient = 0.15;
  Rgb sky{0.62, 0.72, 0.88};
  double max_depth = 60.0;  // farther hits keep their depth but are invalid

  // Throws kInvalidScene.
  void validate() const;
  // Also checks every camera center of the rig along the trajectory stays
  // outside the objects.
  void validate(const CameraRig& rig) const;

  bool operator==(const SceneSpec&) const = default;
};

struct SceneGenOptions {
  int frames = 2;
  int boxes = 8;
  int spheres = 3;
  double step = 1.0;             // ego forward motion per frame, meters
  double clearance = 3.0;        // free radius around every ego position
};

// Seeded random scene: car-sized boxes at 6-25 m and spheres at 5-20 m
// around the ego path, mutually disjoint.
SceneSpec random_scene(std::uint64_t seed, const SceneGenOptions& options = {});

// Ego moving straight along +x.
std::vector<RigidTransform> straight_trajectory(int frames, double step);

// Surface ids: 0 sky, 1 ground, 2 + 6 b + face for box b, then spheres.
inline constexpr int kSurfaceSky = 0;
inline constexpr int kSurfaceGround = 1;

struct RayHit {
  bool hit = false;
  double t = 0.0;  // ray parameter; equals camera z for unit-z directions
  int surface = kSurfaceSky;
  Eigen::Vector3d point = Eigen::Vector3d::Zero();
  Eigen::Vector3d normal = Eigen::Vector3d::Zero();
  Rgb albedo = Rgb::Zero();
};

// Nearest hit with t > 0 along origin + t dir (world frame).
RayHit cast_ray(const SceneSpec& spec, const Eigen::Vector3d& origin,
                const Eigen::Vector3d& dir);

Rgb shade(const SceneSpec& spec, const RayHit& hit);

struct ViewRender {
  DepthMap depth;
  RgbImage image;
  Raster<int> surface;

  bool operator==(const ViewRender&) const = default;
};

struct FrameBundle {
  int frame = 0;
  RigidTransform ego_pose;
  std::vector<ViewRender> views;  // rig order
  std::vector<Box3D> boxes;       // ego frame

  bool operator==(const FrameBundle&) const = default;
};

// Depth is the camera z of the first hit. Sky pixels and pixels on a
// surface-id discontinuity (any 8-neighbor differs) are invalid.
ViewRender render_view(const SceneSpec& spec, const CameraView& world_view);

std::vector<FrameBundle> render_scene(const CameraRig& rig,
                                      const SceneSpec& spec);

// Ground-truth boxes of a frame in its ego frame.
std::vector<Box3D> boxes_in_ego(const SceneSpec& spec, int frame);

struct ShiftPair {
  CameraRig source_rig;
  CameraRig target_rig;
  std::vector<FrameBundle> source;
  std::vector<FrameBundle> target;
};

ShiftPair make_shift_pair(const CameraRig& rig, const SceneSpec& spec,
                          const ShiftSpec& shift);

// One slot per (frame, view), frame-major, posed in the world frame.
MultiViewBatch make_batch(const CameraRig& rig, const SceneSpec& spec,
                          const std::vector<FrameBundle>& bundles,
                          const std::vector<ViewPair>& pairs);

// Scales every valid depth by 1 + amplitude sin(0.11 x + 0.7) cos(0.17 y +
// 0.3). Moves residuals off zero so |.| is differentiable at almost every
// pixel, which gradient checks need.
void modulate_depths(MultiViewBatch& batch, double amplitude);

inline std::size_t slot_index(const CameraRig& rig, int frame, std::size_t view) {
  return static_cast<std::size_t>(frame) * rig.views.size() + view;
}

struct ShiftRow {
  ShiftSpec shift;
  double magnitude = 0.0;
  LossReport report;
};

struct ShiftStudy {
  std::vector<ShiftRow> rows;
  bool monotone = false;
  std::string verdict;

  std::string csv() const;
};

// Renders every shifted target, then evaluates the consistency losses on
// the target rasters with correspondences lifted under the source
// extrinsics and projected under the target extrinsics. Monotone means: per
// mode, l_ov strictly increases with magnitude and every non-zero shift
// exceeds the zero row. Throws kInvalidShift without a zero shift.
ShiftStudy shift_study(const CameraRig& rig, const SceneSpec& spec,
                       const std::vector<ShiftSpec>& shifts,
                       const LossWeights& weights,
                       const ConsistOptions& options = {},
                       int temporal_window = 1);

double shift_magnitude(const ShiftSpec& shift);

}  // namespace mvgc
