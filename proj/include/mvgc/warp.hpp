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

#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "mvgc/camgeom.hpp"
#include "mvgc/raster.hpp"

namespace mvgc {

struct DepthMap {
  Raster<double> values;
  Mask valid;

  DepthMap() = default;
  DepthMap(int width, int height)
      : values(width, height, 0.0), valid(width, height, 0) {}
  static DepthMap uniform(int width, int height, double depth);

  int width() const noexcept { return values.width(); }
  int height() const noexcept { return values.height(); }
  bool is_valid(int x, int y) const { return valid(x, y) != 0; }
  std::size_t valid_count() const;
  // Throws kDimensionMismatch / kInvalidSpec when the invariants fail.
  void validate() const;

  bool operator==(const DepthMap&) const = default;
};

using Rgb = Eigen::Vector3d;

struct RgbImage {
  Raster<Rgb> values;

  RgbImage() = default;
  RgbImage(int width, int height, Rgb fill = Rgb::Zero())
      : values(width, height, fill) {}

  int width() const noexcept { return values.width(); }
  int height() const noexcept { return values.height(); }
  void validate() const;

  bool operator==(const RgbImage&) const = default;
};

struct PointCloud {
  std::vector<Eigen::Vector3d> points;
  std::vector<std::size_t> pixel_index;  // row-major source pixel
};

// Source-indexed correspondences of one directed warp.
struct CorrespondenceField {
  Raster<Eigen::Vector2d> target_px;
  Raster<double> warped_depth;
  Mask mask;
  int target_width = 0;
  int target_height = 0;

  std::size_t mask_count() const;
};

struct WarpOptions {
  // Drop correspondences hidden behind a nearer warped sample landing on the
  // same target pixel.
  bool zbuffer = false;
  double zbuffer_tolerance = 0.05;  // relative depth slack
};

struct PixelWarp {
  Eigen::Vector2d target_px = Eigen::Vector2d::Zero();
  double depth = 0.0;
  bool in_front = false;   // positive depth in the target camera
  bool in_bounds = false;  // in_front and 0 <= target_px < (width, height)
};

// Warps one source pixel center with its depth. An exact identity transform
// between equal intrinsics returns the pixel center and depth unchanged.
PixelWarp warp_pixel(const CameraIntrinsics& src, const CameraIntrinsics& dst,
                     const RigidTransform& src_to_dst, int x, int y,
                     double depth);

void require_matching_view(const CameraView& view, const DepthMap& depth);

PointCloud depth_to_points(const CameraView& view, const DepthMap& depth);

CorrespondenceField warp_depth(const CameraView& src, const CameraView& dst,
                               const DepthMap& depth_src,
                               const WarpOptions& options = {});

// Same as warp_depth but with an explicit src -> dst camera transform.
CorrespondenceField warp_depth(const CameraIntrinsics& src,
                               const CameraIntrinsics& dst,
                               const RigidTransform& src_to_dst,
                               const DepthMap& depth_src,
                               const WarpOptions& options = {});

// Four-neighbor footprint of a subpixel coordinate. Neighbors with an exactly
// zero weight are not part of the footprint, so integer coordinates touch a
// single pixel.
struct BilinearFootprint {
  int x0 = 0;
  int y0 = 0;
  double ax = 0.0;  // fractional offset from x0
  double ay = 0.0;
  bool in_bounds = false;

  int count() const { return (ax > 0.0 ? 2 : 1) * (ay > 0.0 ? 2 : 1); }
  // k in [0, count()): tap coordinates and weight.
  void tap(int k, int& x, int& y, double& w) const;
};

BilinearFootprint bilinear_footprint(int width, int height,
                                     const Eigen::Vector2d& at);

struct DepthSample {
  double value = 0.0;
  bool in_bounds = false;
};

struct RgbSample {
  Rgb value = Rgb::Zero();
  bool in_bounds = false;
};

DepthSample bilinear_sample(const DepthMap& depth, const Eigen::Vector2d& at);
RgbSample bilinear_sample(const RgbImage& image, const Eigen::Vector2d& at);

// Ordered view pair across frames. Indices refer to rig.views.
struct ViewPair {
  std::size_t view_i = 0;
  std::size_t view_j = 0;
  int frame_i = 0;
  int frame_j = 0;

  bool temporal() const { return frame_i != frame_j; }
  bool operator==(const ViewPair&) const = default;
};

// Per frame: both directions of every adjacency, in adjacency order. Then,
// per frame and per view, the same view in every other frame within the
// window, ascending by frame.
std::vector<ViewPair> enumerate_pairs(const CameraRig& rig, int frames,
                                      int temporal_window);

}  // namespace mvgc
