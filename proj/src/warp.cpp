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

#include "mvgc/warp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "mvgc/error.hpp"
#include "mvgc/parallel.hpp"

namespace mvgc {

DepthMap DepthMap::uniform(int width, int height, double depth) {
  DepthMap d(width, height);
  std::fill(d.values.data().begin(), d.values.data().end(), depth);
  std::fill(d.valid.data().begin(), d.valid.data().end(), 1);
  return d;
}

std::size_t DepthMap::valid_count() const {
  return static_cast<std::size_t>(
      std::count_if(valid.data().begin(), valid.data().end(),
                    [](std::uint8_t v) { return v != 0; }));
}

void DepthMap::validate() const {
  require_same_shape(values, valid, "depth values vs validity mask");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (valid[i] && !(values[i] > 0.0 && std::isfinite(values[i]))) {
      throw Error(ErrorCode::kInvalidSpec,
                  "valid depth pixel " + std::to_string(i) + " is not positive");
    }
  }
}

void RgbImage::validate() const {
  for (const auto& px : values.data()) {
    for (int c = 0; c < 3; ++c) {
      if (!std::isfinite(px[c]) || px[c] < 0.0 || px[c] > 1.0) {
        throw Error(ErrorCode::kInvalidSpec, "image value outside [0,1]");
      }
    }
  }
}

std::size_t CorrespondenceField::mask_count() const {
  return static_cast<std::size_t>(
      std::count_if(mask.data().begin(), mask.data().end(),
                    [](std::uint8_t v) { return v != 0; }));
}

void require_matching_view(const CameraView& view, const DepthMap& depth) {
  if (depth.width() != view.intrinsics.width ||
      depth.height() != view.intrinsics.height) {
    throw Error(ErrorCode::kDimensionMismatch,
                "raster " + std::to_string(depth.width()) + "x" +
                    std::to_string(depth.height()) + " does not match view " +
                    view.id);
  }
  require_same_shape(depth.values, depth.valid, "depth values vs mask");
}

PointCloud depth_to_points(const CameraView& view, const DepthMap& depth) {
  require_matching_view(view, depth);
  PointCloud cloud;
  for (int y = 0; y < depth.height(); ++y) {
    for (int x = 0; x < depth.width(); ++x) {
      if (!depth.is_valid(x, y)) continue;
      cloud.points.push_back(
          backproject(view, Eigen::Vector2d(x, y), depth.values(x, y)));
      cloud.pixel_index.push_back(depth.values.index(x, y));
    }
  }
  return cloud;
}

PixelWarp warp_pixel(const CameraIntrinsics& src, const CameraIntrinsics& dst,
                     const RigidTransform& src_to_dst, int x, int y,
                     double depth) {
  PixelWarp out;
  const bool identity = src == dst &&
                        src_to_dst.rotation == Eigen::Matrix3d::Identity() &&
                        src_to_dst.translation.isZero(0.0);
  if (identity) {
    out.target_px = Eigen::Vector2d(x, y);
    out.depth = depth;
    out.in_front = true;
    out.in_bounds = true;
    return out;
  }
  const Eigen::Vector3d ray((x - src.cx) / src.fx, (y - src.cy) / src.fy, 1.0);
  const Eigen::Vector3d p = src_to_dst.rotation * (ray * depth) + src_to_dst.translation;
  if (!(p.z() > 1e-9)) return out;
  out.in_front = true;
  out.depth = p.z();
  out.target_px = Eigen::Vector2d(dst.fx * p.x() / p.z() + dst.cx,
                                  dst.fy * p.y() / p.z() + dst.cy);
  const double u = out.target_px.x();
  const double v = out.target_px.y();
  out.in_bounds = u >= 0.0 && v >= 0.0 && u < dst.width && v < dst.height;
  return out;
}

CorrespondenceField warp_depth(const CameraView& src, const CameraView& dst,
                               const DepthMap& depth_src,
                               const WarpOptions& options) {
  require_matching_view(src, depth_src);
  return warp_depth(src.intrinsics, dst.intrinsics,
                    relative_transform(src, dst), depth_src, options);
}

CorrespondenceField warp_depth(const CameraIntrinsics& src,
                               const CameraIntrinsics& dst,
                               const RigidTransform& src_to_dst,
                               const DepthMap& depth_src,
                               const WarpOptions& options) {
  const int w = depth_src.width();
  const int h = depth_src.height();
  if (w != src.width || h != src.height) {
    throw Error(ErrorCode::kDimensionMismatch, "source depth vs intrinsics");
  }
  CorrespondenceField field;
  field.target_px = Raster<Eigen::Vector2d>(w, h, Eigen::Vector2d::Zero());
  field.warped_depth = Raster<double>(w, h, 0.0);
  field.mask = Mask(w, h, 0);
  field.target_width = dst.width;
  field.target_height = dst.height;

  parallel_rows(h, [&](int y) {
    for (int x = 0; x < w; ++x) {
      if (!depth_src.is_valid(x, y)) continue;
      const PixelWarp pw =
          warp_pixel(src, dst, src_to_dst, x, y, depth_src.values(x, y));
      if (!pw.in_front) continue;
      field.target_px(x, y) = pw.target_px;
      field.warped_depth(x, y) = pw.depth;
      field.mask(x, y) = pw.in_bounds ? 1 : 0;
    }
  });

  if (options.zbuffer) {
    Raster<double> nearest(dst.width, dst.height,
                           std::numeric_limits<double>::infinity());
    auto bucket = [&](const Eigen::Vector2d& px, int& bx, int& by) {
      bx = std::clamp(static_cast<int>(std::floor(px.x() + 0.5)), 0, dst.width - 1);
      by = std::clamp(static_cast<int>(std::floor(px.y() + 0.5)), 0, dst.height - 1);
    };
    for (std::size_t i = 0; i < field.mask.size(); ++i) {
      if (!field.mask[i]) continue;
      int bx, by;
      bucket(field.target_px[i], bx, by);
      nearest(bx, by) = std::min(nearest(bx, by), field.warped_depth[i]);
    }
    for (std::size_t i = 0; i < field.mask.size(); ++i) {
      if (!field.mask[i]) continue;
      int bx, by;
      bucket(field.target_px[i], bx, by);
      if (field.warped_depth[i] > nearest(bx, by) * (1.0 + options.zbuffer_tolerance)) {
        field.mask[i] = 0;
      }
    }
  }
  return field;
}

void BilinearFootprint::tap(int k, int& x, int& y, double& w) const {
  const bool two_x = ax > 0.0;
  const int kx = two_x ? (k & 1) : 0;
  const int ky = two_x ? (k >> 1) : k;
  x = x0 + kx;
  y = y0 + ky;
  w = (kx ? ax : 1.0 - ax) * (ky ? ay : 1.0 - ay);
}

BilinearFootprint bilinear_footprint(int width, int height,
                                     const Eigen::Vector2d& at) {
  BilinearFootprint f;
  if (!std::isfinite(at.x()) || !std::isfinite(at.y())) return f;
  const double fx = std::floor(at.x());
  const double fy = std::floor(at.y());
  if (fx < 0.0 || fy < 0.0 || fx > width - 1 || fy > height - 1) return f;
  f.x0 = static_cast<int>(fx);
  f.y0 = static_cast<int>(fy);
  f.ax = at.x() - fx;
  f.ay = at.y() - fy;
  f.in_bounds = (f.ax == 0.0 || f.x0 + 1 < width) &&
                (f.ay == 0.0 || f.y0 + 1 < height);
  return f;
}

DepthSample bilinear_sample(const DepthMap& depth, const Eigen::Vector2d& at) {
  DepthSample s;
  const auto f = bilinear_footprint(depth.width(), depth.height(), at);
  if (!f.in_bounds) return s;
  double acc = 0.0;
  for (int k = 0; k < f.count(); ++k) {
    int x, y;
    double w;
    f.tap(k, x, y, w);
    if (!depth.is_valid(x, y)) return s;
    acc += w * depth.values(x, y);
  }
  s.value = acc;
  s.in_bounds = true;
  return s;
}

RgbSample bilinear_sample(const RgbImage& image, const Eigen::Vector2d& at) {
  RgbSample s;
  const auto f = bilinear_footprint(image.width(), image.height(), at);
  if (!f.in_bounds) return s;
  for (int k = 0; k < f.count(); ++k) {
    int x, y;
    double w;
    f.tap(k, x, y, w);
    s.value += w * image.values(x, y);
  }
  s.in_bounds = true;
  return s;
}

std::vector<ViewPair> enumerate_pairs(const CameraRig& rig, int frames,
                                      int temporal_window) {
  if (temporal_window < 0) {
    throw Error(ErrorCode::kInvalidSpec, "temporal window must be >= 0");
  }
  std::vector<ViewPair> pairs;
  for (int f = 0; f < frames; ++f) {
    for (const auto& [a, b] : rig.adjacency) {
      const std::size_t ia = rig.index_of(a);
      const std::size_t ib = rig.index_of(b);
      pairs.push_back({ia, ib, f, f});
      pairs.push_back({ib, ia, f, f});
    }
  }
  for (int f = 0; f < frames; ++f) {
    for (std::size_t v = 0; v < rig.views.size(); ++v) {
      for (int g = std::max(0, f - temporal_window);
           g <= std::min(frames - 1, f + temporal_window); ++g) {
        if (g != f) pairs.push_back({v, v, f, g});
      }
    }
  }
  return pairs;
}

}  // namespace mvgc
