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

#include <cmath>

#include <gtest/gtest.h>

#include "mvgc/synthrig.hpp"
#include "mvgc/warp.hpp"

namespace mvgc {
namespace {

CameraView small_view() {
  CameraView v;
  v.id = "cam";
  v.intrinsics = {60.0, 60.0, 31.0, 23.0, 63, 47};
  v.extrinsics = camera_pose({0, 0, 1.5}, 0.0, 0.0);
  return v;
}

TEST(DepthToPoints, UniformDepth) {
  const auto rig = make_preset_rig("mono1");
  const auto& v = rig.views[0];
  const auto d = DepthMap::uniform(v.intrinsics.width, v.intrinsics.height, 4.0);
  const auto cloud = depth_to_points(v, d);
  ASSERT_EQ(cloud.points.size(), d.valid_count());
  for (const auto& p : cloud.points) EXPECT_EQ(p.z(), 4.0);
  // Row-major ordering.
  for (std::size_t i = 1; i < cloud.pixel_index.size(); ++i) {
    EXPECT_LT(cloud.pixel_index[i - 1], cloud.pixel_index[i]);
  }
}

TEST(DepthToPoints, SinglePixelAtPrincipalPoint) {
  const auto v = small_view();
  DepthMap d(v.intrinsics.width, v.intrinsics.height);
  d.values(31, 23) = 3.0;
  d.valid(31, 23) = 1;
  const auto cloud = depth_to_points(v, d);
  ASSERT_EQ(cloud.points.size(), 1u);
  EXPECT_EQ(cloud.points[0], Eigen::Vector3d(0, 0, 3));
}

TEST(DepthToPoints, DimensionMismatch) {
  const auto v = small_view();
  const auto d = DepthMap::uniform(10, 10, 1.0);
  try {
    depth_to_points(v, d);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDimensionMismatch);
  }
}

TEST(WarpDepth, IdentityIsBitExact) {
  const auto v = small_view();
  DepthMap d(v.intrinsics.width, v.intrinsics.height);
  for (int y = 0; y < d.height(); ++y) {
    for (int x = 0; x < d.width(); ++x) {
      d.values(x, y) = 2.0 + 0.013 * x + 0.071 * y;
      d.valid(x, y) = (x + y) % 7 != 0;
    }
  }
  const auto f = warp_depth(v, v, d);
  for (int y = 0; y < d.height(); ++y) {
    for (int x = 0; x < d.width(); ++x) {
      ASSERT_EQ(f.mask(x, y) != 0, d.is_valid(x, y));
      if (!d.is_valid(x, y)) continue;
      EXPECT_EQ(f.target_px(x, y), Eigen::Vector2d(x, y));
      EXPECT_EQ(f.warped_depth(x, y), d.values(x, y));
    }
  }
}

TEST(WarpDepth, ForwardTranslation) {
  const auto src = small_view();
  auto dst = src;
  dst.extrinsics.translation += 2.0 * src.optical_axis();
  const auto d = DepthMap::uniform(src.intrinsics.width, src.intrinsics.height, 10.0);
  const auto f = warp_depth(src, dst, d);
  ASSERT_GT(f.mask_count(), 0u);
  for (std::size_t i = 0; i < f.mask.size(); ++i) {
    if (f.mask[i]) {
      EXPECT_NEAR(f.warped_depth[i], 8.0, 1e-12);
    }
  }
}

TEST(WarpDepth, BehindCameraMasked) {
  const auto src = small_view();
  auto dst = src;
  dst.extrinsics.translation += 20.0 * src.optical_axis();
  const auto d = DepthMap::uniform(src.intrinsics.width, src.intrinsics.height, 10.0);
  EXPECT_EQ(warp_depth(src, dst, d).mask_count(), 0u);
}

TEST(WarpDepth, MaskSoundnessRoundTrip) {
  const auto rig = make_preset_rig("nuscenes6");
  const auto scene = random_scene(5, {1, 4, 2, 1.0, 3.0});
  const auto bundles = render_scene(rig, scene);
  const auto& a = rig.views[0];
  const auto& b = rig.views[1];
  const auto f = warp_depth(a, b, bundles[0].views[0].depth);
  const auto back = relative_transform(b, a);
  ASSERT_GT(f.mask_count(), 0u);
  double worst = 0.0;
  for (int y = 0; y < f.mask.height(); ++y) {
    for (int x = 0; x < f.mask.width(); ++x) {
      if (!f.mask(x, y)) continue;
      const auto p = backproject(b, f.target_px(x, y), f.warped_depth(x, y));
      const auto q = project(a, back.apply(p));
      worst = std::max(worst, (q.pixel - Eigen::Vector2d(x, y)).norm());
    }
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(WarpDepth, FrontoParallelPlaneAgrees) {
  // Plane z = 6 in the source camera seen by a laterally shifted twin.
  const auto src = small_view();
  auto dst = src;
  dst.extrinsics.translation += 0.3 * src.extrinsics.rotation.col(0);
  const auto ds = DepthMap::uniform(src.intrinsics.width, src.intrinsics.height, 6.0);
  const auto dd = DepthMap::uniform(dst.intrinsics.width, dst.intrinsics.height, 6.0);
  const auto f = warp_depth(src, dst, ds);
  std::size_t checked = 0;
  for (std::size_t i = 0; i < f.mask.size(); ++i) {
    if (!f.mask[i]) continue;
    const auto s = bilinear_sample(dd, f.target_px[i]);
    if (!s.in_bounds) continue;
    EXPECT_NEAR(s.value, f.warped_depth[i], 1e-9);
    ++checked;
  }
  EXPECT_GT(checked, 100u);
}

TEST(WarpDepth, AdjacentOverlapBand) {
  const auto rig = make_preset_rig("nuscenes6");
  SceneGenOptions opt;
  opt.frames = 1;
  opt.boxes = 0;
  opt.spheres = 0;
  const auto bundles = render_scene(rig, random_scene(1, opt));
  const double area = preset::kWidth * preset::kHeight;
  for (const auto& [ia, ib] : rig.adjacency) {
    const auto i = rig.index_of(ia), j = rig.index_of(ib);
    const auto f = warp_depth(rig.views[i], rig.views[j], bundles[0].views[i].depth);
    const double frac = static_cast<double>(f.mask_count()) / area;
    EXPECT_GE(frac, 0.20) << ia << "->" << ib;
    EXPECT_LE(frac, 0.40) << ia << "->" << ib;
  }
}

TEST(WarpPixel, IdentityReturnsCenter) {
  const auto v = small_view();
  const auto w = warp_pixel(v.intrinsics, v.intrinsics, RigidTransform::identity(), 5, 7, 3.25);
  EXPECT_EQ(w.target_px, Eigen::Vector2d(5, 7));
  EXPECT_EQ(w.depth, 3.25);
  EXPECT_TRUE(w.in_bounds);
}

TEST(Bilinear, IntegerAndMidpoint) {
  DepthMap d(4, 3);
  for (std::size_t i = 0; i < d.values.size(); ++i) {
    d.values[i] = 1.0 + static_cast<double>(i);
    d.valid[i] = 1;
  }
  const auto s = bilinear_sample(d, {2.0, 1.0});
  EXPECT_TRUE(s.in_bounds);
  EXPECT_EQ(s.value, d.values(2, 1));
  const auto m = bilinear_sample(d, {1.5, 1.0});
  EXPECT_TRUE(m.in_bounds);
  EXPECT_DOUBLE_EQ(m.value, 0.5 * (d.values(1, 1) + d.values(2, 1)));
  // Last pixel center is in bounds, anything past it is not.
  EXPECT_TRUE(bilinear_sample(d, {3.0, 2.0}).in_bounds);
  EXPECT_FALSE(bilinear_sample(d, {3.5, 1.0}).in_bounds);
  EXPECT_FALSE(bilinear_sample(d, {-0.1, 1.0}).in_bounds);
  d.valid(2, 1) = 0;
  EXPECT_FALSE(bilinear_sample(d, {1.5, 1.0}).in_bounds);
  EXPECT_TRUE(bilinear_sample(d, {1.0, 1.0}).in_bounds);
}

TEST(Bilinear, RgbMidpoint) {
  RgbImage img(2, 1);
  img.values(0, 0) = Rgb(0.2, 0.4, 0.6);
  img.values(1, 0) = Rgb(0.4, 0.0, 1.0);
  const auto s = bilinear_sample(img, {0.5, 0.0});
  ASSERT_TRUE(s.in_bounds);
  EXPECT_NEAR((s.value - Rgb(0.3, 0.2, 0.8)).norm(), 0.0, 1e-15);
}

TEST(EnumeratePairs, Counts) {
  EXPECT_TRUE(enumerate_pairs(make_preset_rig("mono1"), 1, 0).empty());
  const auto rig = make_preset_rig("nuscenes6");
  EXPECT_EQ(enumerate_pairs(rig, 1, 0).size(), 12u);
  const auto pairs = enumerate_pairs(rig, 2, 1);
  ASSERT_EQ(pairs.size(), 36u);
  std::size_t temporal = 0;
  for (const auto& p : pairs) temporal += p.temporal();
  EXPECT_EQ(temporal, 12u);
  // Deterministic order.
  EXPECT_EQ(pairs, enumerate_pairs(rig, 2, 1));
  EXPECT_EQ(pairs[0], (ViewPair{0, 1, 0, 0}));
  EXPECT_EQ(pairs[1], (ViewPair{1, 0, 0, 0}));
}

TEST(CorrespondenceField, MaskSubsetOfValid) {
  const auto rig = make_preset_rig("nuscenes6");
  const auto bundles = render_scene(rig, random_scene(2, {1, 6, 2, 1.0, 3.0}));
  const auto& d = bundles[0].views[2].depth;
  const auto f = warp_depth(rig.views[2], rig.views[3], d);
  for (std::size_t i = 0; i < f.mask.size(); ++i) {
    if (!f.mask[i]) continue;
    EXPECT_TRUE(d.valid[i]);
    EXPECT_GT(f.warped_depth[i], 0.0);
    EXPECT_GE(f.target_px[i].x(), 0.0);
    EXPECT_LT(f.target_px[i].x(), f.target_width);
    EXPECT_GE(f.target_px[i].y(), 0.0);
    EXPECT_LT(f.target_px[i].y(), f.target_height);
  }
}

}  // namespace
}  // namespace mvgc
