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
#include <set>

#include <gtest/gtest.h>

#include "mvgc/synthrig.hpp"
#include "support.hpp"

namespace mvgc {
namespace {

constexpr double kPi = 3.14159265358979323846;

SceneSpec empty_scene() {
  SceneSpec s;
  s.frames = 1;
  s.trajectory = {RigidTransform::identity()};
  return s;
}

CameraView level_camera(double h) {
  CameraView v;
  v.id = "level";
  v.intrinsics = {50.0, 50.0, 32.0, 24.0, 65, 49};
  v.extrinsics = camera_pose({0, 0, h}, 0.0, 0.0);
  return v;
}

TEST(Render, GroundPlaneClosedForm) {
  const double h = 1.5;
  const auto cam = level_camera(h);
  const auto r = render_view(empty_scene(), cam);
  for (int y = 26; y < 49; ++y) {
    // Interior columns only: edge masking may drop the outermost pixels.
    for (int x = 1; x < 64; ++x) {
      const double dy = (y - 24.0) / 50.0;  // ray down component for unit z
      ASSERT_TRUE(r.depth.is_valid(x, y)) << x << "," << y;
      EXPECT_NEAR(r.depth.values(x, y), h / dy, 1e-12 * h / dy);
    }
  }
}

TEST(Render, HorizonAndSkyInvalid) {
  const auto r = render_view(empty_scene(), level_camera(1.5));
  for (int x = 0; x < 65; ++x) {
    EXPECT_FALSE(r.depth.is_valid(x, 24));  // ray parallel to the plane
    EXPECT_FALSE(r.depth.is_valid(x, 3));
    EXPECT_EQ(r.surface(x, 3), kSurfaceSky);
  }
}

TEST(Render, BeyondMaxDepthInvalid) {
  auto spec = empty_scene();
  spec.max_depth = 10.0;
  const auto r = render_view(spec, level_camera(1.5));
  // Row 31 hits the ground at z = 1.5 * 50 / 7, about 10.7 m.
  EXPECT_FALSE(r.depth.is_valid(30, 31));
  EXPECT_TRUE(r.depth.is_valid(30, 40));
}

TEST(Render, SphereOnOpticalAxis) {
  auto spec = empty_scene();
  const double d = 12.0, rho = 1.25;
  spec.spheres.push_back({Eigen::Vector3d(d, 0.0, 1.5), rho, Rgb::Constant(0.6)});
  const auto r = render_view(spec, level_camera(1.5));
  ASSERT_TRUE(r.depth.is_valid(32, 24));
  EXPECT_NEAR(r.depth.values(32, 24), d - rho, 1e-12);
}

TEST(Render, BoxFaceDepth) {
  auto spec = empty_scene();
  BoxObject b;
  b.center = {10.0, 0.0, 1.0};
  b.l = 2.0;
  b.w = 4.0;
  b.h = 2.0;
  spec.boxes.push_back(b);
  const auto r = render_view(spec, level_camera(1.5));
  EXPECT_NEAR(r.depth.values(32, 24), 9.0, 1e-12);
  EXPECT_EQ(r.surface(32, 24), 2);
}

TEST(Render, ImagesInUnitRange) {
  const auto rig = make_preset_rig("nuscenes6");
  const auto bundles = render_scene(rig, random_scene(8, {1, 8, 3, 1.0, 3.0}));
  for (const auto& v : bundles[0].views) {
    for (const auto& c : v.image.values.data()) {
      EXPECT_GE(c.minCoeff(), 0.0);
      EXPECT_LE(c.maxCoeff(), 1.0);
    }
    EXPECT_NO_THROW(v.depth.validate());
  }
}

TEST(Render, Deterministic) {
  const auto rig = make_preset_rig("front3");
  const auto a = render_scene(rig, random_scene(21));
  const auto b = render_scene(rig, random_scene(21));
  EXPECT_EQ(a, b);
  EXPECT_NE(random_scene(21), random_scene(22));
}

TEST(Render, SelfConsistencyAwayFromEdges) {
  const auto rig = make_preset_rig("nuscenes6");
  const auto ground = render_scene(rig, random_scene(3, testing::ground_only(1)));
  for (const auto& [ia, ib] : rig.adjacency) {
    const auto i = rig.index_of(ia), j = rig.index_of(ib);
    const auto f = warp_depth(rig.views[i], rig.views[j], ground[0].views[i].depth);
    for (std::size_t p = 0; p < f.mask.size(); ++p) {
      if (!f.mask[p]) continue;
      const auto s = bilinear_sample(ground[0].views[j].depth, f.target_px[p]);
      if (s.in_bounds) {
        // Metric depth interpolation error on the plane over one pixel.
        EXPECT_LT(std::abs(s.value - f.warped_depth[p]), 1e-2 * f.warped_depth[p]);
      }
    }
  }
}

TEST(Render, ObjectSceneMostlyConsistent) {
  // With objects some correspondences see past an occluder; the bulk agrees.
  const auto rig = make_preset_rig("nuscenes6");
  const auto b = render_scene(rig, random_scene(3, {1, 8, 3, 1.0, 3.0}));
  std::size_t agree = 0, total = 0;
  for (const auto& [ia, ib] : rig.adjacency) {
    const auto i = rig.index_of(ia), j = rig.index_of(ib);
    const auto f = warp_depth(rig.views[i], rig.views[j], b[0].views[i].depth);
    for (std::size_t p = 0; p < f.mask.size(); ++p) {
      if (!f.mask[p]) continue;
      const auto s = sample_depth(b[0].views[j].depth, f.target_px[p], DepthInterpolation::kInverse);
      if (!s.in_bounds) continue;
      ++total;
      agree += std::abs(s.value - f.warped_depth[p]) < 1e-2;
    }
  }
  ASSERT_GT(total, 0u);
  EXPECT_GT(static_cast<double>(agree) / static_cast<double>(total), 0.9);
}

TEST(Scene, ValidateRejectsBadSpecs) {
  auto s = empty_scene();
  s.frames = 0;
  s.trajectory.clear();
  EXPECT_THROW(s.validate(), Error);
  s = empty_scene();
  s.boxes.push_back({});
  s.boxes.back().center = {0.0, 0.0, 0.75};
  s.boxes.back().h = 2.0;
  s.boxes.back().center.z() = 1.0;
  try {
    s.validate(make_preset_rig("mono1"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidScene);
  }
  SceneGenOptions crowded;
  crowded.boxes = 5000;
  EXPECT_THROW(random_scene(1, crowded), Error);
}

TEST(Scene, RandomSceneObjectsDisjoint) {
  const auto s = random_scene(4);
  EXPECT_EQ(s.boxes.size(), 8u);
  EXPECT_EQ(s.spheres.size(), 3u);
  for (const auto& b : s.boxes) EXPECT_DOUBLE_EQ(b.center.z(), b.h / 2.0);
  for (std::size_t i = 0; i < s.boxes.size(); ++i) {
    for (std::size_t j = i + 1; j < s.boxes.size(); ++j) {
      const double gap = (s.boxes[i].center - s.boxes[j].center).head<2>().norm();
      const double ri = 0.5 * std::hypot(s.boxes[i].l, s.boxes[i].w);
      const double rj = 0.5 * std::hypot(s.boxes[j].l, s.boxes[j].w);
      EXPECT_GT(gap, ri + rj);
    }
  }
  EXPECT_NO_THROW(s.validate(make_preset_rig("nuscenes6")));
}

TEST(Boxes, EgoFrameFollowsTrajectory) {
  const auto s = random_scene(6, {2, 4, 0, 1.5, 3.0});
  const auto f0 = boxes_in_ego(s, 0);
  const auto f1 = boxes_in_ego(s, 1);
  ASSERT_EQ(f0.size(), 4u);
  for (std::size_t i = 0; i < f0.size(); ++i) {
    EXPECT_NEAR(f0[i].cx - f1[i].cx, 1.5, 1e-12);
    EXPECT_NEAR(f0[i].cy, f1[i].cy, 1e-12);
    EXPECT_EQ(f0[i].id, f1[i].id);
  }
}

TEST(ShiftPair, ZeroShiftBitIdentical) {
  const auto rig = make_preset_rig("front3");
  const auto p = make_shift_pair(rig, random_scene(2, {1, 4, 1, 1.0, 3.0}), ShiftSpec{});
  EXPECT_EQ(p.source, p.target);
  EXPECT_EQ(p.source_rig, p.target_rig);
}

TEST(ShiftPair, BoxesIdenticalUnderShift) {
  const auto rig = make_preset_rig("front3");
  const auto p = make_shift_pair(rig, random_scene(2, {2, 4, 1, 1.0, 3.0}), ShiftSpec::all_axes());
  ASSERT_EQ(p.source.size(), p.target.size());
  for (std::size_t f = 0; f < p.source.size(); ++f) EXPECT_EQ(p.source[f].boxes, p.target[f].boxes);
  EXPECT_NE(p.source[0].views[0].depth, p.target[0].views[0].depth);
}

TEST(ShiftPair, HeightMatchesDepthScaleShift) {
  const auto rig = make_preset_rig("mono1");
  const auto spec = random_scene(1, testing::ground_only(1));
  const auto p = make_shift_pair(rig, spec, ShiftSpec::height(0.65));
  const auto& src = p.source_rig.views[0];
  const auto& tgt = p.target_rig.views[0];
  const auto& d = p.source[0].views[0].depth;
  std::size_t checked = 0;
  for (int y = 70; y < d.height(); y += 7) {
    for (int x = 10; x < d.width(); x += 31) {
      ASSERT_TRUE(d.is_valid(x, y));
      const Eigen::Vector3d ground = src.extrinsics.apply(backproject(src, {x, y}, d.values(x, y)));
      const double range = (ground - src.center()).head<2>().norm();
      const auto expect = depth_scale_shift(range, preset::kMountHeight, 0.65);
      EXPECT_NEAR((ground - src.center()).norm(), expect.d0, 1e-9);
      const Eigen::Vector3d dir = (ground - tgt.center()).normalized();
      const auto hit = cast_ray(spec, tgt.center(), dir);
      ASSERT_TRUE(hit.hit);
      EXPECT_NEAR(hit.t - (ground - src.center()).norm(), expect.delta, 1e-9);
      ++checked;
    }
  }
  EXPECT_GT(checked, 10u);
}

TEST(ShiftPair, PitchTangentRelation) {
  const auto rig = make_preset_rig("mono1");
  const auto spec = random_scene(1, testing::ground_only(1));
  const double five = 5.0 * kPi / 180.0, base = preset::kPitchDeg * kPi / 180.0;
  const auto p = make_shift_pair(rig, spec, ShiftSpec::pitch(five));
  const auto range = [&](const CameraView& v) {
    const auto hit = cast_ray(spec, v.center(), v.optical_axis());
    EXPECT_TRUE(hit.hit);
    return (hit.point - v.center()).head<2>().norm();
  };
  const double h = preset::kMountHeight;
  EXPECT_NEAR(range(p.source_rig.views[0]), h / std::tan(base), 1e-9);
  EXPECT_NEAR(range(p.target_rig.views[0]), h / std::tan(base + five), 1e-9);
  EXPECT_LT(range(p.target_rig.views[0]), range(p.source_rig.views[0]));
}

TEST(ShiftStudy, MonotoneOnGroundScene) {
  const auto rig = make_preset_rig("nuscenes6");
  const auto spec = random_scene(11, testing::ground_only(2));
  const auto study = shift_study(rig, spec,
                                 {ShiftSpec::height(0.0), ShiftSpec::height(0.2),
                                  ShiftSpec::height(0.65), ShiftSpec::pitch(5.0 * kPi / 180.0)},
                                 {1, 1, 1});
  ASSERT_EQ(study.rows.size(), 4u);
  EXPECT_LT(study.rows[0].report.l_ov, 1e-3);
  EXPECT_LT(study.rows[0].report.l_ov, study.rows[1].report.l_ov);
  EXPECT_LT(study.rows[1].report.l_ov, study.rows[2].report.l_ov);
  EXPECT_GT(study.rows[3].report.l_ov, study.rows[0].report.l_ov);
  EXPECT_TRUE(study.monotone);
  const auto csv = study.csv();
  EXPECT_NE(csv.find("monotone: true"), std::string::npos);
  EXPECT_NE(csv.find("mode,dx,dy,dz,dpitch_deg,dyaw_deg,magnitude,l_ov,l_p,valid"), std::string::npos);
}

TEST(ShiftStudy, RequiresZeroShift) {
  const auto rig = make_preset_rig("mono1");
  try {
    shift_study(rig, random_scene(1, testing::ground_only(1)), {ShiftSpec::height(0.2)}, {1, 1, 1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidShift);
  }
}

TEST(Batch, SlotsAreFrameMajor) {
  const auto sb = testing::scene_batch(2, testing::ground_only(2));
  ASSERT_EQ(sb.batch.slots.size(), 12u);
  EXPECT_EQ(sb.batch.slots[slot_index(sb.rig, 1, 2)].camera.id, "CAM_BACK_LEFT@1");
  EXPECT_EQ(sb.batch.pairs.size(), 36u);
  std::set<std::string> labels;
  for (const auto& l : sb.batch.pairs) labels.insert(l.label);
  EXPECT_EQ(labels.size(), 36u);
}

TEST(ModulateDepths, KeepsValidityAndPositivity) {
  auto sb = testing::scene_batch(2, {1, 3, 1, 1.0, 3.0}, 0);
  const auto before = sb.batch;
  modulate_depths(sb.batch, 0.03);
  for (std::size_t s = 0; s < before.slots.size(); ++s) {
    const auto& a = before.slots[s].depth;
    const auto& b = sb.batch.slots[s].depth;
    EXPECT_EQ(a.valid, b.valid);
    for (std::size_t i = 0; i < a.values.size(); ++i) {
      if (a.valid[i]) {
        EXPECT_NEAR(b.values[i] / a.values[i], 1.0, 0.0300001);
      }
    }
  }
}

}  // namespace
}  // namespace mvgc
