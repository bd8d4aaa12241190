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

#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "mvgc/camgeom.hpp"
#include "mvgc/error.hpp"

namespace mvgc {
namespace {

constexpr double kPi = 3.14159265358979323846;

CameraView unit_view() {
  CameraView v;
  v.id = "cam";
  v.intrinsics = {100.0, 100.0, 50.0, 40.0, 101, 81};
  return v;
}

RigidTransform random_pose(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  return camera_pose({u(rng), u(rng), u(rng)}, u(rng), 0.3 * u(rng));
}

TEST(Project, PrincipalPointAtUnitDepth) {
  const auto view = unit_view();
  const auto p = backproject(view, {50.0, 40.0}, 1.0);
  EXPECT_EQ(p, Eigen::Vector3d(0, 0, 1));
  const auto q = backproject(view, {150.0, 40.0}, 1.0);
  EXPECT_DOUBLE_EQ(q.x(), 1.0);
  EXPECT_DOUBLE_EQ(q.y(), 0.0);
  EXPECT_DOUBLE_EQ(q.z(), 1.0);
}

TEST(Project, RoundTripRelativeError) {
  const auto view = unit_view();
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> px(0.0, 100.0), py(0.0, 80.0), d(0.1, 80.0);
  for (int i = 0; i < 2000; ++i) {
    const Eigen::Vector2d pixel(px(rng), py(rng));
    const double depth = d(rng);
    const auto proj = project(view, backproject(view, pixel, depth));
    EXPECT_LT((proj.pixel - pixel).norm() / pixel.norm(), 1e-10);
    EXPECT_LT(std::abs(proj.depth - depth) / depth, 1e-10);
  }
}

TEST(Project, BehindCameraThrows) {
  const auto view = unit_view();
  try {
    project(view, {0, 0, -1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerateDepth);
  }
  EXPECT_THROW(backproject(view, {1, 1}, 0.0), Error);
}

TEST(RelativeTransform, SameViewIsIdentity) {
  auto v = unit_view();
  v.extrinsics = camera_pose({1, 2, 1.5}, 0.4, 0.1);
  const auto t = relative_transform(v, v);
  EXPECT_EQ(t.rotation, Eigen::Matrix3d::Identity());
  EXPECT_EQ(t.translation, Eigen::Vector3d::Zero());
}

TEST(RelativeTransform, ForwardOffset) {
  auto dst = unit_view();
  dst.extrinsics = camera_pose({0, 0, 1.5}, 0.7, 0.0);
  auto src = dst;
  src.extrinsics.translation += 2.0 * dst.optical_axis();
  const auto t = relative_transform(src, dst);
  EXPECT_NEAR((t.translation - Eigen::Vector3d(0, 0, 2)).norm(), 0.0, 1e-12);
  EXPECT_NEAR((t.rotation - Eigen::Matrix3d::Identity()).norm(), 0.0, 1e-12);
}

TEST(RelativeTransform, InversePairAndGroupoid) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 200; ++i) {
    auto a = unit_view(), b = unit_view(), c = unit_view();
    a.extrinsics = random_pose(rng);
    b.extrinsics = random_pose(rng);
    c.extrinsics = random_pose(rng);
    const auto ab = relative_transform(a, b);
    const auto ba = relative_transform(b, a);
    const auto id = ab * ba;
    EXPECT_LT((id.rotation - Eigen::Matrix3d::Identity()).norm(), 1e-9);
    EXPECT_LT(id.translation.norm(), 1e-9);
    const auto ac = relative_transform(a, c);
    const auto chain = relative_transform(b, c) * ab;
    EXPECT_LT((chain.rotation - ac.rotation).norm(), 1e-9);
    EXPECT_LT((chain.translation - ac.translation).norm(), 1e-9);
  }
}

TEST(Preset, Topology) {
  const auto ns = make_preset_rig("nuscenes6");
  EXPECT_EQ(ns.views.size(), 6u);
  EXPECT_EQ(ns.adjacency.size(), 6u);
  EXPECT_NO_THROW(ns.validate());
  const auto mono = make_preset_rig("mono1");
  EXPECT_EQ(mono.views.size(), 1u);
  EXPECT_TRUE(mono.adjacency.empty());
  EXPECT_EQ(make_preset_rig("front3").views.size(), 3u);
}

TEST(Preset, DocumentedConstants) {
  const auto rig = make_preset_rig("nuscenes6");
  for (std::size_t i = 0; i < rig.views.size(); ++i) {
    const auto& v = rig.views[i];
    EXPECT_EQ(v.intrinsics.width, preset::kWidth);
    EXPECT_EQ(v.intrinsics.height, preset::kHeight);
    const double hfov = 2.0 * std::atan(0.5 * v.intrinsics.width / v.intrinsics.fx);
    EXPECT_NEAR(hfov * 180.0 / kPi, preset::kHorizontalFovDeg, 1.0);
    EXPECT_NEAR(v.center().z(), preset::kMountHeight, 1e-12);
    const Eigen::Vector3d axis = v.optical_axis();
    EXPECT_NEAR(std::asin(-axis.z()) * 180.0 / kPi, preset::kPitchDeg, 1e-9);
  }
  // Ring yaw spacing between consecutive adjacency pairs.
  for (const auto& [a, b] : rig.adjacency) {
    const auto& va = rig.views[rig.index_of(a)];
    const auto& vb = rig.views[rig.index_of(b)];
    const Eigen::Vector2d fa = va.optical_axis().head<2>().normalized();
    const Eigen::Vector2d fb = vb.optical_axis().head<2>().normalized();
    EXPECT_NEAR(std::acos(std::clamp(fa.dot(fb), -1.0, 1.0)) * 180.0 / kPi,
                preset::kYawSpacingDeg, 1e-9);
  }
}

TEST(Preset, UnknownNameListsPresets) {
  try {
    make_preset_rig("kitti");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnknownPreset);
    const std::string msg = e.what();
    for (const auto& n : preset_names()) EXPECT_NE(msg.find(n), std::string::npos);
  }
}

TEST(PerturbRig, HeightRaisesCenters) {
  const auto rig = make_preset_rig("nuscenes6");
  const auto out = perturb_rig(rig, ShiftSpec::height(0.65));
  for (std::size_t i = 0; i < rig.views.size(); ++i) {
    const Eigen::Vector3d d = out.views[i].center() - rig.views[i].center();
    EXPECT_NEAR(d.z(), 0.65, 1e-15);
    EXPECT_EQ(d.x(), 0.0);
    EXPECT_EQ(d.y(), 0.0);
    EXPECT_EQ(out.views[i].extrinsics.rotation, rig.views[i].extrinsics.rotation);
  }
  // Input untouched.
  EXPECT_EQ(rig, make_preset_rig("nuscenes6"));
}

TEST(PerturbRig, PitchTiltsAxes) {
  const auto rig = make_preset_rig("nuscenes6");
  const double five = 5.0 * kPi / 180.0;
  const auto out = perturb_rig(rig, ShiftSpec::pitch(five));
  for (std::size_t i = 0; i < rig.views.size(); ++i) {
    EXPECT_EQ(out.views[i].center(), rig.views[i].center());
    const double angle = std::acos(std::clamp(
        out.views[i].optical_axis().dot(rig.views[i].optical_axis()), -1.0, 1.0));
    EXPECT_NEAR(angle, five, 1e-9);
    // Tilted further down.
    EXPECT_LT(out.views[i].optical_axis().z(), rig.views[i].optical_axis().z());
  }
}

TEST(PerturbRig, ZeroShiftIsIdentity) {
  const auto rig = make_preset_rig("nuscenes6");
  EXPECT_EQ(perturb_rig(rig, ShiftSpec{}), rig);
  EXPECT_EQ(perturb_rig(rig, ShiftSpec::height(0.0)), rig);
}

TEST(PerturbRig, AllAxesSideSigns) {
  const auto rig = make_preset_rig("nuscenes6");
  const auto out = perturb_rig(rig, ShiftSpec::all_axes());
  const auto& left = out.views[rig.index_of("CAM_FRONT_LEFT")];
  const auto& right = out.views[rig.index_of("CAM_FRONT_RIGHT")];
  EXPECT_NEAR(left.center().z() - preset::kMountHeight, 0.2, 1e-12);
  EXPECT_NEAR(right.center().z() - preset::kMountHeight, -0.2, 1e-12);
}

TEST(PerturbRig, InconsistentModeThrows) {
  ShiftSpec s = ShiftSpec::height(0.2);
  s.dpitch = 0.1;
  try {
    perturb_rig(make_preset_rig("mono1"), s);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidShift);
  }
}

TEST(DepthScaleShift, ClosedForm) {
  EXPECT_EQ(depth_scale_shift(10.0, 1.5, 0.0).delta, 0.0);
  const auto r = depth_scale_shift(10.0, 1.5, 0.65);
  EXPECT_NEAR(r.d0, std::sqrt(100.0 + 2.25), 1e-12);
  EXPECT_NEAR(r.d1, std::sqrt(100.0 + 2.15 * 2.15), 1e-12);
  EXPECT_NEAR(r.delta, std::sqrt(104.6225) - std::sqrt(102.25), 1e-12);
}

TEST(DepthScaleShift, MonotoneInDh) {
  for (double range : {2.0, 10.0, 40.0}) {
    for (double h0 : {0.5, 1.5, 3.0}) {
      double prev = 0.0;
      for (double dh : {0.05, 0.2, 0.65, 1.0}) {
        const double d = depth_scale_shift(range, h0, dh).delta;
        EXPECT_GT(d, prev);
        prev = d;
      }
    }
  }
}

TEST(ShiftMode, ParseNames) {
  EXPECT_EQ(parse_shift_mode("height"), ShiftMode::kHeight);
  EXPECT_EQ(parse_shift_mode("all"), ShiftMode::kAll);
  EXPECT_EQ(to_string(ShiftMode::kPitch), "pitch");
  EXPECT_THROW(parse_shift_mode("roll"), Error);
}

}  // namespace
}  // namespace mvgc
