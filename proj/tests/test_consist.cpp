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

#include "mvgc/consist.hpp"
#include "support.hpp"

namespace mvgc {
namespace {

using testing::same_pose_pair;
using testing::scene_batch;

ConsistOptions with_interp(DepthInterpolation m) {
  ConsistOptions o;
  o.interpolation = m;
  return o;
}

TEST(OverlapDepth, IdentityZeroAndOffset) {
  const auto b0 = same_pose_pair(5.0, 0.0);
  const auto f0 = warp_depth(b0.slots[0].camera, b0.slots[1].camera, b0.slots[0].depth);
  const auto [l0, n0] = overlap_depth_loss(f0, b0.slots[1].depth);
  EXPECT_EQ(l0, 0.0);
  EXPECT_EQ(n0, b0.slots[0].depth.valid_count());

  for (double delta : {0.25, -0.4}) {
    const auto b = same_pose_pair(5.0, delta);
    const auto f = warp_depth(b.slots[0].camera, b.slots[1].camera, b.slots[0].depth);
    for (auto m : {DepthInterpolation::kInverse, DepthInterpolation::kLinear}) {
      const auto [l, n] = overlap_depth_loss(f, b.slots[1].depth, with_interp(m));
      EXPECT_NEAR(l, std::abs(delta), 1e-12);
      EXPECT_GT(n, 0u);
    }
  }
}

TEST(OverlapDepth, EmptySupportIsZero) {
  auto b = same_pose_pair(5.0, 0.3);
  for (auto& v : b.slots[0].depth.valid.data()) v = 0;
  const auto f = warp_depth(b.slots[0].camera, b.slots[1].camera, b.slots[0].depth);
  const auto [l, n] = overlap_depth_loss(f, b.slots[1].depth);
  EXPECT_EQ(l, 0.0);
  EXPECT_EQ(n, 0u);
  const auto [lp, np] = photometric_loss(f, b.slots[0].image, b.slots[1].image);
  EXPECT_EQ(lp, 0.0);
  EXPECT_EQ(np, 0u);
}

TEST(OverlapDepth, DimensionMismatch) {
  const auto b = same_pose_pair(5.0, 0.0);
  const auto f = warp_depth(b.slots[0].camera, b.slots[1].camera, b.slots[0].depth);
  try {
    overlap_depth_loss(f, DepthMap::uniform(3, 3, 1.0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDimensionMismatch);
  }
}

TEST(Photometric, IdentityIsZero) {
  const auto b = same_pose_pair(5.0, 0.0);
  const auto f = warp_depth(b.slots[0].camera, b.slots[1].camera, b.slots[0].depth);
  const auto [l, n] = photometric_loss(f, b.slots[0].image, b.slots[1].image);
  EXPECT_NEAR(l, 0.0, 1e-15);
  EXPECT_GT(n, 0u);
}

TEST(Photometric, ConstantImagesClosedForm) {
  auto b = same_pose_pair(5.0, 0.0);
  const double mu1 = 0.3, mu2 = 0.7;
  for (auto& v : b.slots[0].image.values.data()) v = Rgb::Constant(mu1);
  for (auto& v : b.slots[1].image.values.data()) v = Rgb::Constant(mu2);
  const auto f = warp_depth(b.slots[0].camera, b.slots[1].camera, b.slots[0].depth);
  const auto params = SsimParams::standard();
  const double c1 = 1e-4;
  const double expect_ssim = (2 * mu1 * mu2 + c1) / (mu1 * mu1 + mu2 * mu2 + c1);
  const auto [l, n] = photometric_loss(f, b.slots[0].image, b.slots[1].image);
  ASSERT_GT(n, 0u);
  EXPECT_NEAR(l, (1.0 - expect_ssim) / 2.0, 1e-12);
  std::vector<Rgb> a(9, Rgb::Constant(mu1)), c(9, Rgb::Constant(mu2));
  EXPECT_NEAR(ssim(a, c, params), expect_ssim, 1e-12);
}

TEST(SsimParams, StandardConstants) {
  const auto p = SsimParams::standard(1.0);
  EXPECT_EQ(p.window, 3);
  EXPECT_DOUBLE_EQ(p.c1, 1e-4);
  EXPECT_DOUBLE_EQ(p.c2, 9e-4);
  SsimParams bad;
  bad.window = 4;
  EXPECT_THROW(bad.validate(), Error);
}

TEST(TotalLoss, WeightedSums) {
  PairLoss p;
  p.ov = {0.3, 1};
  p.p = {0.1, 1};
  EXPECT_DOUBLE_EQ(total_loss(0.2, {p}, {1, 0, 0}).l_total, 0.2);
  EXPECT_DOUBLE_EQ(total_loss(0.2, {p}, {0, 1, 0}).l_total, 0.3);
  EXPECT_NEAR(total_loss(0.2, {p}, {1, 1, 1}).l_total, 0.6, 1e-15);
  EXPECT_THROW(total_loss(-1.0, {p}, {1, 1, 1}), Error);
  EXPECT_THROW(total_loss(0.0, {p}, {0, 0, 0}), Error);
  EXPECT_THROW(total_loss(0.0, {p}, {-1, 1, 1}), Error);
}

TEST(TotalLoss, MeanPoolsCountsAcrossPairs) {
  PairLoss a, b;
  a.ov = {2.0, 4};
  b.ov = {1.0, 1};
  const auto r = total_loss(0.0, {a, b}, {0, 1, 0}, Reduction::kMean);
  EXPECT_DOUBLE_EQ(r.l_ov, 3.0 / 5.0);
  EXPECT_EQ(r.total_valid, 5u);
  const auto s = total_loss(0.0, {a, b}, {0, 1, 0}, Reduction::kSum);
  EXPECT_DOUBLE_EQ(s.l_ov, 3.0);
}

TEST(Gradient, IdentityOffsetIsPlusMinusOneOverN) {
  for (double delta : {0.2, -0.2}) {
    const auto b = same_pose_pair(5.0, delta);
    const auto g = loss_gradient(b, {0, 1, 0});
    const double n = static_cast<double>(b.slots[0].depth.valid_count());
    const double sign = delta > 0 ? 1.0 : -1.0;
    for (std::size_t i = 0; i < g[0].size(); ++i) {
      EXPECT_NEAR(g[0][i], sign / n, 1e-15);
      EXPECT_NEAR(g[1][i], -sign / n, 1e-15);
    }
  }
}

TEST(Gradient, ZeroOutsideValid) {
  auto b = same_pose_pair(5.0, 0.2);
  b.slots[0].depth.valid(3, 4) = 0;
  const auto g = loss_gradient(b, {0, 1, 1});
  EXPECT_EQ(g[0](3, 4), 0.0);
  for (const auto& r : g) {
    for (double v : r.data()) EXPECT_TRUE(std::isfinite(v));
  }
}

TEST(FiniteDifference, IdentityOffsetCase) {
  const auto b = same_pose_pair(5.0, 0.2);
  const auto rep = finite_difference_check(b, {0, 1, 0}, {}, 1e-3, 200, 7);
  EXPECT_GT(rep.entries.size(), 0u);
  EXPECT_LT(rep.max_rel_err, 1e-8);
}

TEST(FiniteDifference, NoSamples) {
  const auto b = same_pose_pair(5.0, 0.2);
  try {
    finite_difference_check(b, {0, 1, 0}, {}, 1e-3, 0, 7);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNoSamples);
  }
  EXPECT_THROW(finite_difference_check(b, {0, 1, 0}, {}, 0.0, 10, 7), Error);
}

TEST(FiniteDifference, AdjacentPairOnScene) {
  auto sb = scene_batch(3, {1, 4, 2, 1.0, 3.0}, 0);
  MultiViewBatch b;
  b.slots = {sb.batch.slots[0], sb.batch.slots[1]};
  b.link(0, 1);
  b.link(1, 0);
  modulate_depths(b, 0.03);
  for (auto m : {DepthInterpolation::kInverse, DepthInterpolation::kLinear}) {
    const auto rep = finite_difference_check(b, {0, 1, 1}, with_interp(m), 1e-3, 300, 42);
    EXPECT_GE(rep.entries.size(), 300u);
    EXPECT_LT(rep.max_rel_err, 1e-4);
  }
}

TEST(FiniteDifference, DeterministicGivenSeed) {
  auto b = same_pose_pair(5.0, 0.2);
  const auto a = finite_difference_check(b, {0, 1, 1}, {}, 1e-3, 50, 9);
  const auto c = finite_difference_check(b, {0, 1, 1}, {}, 1e-3, 50, 9);
  ASSERT_EQ(a.entries.size(), c.entries.size());
  for (std::size_t i = 0; i < a.entries.size(); ++i) {
    EXPECT_EQ(a.entries[i].x, c.entries[i].x);
    EXPECT_EQ(a.entries[i].numeric, c.entries[i].numeric);
  }
}

TEST(Scene, ZeroAtTruthGroundOnly) {
  const auto sb = scene_batch(11, testing::ground_only(2));
  const auto r = evaluate(sb.batch, {1, 1, 1});
  ASSERT_EQ(r.per_pair.size(), 36u);
  EXPECT_LT(r.l_ov, 1e-3);
  EXPECT_LT(r.l_p, 1e-2);
  for (const auto& p : r.per_pair) {
    EXPECT_GT(p.ov.count, 0u) << p.label;
    EXPECT_LT(p.l_ov(), 1e-3) << p.label;
    EXPECT_LT(p.l_p(), 1e-2) << p.label;
  }
}

TEST(Scene, NonnegativeAndPerPairAggregates) {
  const auto sb = scene_batch(4, {2, 6, 2, 1.0, 3.0});
  const auto r = evaluate(sb.batch, {1, 1, 1}, 0.5);
  LossSum ov, p;
  for (const auto& pl : r.per_pair) {
    EXPECT_GE(pl.l_ov(), 0.0);
    EXPECT_GE(pl.l_p(), 0.0);
    ov.sum += pl.ov.sum;
    ov.count += pl.ov.count;
    p.sum += pl.p.sum;
    p.count += pl.p.count;
  }
  EXPECT_DOUBLE_EQ(r.l_ov, ov.mean());
  EXPECT_DOUBLE_EQ(r.l_p, p.mean());
  EXPECT_EQ(r.total_valid, ov.count);
  EXPECT_DOUBLE_EQ(r.l_total, 0.5 + r.l_ov + r.l_p);
}

TEST(Scene, SupportSymmetry) {
  const auto sb = scene_batch(4, {1, 6, 2, 1.0, 3.0}, 0);
  const auto pairs = evaluate_pairs(sb.batch);
  for (std::size_t k = 0; k + 1 < pairs.size(); k += 2) {
    const double a = static_cast<double>(pairs[k].ov.count);
    const double b = static_cast<double>(pairs[k + 1].ov.count);
    EXPECT_EQ(pairs[k].src, pairs[k + 1].dst);
    EXPECT_LT(std::abs(a - b) / std::max(a, b), 0.10) << pairs[k].label;
  }
}

TEST(Scene, DepthScalingIsMonotone) {
  const auto sb = scene_batch(11, testing::ground_only(2));
  for (double sign : {1.0, -1.0}) {
    double prev = -1.0;
    for (double eps : {0.01, 0.05, 0.10}) {
      MultiViewBatch b = sb.batch;
      // Scale only the source depths: the warp reads slot depths of the
      // source, the target keeps truth.
      MultiViewBatch scaled = b;
      for (auto& s : scaled.slots) {
        for (auto& v : s.depth.values.data()) v *= 1.0 + sign * eps;
      }
      double ov_sum = 0.0;
      std::size_t n = 0;
      for (const auto& link : b.pairs) {
        const auto f = warp_depth(b.slots[link.src].camera.intrinsics,
                                  b.slots[link.dst].camera.intrinsics, link.src_to_dst,
                                  scaled.slots[link.src].depth);
        const auto s = overlap_depth_sum(f, b.slots[link.dst].depth);
        ov_sum += s.sum;
        n += s.count;
      }
      const double l = ov_sum / static_cast<double>(n);
      EXPECT_GT(l, prev) << "eps " << sign * eps;
      prev = l;
    }
  }
}

TEST(Batch, ValidateRejectsSelfLink) {
  auto b = same_pose_pair(5.0, 0.0);
  b.pairs.push_back({0, 0, RigidTransform::identity(), "self"});
  EXPECT_THROW(b.validate(), Error);
}

}  // namespace
}  // namespace mvgc
