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
#include <cstdint>
#include <string>
#include <vector>

#include "mvgc/camgeom.hpp"
#include "mvgc/raster.hpp"
#include "mvgc/warp.hpp"

namespace mvgc {

struct LossWeights {
  double det = 1.0;
  double ov = 1.0;
  double p = 1.0;

  void validate() const;
};

// Uniform-window SSIM. Stabilizers default to (0.01 L)^2 and (0.03 L)^2.
struct SsimParams {
  int window = 3;
  double c1 = 1e-4;
  double c2 = 9e-4;
  double dynamic_range = 1.0;

  static SsimParams standard(double dynamic_range = 1.0);
  void validate() const;
};

enum class Reduction { kMean, kSum };

// How the target depth is read at a subpixel correspondence. Inverse-depth
// interpolation is exact on planes; linear interpolates metric depth.
enum class DepthInterpolation { kInverse, kLinear };

struct ConsistOptions {
  Reduction reduction = Reduction::kMean;
  DepthInterpolation interpolation = DepthInterpolation::kInverse;
  SsimParams ssim;
  WarpOptions warp;
};

// Accumulated residual sum and number of contributing terms.
struct LossSum {
  double sum = 0.0;
  std::size_t count = 0;

  double mean() const { return count ? sum / static_cast<double>(count) : 0.0; }
  double reduce(Reduction r) const { return r == Reduction::kMean ? mean() : sum; }
};

// Target depth read at a subpixel location under the chosen interpolation.
DepthSample sample_depth(const DepthMap& depth, const Eigen::Vector2d& at,
                         DepthInterpolation mode);

LossSum overlap_depth_sum(const CorrespondenceField& field,
                          const DepthMap& depth_dst,
                          DepthInterpolation mode = DepthInterpolation::kInverse);

// Mean absolute difference between the target depth sampled at the warped
// pixel and the warped depth. Returns (loss, count); loss is 0 if count is 0.
std::pair<double, std::size_t> overlap_depth_loss(
    const CorrespondenceField& field, const DepthMap& depth_dst,
    const ConsistOptions& options = {});

// Mean over windows of (1 - SSIM) / 2 between the source image at its own
// pixels and the target image sampled at the warped pixels. Only windows
// whose every pixel has a valid correspondence count.
LossSum photometric_sum(const CorrespondenceField& field,
                        const RgbImage& img_src, const RgbImage& img_dst,
                        const SsimParams& params = {});

std::pair<double, std::size_t> photometric_loss(
    const CorrespondenceField& field, const RgbImage& img_src,
    const RgbImage& img_dst, const ConsistOptions& options = {});

// SSIM of two equally sized patches, per channel averaged.
double ssim(const std::vector<Rgb>& a, const std::vector<Rgb>& b,
            const SsimParams& params);

// One camera at one frame, posed in the common world frame.
struct Slot {
  CameraView camera;
  DepthMap depth;
  RgbImage image;
};

// Directed pair between two slots; src_to_dst maps source camera
// coordinates to target camera coordinates.
struct PairLink {
  std::size_t src = 0;
  std::size_t dst = 0;
  RigidTransform src_to_dst;
  std::string label;
};

struct MultiViewBatch {
  std::vector<Slot> slots;
  std::vector<PairLink> pairs;

  void validate() const;
  // Appends a link whose transform is relative_transform(src, dst).
  void link(std::size_t src, std::size_t dst, std::string label = {});
};

struct PairLoss {
  std::string label;
  std::size_t src = 0;
  std::size_t dst = 0;
  LossSum ov;
  LossSum p;

  double l_ov(Reduction r = Reduction::kMean) const { return ov.reduce(r); }
  double l_p(Reduction r = Reduction::kMean) const { return p.reduce(r); }
};

struct LossReport {
  double l_det = 0.0;
  double l_ov = 0.0;
  double l_p = 0.0;
  double l_total = 0.0;
  LossWeights weights;
  Reduction reduction = Reduction::kMean;
  std::vector<PairLoss> per_pair;
  std::size_t total_valid = 0;  // overlap-depth correspondences
};

std::vector<PairLoss> evaluate_pairs(const MultiViewBatch& batch,
                                     const ConsistOptions& options = {});

// Pair terms pool under the reduction: kMean divides the summed residuals of
// all pairs by the summed counts, kSum adds them.
LossReport total_loss(double l_det, const std::vector<PairLoss>& pairs,
                      const LossWeights& weights,
                      Reduction reduction = Reduction::kMean);

LossReport evaluate(const MultiViewBatch& batch, const LossWeights& weights,
                    double l_det = 0.0, const ConsistOptions& options = {});

// weights.ov * L_ov + weights.p * L_p.
double consistency_objective(const MultiViewBatch& batch,
                             const LossWeights& weights,
                             const ConsistOptions& options = {});

// d(weights.ov * L_ov + weights.p * L_p) / dD per slot; zero outside valid
// depth pixels.
std::vector<Raster<double>> loss_gradient(const MultiViewBatch& batch,
                                          const LossWeights& weights,
                                          const ConsistOptions& options = {});

struct FdEntry {
  std::size_t slot = 0;
  int x = 0;
  int y = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_err = 0.0;
};

struct FdReport {
  double max_rel_err = 0.0;
  double mean_rel_err = 0.0;
  FdEntry worst;
  std::vector<FdEntry> entries;
  std::size_t skipped_boundary = 0;
  std::size_t skipped_nonsmooth = 0;
  double eps = 0.0;
};

// Central differences of the objective at `samples` seeded-random valid
// pixels. Pixels within one pixel of a validity or correspondence mask edge
// are skipped, as are pixels whose +/-eps stencil changes the piecewise
// structure of the loss (bilinear cell, residual sign, support).
FdReport finite_difference_check(const MultiViewBatch& batch,
                                 const LossWeights& weights,
                                 const ConsistOptions& options, double eps,
                                 std::size_t samples, std::uint64_t seed);

}  // namespace mvgc
