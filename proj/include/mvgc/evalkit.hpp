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
#include <vector>

namespace mvgc {

// 7-DoF box in the ego frame. Score is only meaningful for predictions.
struct Box3D {
  double cx = 0.0;
  double cy = 0.0;
  double cz = 0.0;
  double l = 1.0;
  double w = 1.0;
  double h = 1.0;
  double yaw = 0.0;
  double score = 1.0;
  std::string cls = "car";
  std::string id;

  void validate() const;
  bool operator==(const Box3D&) const = default;
};

// Wraps an angle into (-pi, pi].
double wrap_angle(double a);

struct MetricBundle {
  double mAP = 0.0;
  double mATE = 1.0;
  double mASE = 1.0;
  double mAOE = 1.0;
  double nds = 0.0;

  bool operator==(const MetricBundle&) const = default;
};

struct EvalConfig {
  double range_limit = 50.0;  // |x|, |y| bound in meters
  std::vector<double> thresholds = {0.5, 1.0, 2.0, 4.0};
  std::vector<std::string> classes = {"car"};

  void validate() const;
};

// (3 mAP + sum over the three errors of (1 - min(1, err))) / 6.
double nds_star(double mAP, double mATE, double mASE, double mAOE);
double nds_star(const MetricBundle& m);

// Percent of the oracle-vs-direct-transfer gap recovered by the model.
double closed_gap(double model_nds, double dt_nds, double oracle_nds);

// Greedy center-distance matching (score descending, ties by id) per
// threshold; AP from 101-point interpolated precision. TP errors come from
// the matching at the largest threshold. Without any match the TP errors
// are 1 and without predictions or ground truth the AP is 0.
MetricBundle match_and_score(const std::vector<Box3D>& preds,
                             const std::vector<Box3D>& gts,
                             const EvalConfig& cfg = {});

// Rotates centers about the ego z axis by alpha and adds alpha to yaw.
std::vector<Box3D> extrinsic_augment(const std::vector<Box3D>& gts,
                                     double alpha);

// Draws alpha uniformly from [-band, band] using the seed.
double sample_augment_angle(std::uint64_t seed, double band);

}  // namespace mvgc
