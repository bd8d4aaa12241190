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

#include "mvgc/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "mvgc/error.hpp"

namespace mvgc {

namespace {

constexpr int kRecallPoints = 101;

struct Match {
  double distance = 0.0;
  double scale_err = 0.0;
  double yaw_err = 0.0;
};

double bev_distance(const Box3D& a, const Box3D& b) {
  return std::hypot(a.cx - b.cx, a.cy - b.cy);
}

double aligned_iou(const Box3D& a, const Box3D& b) {
  const double inter =
      std::min(a.l, b.l) * std::min(a.w, b.w) * std::min(a.h, b.h);
  const double uni = a.l * a.w * a.h + b.l * b.w * b.h - inter;
  return inter / uni;
}

bool in_range(const Box3D& b, double limit) {
  return std::abs(b.cx) <= limit && std::abs(b.cy) <= limit;
}

// Precision/recall sweep of one greedy matching. Returns the AP and fills
// matches (in prediction order) when requested.
double average_precision(const std::vector<const Box3D*>& preds,
                         const std::vector<const Box3D*>& gts,
                         double threshold, std::vector<Match>* matches) {
  if (preds.empty() || gts.empty()) return 0.0;
  std::vector<bool> taken(gts.size(), false);
  std::vector<double> precision;
  std::vector<double> recall;
  precision.reserve(preds.size());
  recall.reserve(preds.size());
  int tp = 0;
  for (std::size_t k = 0; k < preds.size(); ++k) {
    const Box3D& p = *preds[k];
    int best = -1;
    double best_d = threshold;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (taken[g]) continue;
      const double d = bev_distance(p, *gts[g]);
      if (d <= best_d && (best < 0 || d < best_d)) {
        best = static_cast<int>(g);
        best_d = d;
      }
    }
    if (best >= 0) {
      taken[static_cast<std::size_t>(best)] = true;
      ++tp;
      if (matches) {
        const Box3D& g = *gts[static_cast<std::size_t>(best)];
        matches->push_back({best_d, 1.0 - aligned_iou(p, g),
                            std::abs(wrap_angle(p.yaw - g.yaw)) / std::numbers::pi});
      }
    }
    precision.push_back(static_cast<double>(tp) / static_cast<double>(k + 1));
    recall.push_back(static_cast<double>(tp) / static_cast<double>(gts.size()));
  }
  // Interpolated precision: best precision at any recall >= r.
  std::vector<double> envelope(precision.size());
  double run = 0.0;
  for (std::size_t k = precision.size(); k-- > 0;) {
    run = std::max(run, precision[k]);
    envelope[k] = run;
  }
  double ap = 0.0;
  std::size_t cursor = 0;
  for (int i = 0; i < kRecallPoints; ++i) {
    const double r = static_cast<double>(i) / (kRecallPoints - 1);
    while (cursor < recall.size() && recall[cursor] < r - 1e-12) ++cursor;
    if (cursor < recall.size()) ap += envelope[cursor];
  }
  return ap / kRecallPoints;
}

}  // namespace

void Box3D::validate() const {
  if (!(l > 0.0 && w > 0.0 && h > 0.0)) {
    throw Error(ErrorCode::kOutOfRange, "box sizes must be positive");
  }
}

double wrap_angle(double a) {
  const double two_pi = 2.0 * std::numbers::pi;
  double r = std::fmod(a, two_pi);
  if (r <= -std::numbers::pi) r += two_pi;
  if (r > std::numbers::pi) r -= two_pi;
  return r;
}

void EvalConfig::validate() const {
  if (thresholds.empty()) {
    throw Error(ErrorCode::kOutOfRange, "at least one match threshold");
  }
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    if (!(thresholds[i] > 0.0) || (i > 0 && thresholds[i] <= thresholds[i - 1])) {
      throw Error(ErrorCode::kOutOfRange, "thresholds must be positive ascending");
    }
  }
  if (!(range_limit > 0.0)) throw Error(ErrorCode::kOutOfRange, "range limit");
}

double nds_star(double mAP, double mATE, double mASE, double mAOE) {
  if (!(mAP >= 0.0 && mAP <= 1.0)) {
    throw Error(ErrorCode::kOutOfRange, "mAP must lie in [0,1]");
  }
  double tp_sum = 0.0;
  for (double err : {mATE, mASE, mAOE}) {
    if (!(err >= 0.0) || !std::isfinite(err)) {
      throw Error(ErrorCode::kOutOfRange, "TP errors must be finite and >= 0");
    }
    tp_sum += 1.0 - std::min(1.0, err);
  }
  return (3.0 * mAP + tp_sum) / 6.0;
}

double nds_star(const MetricBundle& m) {
  return nds_star(m.mAP, m.mATE, m.mASE, m.mAOE);
}

double closed_gap(double model_nds, double dt_nds, double oracle_nds) {
  const double gap = oracle_nds - dt_nds;
  if (gap == 0.0) {
    throw Error(ErrorCode::kDegenerateBaseline, "oracle equals direct transfer");
  }
  return (model_nds - dt_nds) / gap * 100.0;
}

MetricBundle match_and_score(const std::vector<Box3D>& preds,
                             const std::vector<Box3D>& gts,
                             const EvalConfig& cfg) {
  cfg.validate();
  MetricBundle out;
  double ap_sum = 0.0;
  std::vector<Match> matches;
  for (const auto& cls : cfg.classes) {
    std::vector<const Box3D*> p;
    std::vector<const Box3D*> g;
    for (const auto& b : preds) {
      if (b.cls == cls && in_range(b, cfg.range_limit)) p.push_back(&b);
    }
    for (const auto& b : gts) {
      if (b.cls == cls && in_range(b, cfg.range_limit)) g.push_back(&b);
    }
    std::stable_sort(p.begin(), p.end(), [](const Box3D* a, const Box3D* b) {
      if (a->score != b->score) return a->score > b->score;
      return a->id < b->id;
    });
    // Ground truth order only matters for equal-distance ties.
    std::stable_sort(g.begin(), g.end(), [](const Box3D* a, const Box3D* b) {
      return a->id < b->id;
    });
    double cls_ap = 0.0;
    for (std::size_t t = 0; t < cfg.thresholds.size(); ++t) {
      const bool last = t + 1 == cfg.thresholds.size();
      cls_ap += average_precision(p, g, cfg.thresholds[t], last ? &matches : nullptr);
    }
    ap_sum += cls_ap / static_cast<double>(cfg.thresholds.size());
  }
  out.mAP = cfg.classes.empty() ? 0.0 : ap_sum / static_cast<double>(cfg.classes.size());
  if (!matches.empty()) {
    double te = 0.0, se = 0.0, oe = 0.0;
    for (const auto& m : matches) {
      te += m.distance;
      se += m.scale_err;
      oe += m.yaw_err;
    }
    const double n = static_cast<double>(matches.size());
    out.mATE = te / n;
    out.mASE = se / n;
    out.mAOE = oe / n;
  }
  out.nds = nds_star(out);
  return out;
}

std::vector<Box3D> extrinsic_augment(const std::vector<Box3D>& gts,
                                     double alpha) {
  const double c = std::cos(alpha);
  const double s = std::sin(alpha);
  std::vector<Box3D> out = gts;
  for (auto& b : out) {
    const double x = b.cx;
    const double y = b.cy;
    b.cx = c * x - s * y;
    b.cy = s * x + c * y;
    b.yaw = wrap_angle(b.yaw + alpha);
  }
  return out;
}

double sample_augment_angle(std::uint64_t seed, double band) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-band, band);
  return dist(rng);
}

}  // namespace mvgc
