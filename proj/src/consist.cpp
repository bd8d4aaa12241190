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

#include "mvgc/consist.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "mvgc/error.hpp"

namespace mvgc {

namespace {

struct Rect {
  int x0 = 0, y0 = 0, x1 = -1, y1 = -1;  // inclusive

  static Rect full(int w, int h) { return {0, 0, w - 1, h - 1}; }
  Rect clipped(int w, int h) const {
    return {std::max(0, x0), std::max(0, y0), std::min(w - 1, x1),
            std::min(h - 1, y1)};
  }
};

using Signature = std::vector<long long>;

int sign_of(double r) { return (r > 0.0) - (r < 0.0); }

// Target depth sample with derivatives with respect to the sampling
// location and every tap.
struct DepthSampleGrad {
  double value = 0.0;
  bool ok = false;
  double d_du = 0.0;
  double d_dv = 0.0;
  int n = 0;
  int tx[4] = {0, 0, 0, 0};
  int ty[4] = {0, 0, 0, 0};
  double d_tap[4] = {0, 0, 0, 0};
};

DepthSampleGrad sample_depth_grad(const DepthMap& depth,
                                  const Eigen::Vector2d& at,
                                  DepthInterpolation mode) {
  DepthSampleGrad g;
  const auto f = bilinear_footprint(depth.width(), depth.height(), at);
  if (!f.in_bounds) return g;
  const bool two_x = f.ax > 0.0;
  const bool two_y = f.ay > 0.0;
  double w[4], dw_du[4], dw_dv[4], dv[4];
  g.n = f.count();
  for (int k = 0; k < g.n; ++k) {
    int x, y;
    f.tap(k, x, y, w[k]);
    if (!depth.is_valid(x, y)) return g;
    const int kx = x - f.x0;
    const int ky = y - f.y0;
    const double wx = kx ? f.ax : 1.0 - f.ax;
    const double wy = ky ? f.ay : 1.0 - f.ay;
    dw_du[k] = two_x ? (kx ? 1.0 : -1.0) * wy : 0.0;
    dw_dv[k] = two_y ? (ky ? 1.0 : -1.0) * wx : 0.0;
    g.tx[k] = x;
    g.ty[k] = y;
    dv[k] = depth.values(x, y);
  }
  if (mode == DepthInterpolation::kLinear) {
    for (int k = 0; k < g.n; ++k) {
      g.value += w[k] * dv[k];
      g.d_du += dw_du[k] * dv[k];
      g.d_dv += dw_dv[k] * dv[k];
      g.d_tap[k] = w[k];
    }
  } else {
    double q = 0.0, dq_du = 0.0, dq_dv = 0.0;
    for (int k = 0; k < g.n; ++k) {
      q += w[k] / dv[k];
      dq_du += dw_du[k] / dv[k];
      dq_dv += dw_dv[k] / dv[k];
    }
    g.value = g.n == 1 ? dv[0] : 1.0 / q;  // a lone tap is returned exactly
    const double s2 = g.value * g.value;
    g.d_du = -s2 * dq_du;
    g.d_dv = -s2 * dq_dv;
    for (int k = 0; k < g.n; ++k) g.d_tap[k] = s2 * w[k] / (dv[k] * dv[k]);
  }
  g.ok = true;
  return g;
}

// Image sample with spatial derivatives per channel.
struct RgbSampleGrad {
  Rgb value = Rgb::Zero();
  Rgb d_du = Rgb::Zero();
  Rgb d_dv = Rgb::Zero();
  bool ok = false;
};

RgbSampleGrad sample_rgb_grad(const RgbImage& image, const Eigen::Vector2d& at) {
  RgbSampleGrad g;
  const auto f = bilinear_footprint(image.width(), image.height(), at);
  if (!f.in_bounds) return g;
  const bool two_x = f.ax > 0.0;
  const bool two_y = f.ay > 0.0;
  for (int k = 0; k < f.count(); ++k) {
    int x, y;
    double w;
    f.tap(k, x, y, w);
    const int kx = x - f.x0;
    const int ky = y - f.y0;
    const double wx = kx ? f.ax : 1.0 - f.ax;
    const double wy = ky ? f.ay : 1.0 - f.ay;
    const Rgb& c = image.values(x, y);
    g.value += w * c;
    if (two_x) g.d_du += (kx ? 1.0 : -1.0) * wy * c;
    if (two_y) g.d_dv += (ky ? 1.0 : -1.0) * wx * c;
  }
  g.ok = true;
  return g;
}

void append_footprint(Signature& sig, int width, int height,
                      const Eigen::Vector2d& at) {
  const auto f = bilinear_footprint(width, height, at);
  sig.push_back(f.in_bounds);
  sig.push_back(f.x0);
  sig.push_back(f.y0);
  sig.push_back((f.ax > 0.0) | ((f.ay > 0.0) << 1));
}

// One overlap-depth term; returns false when the correspondence does not
// contribute.
bool ov_term(const CorrespondenceField& field, const DepthMap& depth_dst,
             DepthInterpolation mode, std::size_t i, double& residual,
             Signature* sig) {
  if (!field.mask[i]) {
    if (sig) sig->push_back(-1);
    return false;
  }
  const DepthSample s = sample_depth(depth_dst, field.target_px[i], mode);
  if (sig) append_footprint(*sig, depth_dst.width(), depth_dst.height(),
                            field.target_px[i]);
  if (!s.in_bounds) {
    if (sig) sig->push_back(-2);
    return false;
  }
  residual = s.value - field.warped_depth[i];
  if (sig) sig->push_back(sign_of(residual));
  return true;
}

template <typename Indices>
void ov_accumulate(const CorrespondenceField& field, const DepthMap& depth_dst,
                   DepthInterpolation mode, const Indices& indices,
                   LossSum& out, Signature* sig) {
  for (std::size_t i : indices) {
    double r;
    if (ov_term(field, depth_dst, mode, i, r, sig)) {
      out.sum += std::abs(r);
      ++out.count;
    }
  }
}

// Photometric windows centered inside `centers`. Reads correspondences in
// centers grown by the window half-size.
void photometric_accumulate(const CorrespondenceField& field,
                            const RgbImage& img_src, const RgbImage& img_dst,
                            const SsimParams& params, Rect centers,
                            LossSum& out, Signature* sig) {
  const int w = field.mask.width();
  const int h = field.mask.height();
  const int half = params.window / 2;
  centers = Rect{std::max(centers.x0, half), std::max(centers.y0, half),
                 std::min(centers.x1, w - 1 - half),
                 std::min(centers.y1, h - 1 - half)};
  if (centers.x1 < centers.x0 || centers.y1 < centers.y0) return;
  const Rect reads{centers.x0 - half, centers.y0 - half, centers.x1 + half,
                   centers.y1 + half};
  const int rw = reads.x1 - reads.x0 + 1;
  const int rh = reads.y1 - reads.y0 + 1;
  std::vector<Rgb> warped(static_cast<std::size_t>(rw * rh), Rgb::Zero());
  std::vector<std::uint8_t> support(static_cast<std::size_t>(rw * rh), 0);
  for (int y = reads.y0; y <= reads.y1; ++y) {
    for (int x = reads.x0; x <= reads.x1; ++x) {
      const std::size_t i = field.mask.index(x, y);
      const std::size_t li = static_cast<std::size_t>((y - reads.y0) * rw + (x - reads.x0));
      if (!field.mask[i]) {
        if (sig) sig->push_back(-1);
        continue;
      }
      const RgbSample s = bilinear_sample(img_dst, field.target_px[i]);
      if (sig) append_footprint(*sig, img_dst.width(), img_dst.height(),
                                field.target_px[i]);
      if (!s.in_bounds) continue;
      warped[li] = s.value;
      support[li] = 1;
    }
  }
  const int n = params.window * params.window;
  std::vector<Rgb> a(static_cast<std::size_t>(n));
  std::vector<Rgb> b(static_cast<std::size_t>(n));
  for (int cy = centers.y0; cy <= centers.y1; ++cy) {
    for (int cx = centers.x0; cx <= centers.x1; ++cx) {
      bool full = true;
      int k = 0;
      for (int dy = -half; dy <= half && full; ++dy) {
        for (int dx = -half; dx <= half; ++dx, ++k) {
          const std::size_t li = static_cast<std::size_t>(
              (cy + dy - reads.y0) * rw + (cx + dx - reads.x0));
          if (!support[li]) {
            full = false;
            break;
          }
          a[static_cast<std::size_t>(k)] = img_src.values(cx + dx, cy + dy);
          b[static_cast<std::size_t>(k)] = warped[li];
        }
      }
      if (sig) sig->push_back(full);
      if (!full) continue;
      out.sum += (1.0 - ssim(a, b, params)) / 2.0;
      ++out.count;
    }
  }
}

struct IndexRange {
  std::size_t n;
  struct It {
    std::size_t i;
    std::size_t operator*() const { return i; }
    It& operator++() { ++i; return *this; }
    bool operator!=(const It& o) const { return i != o.i; }
  };
  It begin() const { return {0}; }
  It end() const { return {n}; }
};

void check_pair(const MultiViewBatch& batch, const PairLink& link) {
  if (link.src >= batch.slots.size() || link.dst >= batch.slots.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "pair references a missing slot");
  }
  if (link.src == link.dst) {
    throw Error(ErrorCode::kInvalidSpec, "pair links a slot to itself");
  }
}

CorrespondenceField pair_field(const MultiViewBatch& batch, const PairLink& link,
                               const ConsistOptions& options) {
  const Slot& s = batch.slots[link.src];
  const Slot& d = batch.slots[link.dst];
  return warp_depth(s.camera.intrinsics, d.camera.intrinsics, link.src_to_dst,
                    s.depth, options.warp);
}

double term_scale(double lambda, const LossSum& total, Reduction reduction) {
  if (reduction == Reduction::kSum) return lambda;
  return total.count ? lambda / static_cast<double>(total.count) : 0.0;
}

void pool(const std::vector<PairLoss>& pairs, LossSum& ov, LossSum& p) {
  for (const auto& pl : pairs) {
    ov.sum += pl.ov.sum;
    ov.count += pl.ov.count;
    p.sum += pl.p.sum;
    p.count += pl.p.count;
  }
}

// Derivatives of the target pixel and depth with respect to source depth.
struct WarpDerivative {
  double du = 0.0, dv = 0.0, dz = 0.0;
};

WarpDerivative warp_derivative(const CameraIntrinsics& src,
                               const CameraIntrinsics& dst,
                               const RigidTransform& t, int x, int y,
                               double depth) {
  const Eigen::Vector3d ray((x - src.cx) / src.fx, (y - src.cy) / src.fy, 1.0);
  const Eigen::Vector3d a = t.rotation * ray;
  const Eigen::Vector3d p = a * depth + t.translation;
  const double z2 = p.z() * p.z();
  return {dst.fx * (a.x() * p.z() - p.x() * a.z()) / z2,
          dst.fy * (a.y() * p.z() - p.y() * a.z()) / z2, a.z()};
}

// d SSIM / d b_q for one channel of one window.
void ssim_channel_grad(const std::vector<Rgb>& a, const std::vector<Rgb>& b,
                       int ch, const SsimParams& params, double& value,
                       std::vector<double>& grad) {
  const std::size_t n = a.size();
  const double inv = 1.0 / static_cast<double>(n);
  double ma = 0.0, mb = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    ma += a[k][ch];
    mb += b[k][ch];
  }
  ma *= inv;
  mb *= inv;
  double va = 0.0, vb = 0.0, cov = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double da = a[k][ch] - ma;
    const double db = b[k][ch] - mb;
    va += da * da;
    vb += db * db;
    cov += da * db;
  }
  va *= inv;
  vb *= inv;
  cov *= inv;
  const double n1 = 2.0 * ma * mb + params.c1;
  const double n2 = 2.0 * cov + params.c2;
  const double d1 = ma * ma + mb * mb + params.c1;
  const double d2 = va + vb + params.c2;
  value = (n1 * n2) / (d1 * d2);
  grad.assign(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    const double dn1 = 2.0 * ma * inv;
    const double dn2 = 2.0 * (a[k][ch] - ma) * inv;
    const double dd1 = 2.0 * mb * inv;
    const double dd2 = 2.0 * (b[k][ch] - mb) * inv;
    grad[k] = value * (dn1 / n1 + dn2 / n2 - dd1 / d1 - dd2 / d2);
  }
}

}  // namespace

void LossWeights::validate() const {
  if (!(det >= 0.0 && ov >= 0.0 && p >= 0.0)) {
    throw Error(ErrorCode::kInvalidSpec, "loss weights must be >= 0");
  }
  if (det == 0.0 && ov == 0.0 && p == 0.0) {
    throw Error(ErrorCode::kInvalidSpec, "loss weights are all zero");
  }
}

SsimParams SsimParams::standard(double dynamic_range) {
  SsimParams s;
  s.dynamic_range = dynamic_range;
  s.c1 = (0.01 * dynamic_range) * (0.01 * dynamic_range);
  s.c2 = (0.03 * dynamic_range) * (0.03 * dynamic_range);
  return s;
}

void SsimParams::validate() const {
  if (window < 3 || window % 2 == 0) {
    throw Error(ErrorCode::kInvalidSpec, "SSIM window must be odd and >= 3");
  }
  if (!(c1 > 0.0 && c2 > 0.0)) {
    throw Error(ErrorCode::kInvalidSpec, "SSIM stabilizers must be positive");
  }
}

DepthSample sample_depth(const DepthMap& depth, const Eigen::Vector2d& at,
                         DepthInterpolation mode) {
  if (mode == DepthInterpolation::kLinear) return bilinear_sample(depth, at);
  DepthSample s;
  const auto f = bilinear_footprint(depth.width(), depth.height(), at);
  if (!f.in_bounds) return s;
  double q = 0.0;
  for (int k = 0; k < f.count(); ++k) {
    int x, y;
    double w;
    f.tap(k, x, y, w);
    if (!depth.is_valid(x, y)) return s;
    q += w / depth.values(x, y);
  }
  s.value = f.count() == 1 ? depth.values(f.x0, f.y0) : 1.0 / q;
  s.in_bounds = true;
  return s;
}

double ssim(const std::vector<Rgb>& a, const std::vector<Rgb>& b,
            const SsimParams& params) {
  if (a.size() != b.size() || a.empty()) {
    throw Error(ErrorCode::kDimensionMismatch, "SSIM patch sizes differ");
  }
  const double inv = 1.0 / static_cast<double>(a.size());
  double total = 0.0;
  for (int ch = 0; ch < 3; ++ch) {
    double ma = 0.0, mb = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
      ma += a[k][ch];
      mb += b[k][ch];
    }
    ma *= inv;
    mb *= inv;
    double va = 0.0, vb = 0.0, cov = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
      const double da = a[k][ch] - ma;
      const double db = b[k][ch] - mb;
      va += da * da;
      vb += db * db;
      cov += da * db;
    }
    va *= inv;
    vb *= inv;
    cov *= inv;
    total += ((2.0 * ma * mb + params.c1) * (2.0 * cov + params.c2)) /
             ((ma * ma + mb * mb + params.c1) * (va + vb + params.c2));
  }
  return total / 3.0;
}

LossSum overlap_depth_sum(const CorrespondenceField& field,
                          const DepthMap& depth_dst, DepthInterpolation mode) {
  if (depth_dst.width() != field.target_width ||
      depth_dst.height() != field.target_height) {
    throw Error(ErrorCode::kDimensionMismatch, "target depth vs correspondences");
  }
  LossSum out;
  ov_accumulate(field, depth_dst, mode, IndexRange{field.mask.size()}, out, nullptr);
  return out;
}

std::pair<double, std::size_t> overlap_depth_loss(
    const CorrespondenceField& field, const DepthMap& depth_dst,
    const ConsistOptions& options) {
  const LossSum s = overlap_depth_sum(field, depth_dst, options.interpolation);
  return {s.reduce(options.reduction), s.count};
}

LossSum photometric_sum(const CorrespondenceField& field,
                        const RgbImage& img_src, const RgbImage& img_dst,
                        const SsimParams& params) {
  params.validate();
  require_same_shape(field.mask, img_src.values, "source image vs correspondences");
  if (img_dst.width() != field.target_width ||
      img_dst.height() != field.target_height) {
    throw Error(ErrorCode::kDimensionMismatch, "target image vs correspondences");
  }
  LossSum out;
  photometric_accumulate(field, img_src, img_dst, params,
                         Rect::full(field.mask.width(), field.mask.height()),
                         out, nullptr);
  return out;
}

std::pair<double, std::size_t> photometric_loss(
    const CorrespondenceField& field, const RgbImage& img_src,
    const RgbImage& img_dst, const ConsistOptions& options) {
  const LossSum s = photometric_sum(field, img_src, img_dst, options.ssim);
  return {s.reduce(options.reduction), s.count};
}

void MultiViewBatch::validate() const {
  for (const auto& s : slots) {
    require_matching_view(s.camera, s.depth);
    if (s.image.width() != s.depth.width() || s.image.height() != s.depth.height()) {
      throw Error(ErrorCode::kDimensionMismatch, "image vs depth of " + s.camera.id);
    }
  }
  for (const auto& l : pairs) check_pair(*this, l);
}

void MultiViewBatch::link(std::size_t src, std::size_t dst, std::string label) {
  if (src >= slots.size() || dst >= slots.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "link references a missing slot");
  }
  if (label.empty()) {
    label = slots[src].camera.id + "->" + slots[dst].camera.id;
  }
  pairs.push_back(PairLink{src, dst,
                           relative_transform(slots[src].camera, slots[dst].camera),
                           std::move(label)});
}

std::vector<PairLoss> evaluate_pairs(const MultiViewBatch& batch,
                                     const ConsistOptions& options) {
  batch.validate();
  options.ssim.validate();
  std::vector<PairLoss> out;
  out.reserve(batch.pairs.size());
  for (const auto& link : batch.pairs) {
    const CorrespondenceField field = pair_field(batch, link, options);
    const Slot& s = batch.slots[link.src];
    const Slot& d = batch.slots[link.dst];
    PairLoss pl;
    pl.label = link.label;
    pl.src = link.src;
    pl.dst = link.dst;
    pl.ov = overlap_depth_sum(field, d.depth, options.interpolation);
    pl.p = photometric_sum(field, s.image, d.image, options.ssim);
    out.push_back(std::move(pl));
  }
  return out;
}

LossReport total_loss(double l_det, const std::vector<PairLoss>& pairs,
                      const LossWeights& weights, Reduction reduction) {
  weights.validate();
  if (!(l_det >= 0.0)) throw Error(ErrorCode::kOutOfRange, "l_det must be >= 0");
  LossReport r;
  r.l_det = l_det;
  r.weights = weights;
  r.reduction = reduction;
  r.per_pair = pairs;
  LossSum ov, p;
  pool(pairs, ov, p);
  r.l_ov = ov.reduce(reduction);
  r.l_p = p.reduce(reduction);
  r.total_valid = ov.count;
  r.l_total = weights.det * l_det + weights.ov * r.l_ov + weights.p * r.l_p;
  return r;
}

LossReport evaluate(const MultiViewBatch& batch, const LossWeights& weights,
                    double l_det, const ConsistOptions& options) {
  return total_loss(l_det, evaluate_pairs(batch, options), weights,
                    options.reduction);
}

double consistency_objective(const MultiViewBatch& batch,
                             const LossWeights& weights,
                             const ConsistOptions& options) {
  const auto pairs = evaluate_pairs(batch, options);
  LossSum ov, p;
  pool(pairs, ov, p);
  return weights.ov * ov.reduce(options.reduction) +
         weights.p * p.reduce(options.reduction);
}

std::vector<Raster<double>> loss_gradient(const MultiViewBatch& batch,
                                          const LossWeights& weights,
                                          const ConsistOptions& options) {
  const auto pair_losses = evaluate_pairs(batch, options);
  LossSum ov_total, p_total;
  pool(pair_losses, ov_total, p_total);
  const double k_ov = term_scale(weights.ov, ov_total, options.reduction);
  const double k_p = term_scale(weights.p, p_total, options.reduction);

  std::vector<Raster<double>> grad;
  grad.reserve(batch.slots.size());
  for (const auto& s : batch.slots) {
    grad.emplace_back(s.depth.width(), s.depth.height(), 0.0);
  }

  const int half = options.ssim.window / 2;
  const int n_win = options.ssim.window * options.ssim.window;
  for (const auto& link : batch.pairs) {
    const Slot& src = batch.slots[link.src];
    const Slot& dst = batch.slots[link.dst];
    const auto& ki = src.camera.intrinsics;
    const auto& kj = dst.camera.intrinsics;
    const CorrespondenceField field = pair_field(batch, link, options);
    Raster<double>& g_src = grad[link.src];
    Raster<double>& g_dst = grad[link.dst];
    const int w = field.mask.width();
    const int h = field.mask.height();

    Raster<WarpDerivative> dwarp(w, h);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (field.mask(x, y)) {
          dwarp(x, y) = warp_derivative(ki, kj, link.src_to_dst, x, y,
                                        src.depth.values(x, y));
        }
      }
    }

    if (k_ov != 0.0) {
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          if (!field.mask(x, y)) continue;
          const auto sg = sample_depth_grad(dst.depth, field.target_px(x, y),
                                            options.interpolation);
          if (!sg.ok) continue;
          const double r = sg.value - field.warped_depth(x, y);
          const double c = k_ov * sign_of(r);
          if (c == 0.0) continue;
          const auto& dw = dwarp(x, y);
          g_src(x, y) += c * (sg.d_du * dw.du + sg.d_dv * dw.dv - dw.dz);
          for (int k = 0; k < sg.n; ++k) g_dst(sg.tx[k], sg.ty[k]) += c * sg.d_tap[k];
        }
      }
    }

    if (k_p != 0.0) {
      Raster<RgbSampleGrad> warped(w, h);
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          if (field.mask(x, y)) warped(x, y) = sample_rgb_grad(dst.image, field.target_px(x, y));
        }
      }
      Raster<Rgb> d_loss_d_b(w, h, Rgb::Zero());
      std::vector<Rgb> a(static_cast<std::size_t>(n_win));
      std::vector<Rgb> b(static_cast<std::size_t>(n_win));
      std::vector<double> gch;
      for (int cy = half; cy < h - half; ++cy) {
        for (int cx = half; cx < w - half; ++cx) {
          bool full = true;
          int k = 0;
          for (int dy = -half; dy <= half && full; ++dy) {
            for (int dx = -half; dx <= half; ++dx, ++k) {
              const auto& s = warped(cx + dx, cy + dy);
              if (!field.mask(cx + dx, cy + dy) || !s.ok) {
                full = false;
                break;
              }
              a[static_cast<std::size_t>(k)] = src.image.values(cx + dx, cy + dy);
              b[static_cast<std::size_t>(k)] = s.value;
            }
          }
          if (!full) continue;
          for (int ch = 0; ch < 3; ++ch) {
            double value;
            ssim_channel_grad(a, b, ch, options.ssim, value, gch);
            k = 0;
            for (int dy = -half; dy <= half; ++dy) {
              for (int dx = -half; dx <= half; ++dx, ++k) {
                d_loss_d_b(cx + dx, cy + dy)[ch] +=
                    -k_p / 6.0 * gch[static_cast<std::size_t>(k)];
              }
            }
          }
        }
      }
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          const Rgb& gb = d_loss_d_b(x, y);
          if (gb.isZero(0.0)) continue;
          const auto& s = warped(x, y);
          const auto& dw = dwarp(x, y);
          g_src(x, y) += gb.dot(s.d_du * dw.du + s.d_dv * dw.dv);
        }
      }
    }
  }
  return grad;
}

FdReport finite_difference_check(const MultiViewBatch& batch,
                                 const LossWeights& weights,
                                 const ConsistOptions& options, double eps,
                                 std::size_t samples, std::uint64_t seed) {
  if (samples == 0) throw Error(ErrorCode::kNoSamples, "samples must be >= 1");
  if (!(eps > 0.0)) throw Error(ErrorCode::kInvalidSpec, "eps must be positive");

  const auto analytic = loss_gradient(batch, weights, options);
  const auto pair_losses = evaluate_pairs(batch, options);
  LossSum ov_total, p_total;
  pool(pair_losses, ov_total, p_total);
  const double k_ov = term_scale(weights.ov, ov_total, options.reduction);
  const double k_p = term_scale(weights.p, p_total, options.reduction);

  std::vector<CorrespondenceField> fields;
  fields.reserve(batch.pairs.size());
  for (const auto& link : batch.pairs) fields.push_back(pair_field(batch, link, options));

  // For each pair, the correspondences whose depth footprint touches each
  // target pixel (CSR layout).
  struct Touch {
    std::vector<std::size_t> offsets;
    std::vector<std::size_t> sources;
  };
  std::vector<Touch> touches(batch.pairs.size());
  for (std::size_t pi = 0; pi < batch.pairs.size(); ++pi) {
    const auto& field = fields[pi];
    const int tw = field.target_width;
    const int th = field.target_height;
    std::vector<std::vector<std::size_t>> lists(static_cast<std::size_t>(tw * th));
    for (std::size_t i = 0; i < field.mask.size(); ++i) {
      if (!field.mask[i]) continue;
      const auto f = bilinear_footprint(tw, th, field.target_px[i]);
      if (!f.in_bounds) continue;
      for (int k = 0; k < f.count(); ++k) {
        int x, y;
        double w;
        f.tap(k, x, y, w);
        lists[static_cast<std::size_t>(y * tw + x)].push_back(i);
      }
    }
    auto& t = touches[pi];
    t.offsets.assign(lists.size() + 1, 0);
    for (std::size_t k = 0; k < lists.size(); ++k) {
      t.offsets[k + 1] = t.offsets[k] + lists[k].size();
    }
    t.sources.reserve(t.offsets.back());
    for (const auto& l : lists) t.sources.insert(t.sources.end(), l.begin(), l.end());
  }

  // Candidate pixels: valid, in the correspondence mask of a pair sourced at
  // the slot, with the 8-neighborhood agreeing on every mask involved.
  std::vector<std::pair<std::size_t, std::size_t>> candidates;
  for (std::size_t s = 0; s < batch.slots.size(); ++s) {
    const DepthMap& d = batch.slots[s].depth;
    for (int y = 1; y + 1 < d.height(); ++y) {
      for (int x = 1; x + 1 < d.width(); ++x) {
        if (!d.is_valid(x, y)) continue;
        bool interior = true;
        for (int dy = -1; dy <= 1 && interior; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            if (!d.is_valid(x + dx, y + dy)) {
              interior = false;
              break;
            }
          }
        }
        bool used = false;
        for (std::size_t pi = 0; pi < batch.pairs.size() && interior; ++pi) {
          if (batch.pairs[pi].src != s) continue;
          const Mask& m = fields[pi].mask;
          const std::uint8_t centre = m(x, y);
          used = used || centre;
          for (int dy = -1; dy <= 1 && interior; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
              if (m(x + dx, y + dy) != centre) {
                interior = false;
                break;
              }
            }
          }
        }
        if (!used || !interior) continue;
        candidates.emplace_back(s, d.values.index(x, y));
      }
    }
  }

  FdReport report;
  report.eps = eps;
  // Everything except the candidate filter counts as a boundary skip.
  std::size_t valid_total = 0;
  for (const auto& s : batch.slots) valid_total += s.depth.valid_count();
  report.skipped_boundary = valid_total - candidates.size();

  std::mt19937_64 rng(seed);
  std::shuffle(candidates.begin(), candidates.end(), rng);

  double max_abs_grad = 0.0;
  for (const auto& g : analytic) {
    for (double v : g.data()) max_abs_grad = std::max(max_abs_grad, std::abs(v));
  }
  const double floor = 1e-9 * max_abs_grad;

  std::vector<DepthMap> depths;
  depths.reserve(batch.slots.size());
  for (const auto& s : batch.slots) depths.push_back(s.depth);

  struct Eval {
    LossSum ov, p;
    Signature sig;
  };

  auto evaluate_at = [&](std::size_t slot, int x, int y, double value) {
    Eval e;
    const std::size_t idx = depths[slot].values.index(x, y);
    const double saved = depths[slot].values[idx];
    depths[slot].values[idx] = value;
    for (std::size_t pi = 0; pi < batch.pairs.size(); ++pi) {
      const auto& link = batch.pairs[pi];
      if (link.src == slot) {
        auto& field = fields[pi];
        const Eigen::Vector2d keep_px = field.target_px[idx];
        const double keep_z = field.warped_depth[idx];
        const std::uint8_t keep_m = field.mask[idx];
        const PixelWarp pw = warp_pixel(batch.slots[link.src].camera.intrinsics,
                                        batch.slots[link.dst].camera.intrinsics,
                                        link.src_to_dst, x, y, value);
        field.target_px[idx] = pw.in_front ? pw.target_px : Eigen::Vector2d::Zero();
        field.warped_depth[idx] = pw.in_front ? pw.depth : 0.0;
        field.mask[idx] = pw.in_bounds;
        const std::size_t one[1] = {idx};
        ov_accumulate(field, depths[link.dst], options.interpolation, one, e.ov, &e.sig);
        const int half = options.ssim.window / 2;
        photometric_accumulate(field, batch.slots[link.src].image,
                               batch.slots[link.dst].image, options.ssim,
                               Rect{x - half, y - half, x + half, y + half}, e.p,
                               &e.sig);
        field.target_px[idx] = keep_px;
        field.warped_depth[idx] = keep_z;
        field.mask[idx] = keep_m;
      }
      if (link.dst == slot) {
        const auto& t = touches[pi];
        const auto begin = t.sources.begin() + static_cast<long>(t.offsets[idx]);
        const auto end = t.sources.begin() + static_cast<long>(t.offsets[idx + 1]);
        const std::vector<std::size_t> list(begin, end);
        ov_accumulate(fields[pi], depths[slot], options.interpolation, list, e.ov, &e.sig);
      }
    }
    depths[slot].values[idx] = saved;
    return e;
  };

  double rel_sum = 0.0;
  for (const auto& [slot, idx] : candidates) {
    if (report.entries.size() >= samples) break;
    const int w = batch.slots[slot].depth.width();
    const int x = static_cast<int>(idx % static_cast<std::size_t>(w));
    const int y = static_cast<int>(idx / static_cast<std::size_t>(w));
    const double d = batch.slots[slot].depth.values[idx];
    const Eval plus = evaluate_at(slot, x, y, d + eps);
    const Eval minus = evaluate_at(slot, x, y, d - eps);
    if (plus.sig != minus.sig || plus.ov.count != minus.ov.count ||
        plus.p.count != minus.p.count) {
      ++report.skipped_nonsmooth;
      continue;
    }
    FdEntry entry;
    entry.slot = slot;
    entry.x = x;
    entry.y = y;
    entry.analytic = analytic[slot][idx];
    entry.numeric = k_ov * (plus.ov.sum - minus.ov.sum) / (2.0 * eps) +
                    k_p * (plus.p.sum - minus.p.sum) / (2.0 * eps);
    const double scale = std::max(std::abs(entry.analytic), std::abs(entry.numeric));
    entry.rel_err = scale > floor ? std::abs(entry.analytic - entry.numeric) / scale : 0.0;
    rel_sum += entry.rel_err;
    if (report.entries.empty() || entry.rel_err > report.max_rel_err) {
      report.max_rel_err = entry.rel_err;
      report.worst = entry;
    }
    report.entries.push_back(entry);
  }
  if (report.entries.empty()) {
    throw Error(ErrorCode::kNoSamples, "no differentiable pixels to check");
  }
  report.mean_rel_err = rel_sum / static_cast<double>(report.entries.size());
  return report;
}

}  // namespace mvgc
