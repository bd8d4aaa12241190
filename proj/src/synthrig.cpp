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

#include "mvgc/synthrig.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <random>
#include <sstream>

#include <Eigen/Geometry>

#include "mvgc/error.hpp"
#include "mvgc/parallel.hpp"

namespace mvgc {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kHitEps = 1e-9;

Eigen::Matrix3d yaw_matrix(double yaw) {
  return Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()).toRotationMatrix();
}

double heading_of(const RigidTransform& pose) {
  return std::atan2(pose.rotation(1, 0), pose.rotation(0, 0));
}

bool inside_box(const BoxObject& b, const Eigen::Vector3d& p, double margin) {
  const Eigen::Vector3d q = yaw_matrix(-b.yaw) * (p - b.center);
  return std::abs(q.x()) < b.l / 2 + margin && std::abs(q.y()) < b.w / 2 + margin &&
         std::abs(q.z()) < b.h / 2 + margin;
}

bool inside_sphere(const SphereObject& s, const Eigen::Vector3d& p, double margin) {
  return (p - s.center).norm() < s.radius + margin;
}

double footprint_radius(const BoxObject& b) { return 0.5 * std::hypot(b.l, b.w); }

void check_albedo(const Rgb& a, const char* what) {
  if (!(a.minCoeff() >= 0.0 && a.maxCoeff() <= 1.0)) {
    throw Error(ErrorCode::kInvalidScene, std::string(what) + " albedo outside [0, 1]");
  }
}

}  // namespace

void SceneSpec::validate() const {
  if (frames < 1) throw Error(ErrorCode::kInvalidScene, "frames must be >= 1");
  if (static_cast<int>(trajectory.size()) != frames) {
    throw Error(ErrorCode::kInvalidScene, "trajectory needs one pose per frame");
  }
  for (const auto& t : trajectory) {
    try {
      t.validate();
    } catch (const Error& e) {
      throw Error(ErrorCode::kInvalidScene, std::string("trajectory: ") + e.what());
    }
  }
  if (std::abs(light.norm() - 1.0) > 1e-9) {
    throw Error(ErrorCode::kInvalidScene, "light direction must be a unit vector");
  }
  if (!(ambient >= 0.0 && ambient <= 1.0)) {
    throw Error(ErrorCode::kInvalidScene, "ambient must lie in [0, 1]");
  }
  if (!(max_depth > 0.0)) throw Error(ErrorCode::kInvalidScene, "max_depth must be > 0");
  check_albedo(ground.albedo, "ground");
  check_albedo(sky, "sky");
  if (!(ground.texture_wavelength > 0.0) || !(std::abs(ground.texture_amplitude) <= 1.0)) {
    throw Error(ErrorCode::kInvalidScene, "bad ground texture");
  }
  const double peak = ground.albedo.maxCoeff() * (1.0 + std::abs(ground.texture_amplitude));
  if (peak > 1.0) throw Error(ErrorCode::kInvalidScene, "textured ground albedo exceeds 1");
  for (const auto& b : boxes) {
    if (!(b.l > 0 && b.w > 0 && b.h > 0)) {
      throw Error(ErrorCode::kInvalidScene, "box sizes must be positive");
    }
    check_albedo(b.albedo, "box");
  }
  for (const auto& s : spheres) {
    if (!(s.radius > 0)) throw Error(ErrorCode::kInvalidScene, "sphere radius must be > 0");
    check_albedo(s.albedo, "sphere");
  }
}

void SceneSpec::validate(const CameraRig& rig) const {
  validate();
  rig.validate();
  for (int f = 0; f < frames; ++f) {
    for (const auto& v : rig.views) {
      const Eigen::Vector3d c = view_in_world(v, trajectory[static_cast<std::size_t>(f)]).center();
      if (c.z() <= 0.0) {
        throw Error(ErrorCode::kInvalidScene, "camera " + v.id + " below the ground");
      }
      for (const auto& b : boxes) {
        if (inside_box(b, c, 0.05)) {
          throw Error(ErrorCode::kInvalidScene, "camera " + v.id + " inside box " + b.id);
        }
      }
      for (const auto& s : spheres) {
        if (inside_sphere(s, c, 0.05)) {
          throw Error(ErrorCode::kInvalidScene, "camera " + v.id + " inside a sphere");
        }
      }
    }
  }
}

std::vector<RigidTransform> straight_trajectory(int frames, double step) {
  std::vector<RigidTransform> out;
  for (int f = 0; f < frames; ++f) {
    RigidTransform t;
    t.translation = Eigen::Vector3d(step * f, 0.0, 0.0);
    out.push_back(t);
  }
  return out;
}

SceneSpec random_scene(std::uint64_t seed, const SceneGenOptions& options) {
  if (options.frames < 1) throw Error(ErrorCode::kInvalidScene, "frames must be >= 1");
  if (options.boxes < 0 || options.spheres < 0) {
    throw Error(ErrorCode::kInvalidScene, "object counts must be >= 0");
  }
  SceneSpec spec;
  spec.seed = seed;
  spec.frames = options.frames;
  spec.trajectory = straight_trajectory(options.frames, options.step);

  std::mt19937_64 rng(seed);
  auto uni = [&](double a, double b) {
    return std::uniform_real_distribution<double>(a, b)(rng);
  };
  auto random_albedo = [&] { return Rgb(uni(0.2, 0.9), uni(0.2, 0.9), uni(0.2, 0.9)); };
  spec.ground.rotation = uni(-kPi, kPi);
  spec.ground.phase = Eigen::Vector2d(uni(0.0, 2.0 * kPi), uni(0.0, 2.0 * kPi));

  struct Disk {
    Eigen::Vector2d c;
    double r;
  };
  std::vector<Disk> taken;
  auto clear = [&](const Eigen::Vector2d& c, double r) {
    for (const auto& pose : spec.trajectory) {
      if ((c - pose.translation.head<2>()).norm() < r + options.clearance) return false;
    }
    for (const auto& d : taken) {
      if ((c - d.c).norm() < r + d.r + 0.3) return false;
    }
    return true;
  };
  // Placement is centered on the middle of the path so every frame sees
  // objects all around.
  const Eigen::Vector2d mid = 0.5 * (spec.trajectory.front().translation +
                                     spec.trajectory.back().translation).head<2>();

  constexpr int kAttempts = 2000;
  for (int i = 0, tries = 0; i < options.boxes && tries < kAttempts; ++tries) {
    BoxObject b;
    b.l = uni(3.9, 4.9);
    b.w = uni(1.7, 2.0);
    b.h = uni(1.4, 1.8);
    b.yaw = uni(-kPi, kPi);
    const double r = uni(6.0, 25.0);
    const double a = uni(-kPi, kPi);
    const Eigen::Vector2d c = mid + r * Eigen::Vector2d(std::cos(a), std::sin(a));
    b.albedo = random_albedo();
    if (!clear(c, footprint_radius(b))) continue;
    b.center = Eigen::Vector3d(c.x(), c.y(), b.h / 2);
    b.id = "box" + std::to_string(i);
    taken.push_back({c, footprint_radius(b)});
    spec.boxes.push_back(b);
    ++i;
  }
  for (int i = 0, tries = 0; i < options.spheres && tries < kAttempts; ++tries) {
    SphereObject s;
    s.radius = uni(0.5, 1.2);
    const double r = uni(5.0, 20.0);
    const double a = uni(-kPi, kPi);
    const Eigen::Vector2d c = mid + r * Eigen::Vector2d(std::cos(a), std::sin(a));
    const double lift = uni(0.1, 1.0);
    s.albedo = random_albedo();
    if (!clear(c, s.radius)) continue;
    s.center = Eigen::Vector3d(c.x(), c.y(), s.radius + lift);
    taken.push_back({c, s.radius});
    spec.spheres.push_back(s);
    ++i;
  }
  if (static_cast<int>(spec.boxes.size()) != options.boxes ||
      static_cast<int>(spec.spheres.size()) != options.spheres) {
    throw Error(ErrorCode::kInvalidScene, "could not place all objects without overlap");
  }
  return spec;
}

RayHit cast_ray(const SceneSpec& spec, const Eigen::Vector3d& origin,
                const Eigen::Vector3d& dir) {
  RayHit best;
  best.t = std::numeric_limits<double>::infinity();

  if (dir.z() < 0.0 && origin.z() > 0.0) {
    const double t = -origin.z() / dir.z();
    if (t > kHitEps) {
      best.hit = true;
      best.t = t;
      best.surface = kSurfaceGround;
      best.normal = Eigen::Vector3d::UnitZ();
    }
  }

  for (std::size_t bi = 0; bi < spec.boxes.size(); ++bi) {
    const BoxObject& b = spec.boxes[bi];
    const Eigen::Matrix3d to_local = yaw_matrix(-b.yaw);
    const Eigen::Vector3d o = to_local * (origin - b.center);
    const Eigen::Vector3d d = to_local * dir;
    const Eigen::Vector3d half(b.l / 2, b.w / 2, b.h / 2);
    double t_near = -std::numeric_limits<double>::infinity();
    double t_far = std::numeric_limits<double>::infinity();
    int axis = -1;
    bool miss = false;
    for (int k = 0; k < 3; ++k) {
      if (d[k] == 0.0) {
        if (std::abs(o[k]) > half[k]) {
          miss = true;
          break;
        }
        continue;
      }
      double t0 = (-half[k] - o[k]) / d[k];
      double t1 = (half[k] - o[k]) / d[k];
      if (t0 > t1) std::swap(t0, t1);
      if (t0 > t_near) {
        t_near = t0;
        axis = k;
      }
      t_far = std::min(t_far, t1);
    }
    if (miss || axis < 0 || t_near > t_far || t_near <= kHitEps || t_near >= best.t) continue;
    Eigen::Vector3d n = Eigen::Vector3d::Zero();
    n[axis] = d[axis] > 0.0 ? -1.0 : 1.0;
    best.hit = true;
    best.t = t_near;
    best.surface = 2 + 6 * static_cast<int>(bi) + 2 * axis + (d[axis] > 0.0 ? 0 : 1);
    best.normal = yaw_matrix(b.yaw) * n;
    best.albedo = b.albedo;
  }

  const int sphere_base = 2 + 6 * static_cast<int>(spec.boxes.size());
  for (std::size_t si = 0; si < spec.spheres.size(); ++si) {
    const SphereObject& s = spec.spheres[si];
    const Eigen::Vector3d oc = origin - s.center;
    const double a = dir.squaredNorm();
    const double hb = dir.dot(oc);
    const double c = oc.squaredNorm() - s.radius * s.radius;
    const double disc = hb * hb - a * c;
    if (disc < 0.0) continue;
    const double root = std::sqrt(disc);
    double t = (-hb - root) / a;
    if (t <= kHitEps) t = (-hb + root) / a;
    if (t <= kHitEps || t >= best.t) continue;
    best.hit = true;
    best.t = t;
    best.surface = sphere_base + static_cast<int>(si);
    best.normal = (origin + t * dir - s.center) / s.radius;
    best.albedo = s.albedo;
  }

  if (!best.hit) {
    best.t = 0.0;
    return best;
  }
  best.point = origin + best.t * dir;
  if (best.surface == kSurfaceGround) {
    const double k = 2.0 * kPi / spec.ground.texture_wavelength;
    const double c = std::cos(spec.ground.rotation);
    const double s = std::sin(spec.ground.rotation);
    const double u = c * best.point.x() + s * best.point.y();
    const double v = -s * best.point.x() + c * best.point.y();
    const double m = 1.0 + spec.ground.texture_amplitude *
                               std::sin(k * u + spec.ground.phase.x()) *
                               std::sin(k * v + spec.ground.phase.y());
    best.albedo = spec.ground.albedo * m;
  }
  return best;
}

Rgb shade(const SceneSpec& spec, const RayHit& hit) {
  if (!hit.hit) return spec.sky;
  const double lambert = std::max(0.0, hit.normal.dot(spec.light));
  return (hit.albedo * lambert + Rgb::Constant(spec.ambient)).cwiseMin(1.0).cwiseMax(0.0);
}

ViewRender render_view(const SceneSpec& spec, const CameraView& world_view) {
  const auto& k = world_view.intrinsics;
  k.validate();
  ViewRender out;
  out.depth = DepthMap(k.width, k.height);
  out.image = RgbImage(k.width, k.height);
  out.surface = Raster<int>(k.width, k.height, kSurfaceSky);
  const Eigen::Matrix3d& r = world_view.extrinsics.rotation;
  const Eigen::Vector3d origin = world_view.center();
  parallel_rows(k.height, [&](int y) {
    for (int x = 0; x < k.width; ++x) {
      const Eigen::Vector3d ray((x - k.cx) / k.fx, (y - k.cy) / k.fy, 1.0);
      const RayHit hit = cast_ray(spec, origin, r * ray);
      out.image.values(x, y) = shade(spec, hit);
      out.surface(x, y) = hit.surface;
      if (hit.hit) {
        out.depth.values(x, y) = hit.t;
        out.depth.valid(x, y) = hit.t <= spec.max_depth;
      }
    }
  });
  // Silhouette and crease pixels stay exact in value but are masked out so
  // no bilinear footprint straddles two surfaces.
  Mask edge(k.width, k.height, 0);
  for (int y = 0; y < k.height; ++y) {
    for (int x = 0; x < k.width; ++x) {
      const int s = out.surface(x, y);
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (out.surface.contains(x + dx, y + dy) && out.surface(x + dx, y + dy) != s) {
            edge(x, y) = 1;
          }
        }
      }
    }
  }
  for (std::size_t i = 0; i < edge.size(); ++i) {
    if (edge[i]) out.depth.valid[i] = 0;
  }
  return out;
}

std::vector<Box3D> boxes_in_ego(const SceneSpec& spec, int frame) {
  if (frame < 0 || frame >= spec.frames ||
      frame >= static_cast<int>(spec.trajectory.size())) {
    throw Error(ErrorCode::kInvalidScene, "frame out of range");
  }
  const RigidTransform& pose = spec.trajectory[static_cast<std::size_t>(frame)];
  const RigidTransform inv = pose.inverse();
  const double heading = heading_of(pose);
  std::vector<Box3D> out;
  for (const auto& b : spec.boxes) {
    const Eigen::Vector3d c = inv.apply(b.center);
    Box3D box;
    box.cx = c.x();
    box.cy = c.y();
    box.cz = c.z();
    box.l = b.l;
    box.w = b.w;
    box.h = b.h;
    box.yaw = wrap_angle(b.yaw - heading);
    box.cls = b.cls;
    box.id = b.id;
    out.push_back(box);
  }
  return out;
}

std::vector<FrameBundle> render_scene(const CameraRig& rig, const SceneSpec& spec) {
  spec.validate(rig);
  std::vector<FrameBundle> out;
  for (int f = 0; f < spec.frames; ++f) {
    FrameBundle fb;
    fb.frame = f;
    fb.ego_pose = spec.trajectory[static_cast<std::size_t>(f)];
    for (const auto& v : rig.views) {
      fb.views.push_back(render_view(spec, view_in_world(v, fb.ego_pose)));
    }
    fb.boxes = boxes_in_ego(spec, f);
    out.push_back(std::move(fb));
  }
  return out;
}

ShiftPair make_shift_pair(const CameraRig& rig, const SceneSpec& spec,
                          const ShiftSpec& shift) {
  ShiftPair out;
  out.source_rig = rig;
  out.target_rig = perturb_rig(rig, shift);
  out.source = render_scene(out.source_rig, spec);
  out.target = render_scene(out.target_rig, spec);
  return out;
}

MultiViewBatch make_batch(const CameraRig& rig, const SceneSpec& spec,
                          const std::vector<FrameBundle>& bundles,
                          const std::vector<ViewPair>& pairs) {
  MultiViewBatch batch;
  for (const auto& fb : bundles) {
    if (fb.views.size() != rig.views.size()) {
      throw Error(ErrorCode::kDimensionMismatch, "bundle does not match the rig");
    }
    for (std::size_t v = 0; v < rig.views.size(); ++v) {
      Slot s;
      s.camera = view_in_world(rig.views[v], spec.trajectory.at(static_cast<std::size_t>(fb.frame)));
      s.camera.id = rig.views[v].id + "@" + std::to_string(fb.frame);
      s.depth = fb.views[v].depth;
      s.image = fb.views[v].image;
      batch.slots.push_back(std::move(s));
    }
  }
  const int frames = static_cast<int>(bundles.size());
  for (const auto& p : pairs) {
    if (p.frame_i < 0 || p.frame_j < 0 || p.frame_i >= frames || p.frame_j >= frames) {
      throw Error(ErrorCode::kDimensionMismatch, "pair references a missing frame");
    }
    batch.link(slot_index(rig, p.frame_i, p.view_i), slot_index(rig, p.frame_j, p.view_j));
  }
  return batch;
}

void modulate_depths(MultiViewBatch& batch, double amplitude) {
  for (auto& slot : batch.slots) {
    auto& d = slot.depth;
    for (int y = 0; y < d.height(); ++y) {
      for (int x = 0; x < d.width(); ++x) {
        if (!d.is_valid(x, y)) continue;
        d.values(x, y) *= 1.0 + amplitude * std::sin(0.11 * x + 0.7) * std::cos(0.17 * y + 0.3);
      }
    }
  }
}

double shift_magnitude(const ShiftSpec& s) {
  switch (s.mode) {
    case ShiftMode::kHeight:
      return std::abs(s.dz);
    case ShiftMode::kPitch:
      return std::abs(s.dpitch);
    default:
      return std::sqrt(s.dx * s.dx + s.dy * s.dy + s.dz * s.dz + s.dpitch * s.dpitch +
                       s.dyaw * s.dyaw);
  }
}

ShiftStudy shift_study(const CameraRig& rig, const SceneSpec& spec,
                       const std::vector<ShiftSpec>& shifts,
                       const LossWeights& weights, const ConsistOptions& options,
                       int temporal_window) {
  weights.validate();
  const auto zero = std::find_if(shifts.begin(), shifts.end(),
                                 [](const ShiftSpec& s) { return s.is_zero(); });
  if (zero == shifts.end()) {
    throw Error(ErrorCode::kInvalidShift, "shift study needs the zero shift");
  }
  const auto pairs = enumerate_pairs(rig, spec.frames, temporal_window);
  ShiftStudy study;
  for (const auto& shift : shifts) {
    shift.validate();
    const CameraRig target_rig = perturb_rig(rig, shift);
    const auto target = render_scene(target_rig, spec);
    MultiViewBatch batch = make_batch(target_rig, spec, target, pairs);
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      const ViewPair& p = pairs[k];
      const CameraView src = view_in_world(
          rig.views[p.view_i], spec.trajectory[static_cast<std::size_t>(p.frame_i)]);
      batch.pairs[k].src_to_dst =
          relative_transform(src, batch.slots[batch.pairs[k].dst].camera);
    }
    ShiftRow row;
    row.shift = shift;
    row.magnitude = shift_magnitude(shift);
    row.report = evaluate(batch, weights, 0.0, options);
    study.rows.push_back(std::move(row));
  }

  double base = 0.0;
  for (const auto& r : study.rows) {
    if (r.shift.is_zero()) base = r.report.l_ov;
  }
  std::map<ShiftMode, std::vector<const ShiftRow*>> by_mode;
  for (const auto& r : study.rows) {
    if (!r.shift.is_zero()) by_mode[r.shift.mode].push_back(&r);
  }
  bool ok = true;
  std::ostringstream why;
  for (auto& [mode, rows] : by_mode) {
    std::stable_sort(rows.begin(), rows.end(), [](const ShiftRow* a, const ShiftRow* b) {
      return a->magnitude < b->magnitude;
    });
    double prev = base;
    double prev_mag = 0.0;
    for (const ShiftRow* r : rows) {
      const bool grows = r->report.l_ov > (r->magnitude > prev_mag ? prev : base);
      if (!grows) {
        ok = false;
        why << " " << to_string(mode) << "@" << r->magnitude << " does not exceed the previous row;";
      }
      prev = r->report.l_ov;
      prev_mag = r->magnitude;
    }
  }
  study.monotone = ok;
  study.verdict = std::string("monotone: ") + (ok ? "true" : "false") + why.str();
  return study;
}

std::string ShiftStudy::csv() const {
  std::ostringstream out;
  out << "# l_ov/l_p on shifted-target rasters warped with source extrinsics;"
         " detector metrics are not computed\n";
  out << "mode,dx,dy,dz,dpitch_deg,dyaw_deg,magnitude,l_ov,l_p,valid\n";
  out << std::setprecision(10);
  const double deg = 180.0 / kPi;
  for (const auto& r : rows) {
    out << to_string(r.shift.mode) << ',' << r.shift.dx << ',' << r.shift.dy << ','
        << r.shift.dz << ',' << r.shift.dpitch * deg << ',' << r.shift.dyaw * deg << ','
        << r.magnitude << ',' << r.report.l_ov << ',' << r.report.l_p << ','
        << r.report.total_valid << '\n';
  }
  out << "# " << verdict << '\n';
  return out.str();
}

}  // namespace mvgc
