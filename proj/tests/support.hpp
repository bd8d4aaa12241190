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

// Shared scene fixtures for the test binaries.
#pragma once

#include "mvgc/synthrig.hpp"

namespace mvgc::testing {

inline SceneGenOptions ground_only(int frames = 2) {
  SceneGenOptions o;
  o.frames = frames;
  o.boxes = 0;
  o.spheres = 0;
  return o;
}

struct SceneBatch {
  CameraRig rig;
  SceneSpec spec;
  std::vector<FrameBundle> bundles;
  std::vector<ViewPair> pairs;
  MultiViewBatch batch;
};

inline SceneBatch scene_batch(std::uint64_t seed, const SceneGenOptions& opt,
                              int window = 1, const char* preset = "nuscenes6") {
  SceneBatch s;
  s.rig = make_preset_rig(preset);
  s.spec = random_scene(seed, opt);
  s.bundles = render_scene(s.rig, s.spec);
  s.pairs = enumerate_pairs(s.rig, opt.frames, window);
  s.batch = make_batch(s.rig, s.spec, s.bundles, s.pairs);
  return s;
}

// Two slots sharing one camera; depth_i = depth_j + delta on every pixel.
inline MultiViewBatch same_pose_pair(double base, double delta, int w = 24, int h = 18) {
  CameraView cam;
  cam.id = "cam";
  cam.intrinsics = {20.0, 20.0, (w - 1) / 2.0, (h - 1) / 2.0, w, h};
  cam.extrinsics = camera_pose({0, 0, 1.5}, 0.0, 0.0);
  MultiViewBatch b;
  Slot dst{cam, DepthMap(w, h), RgbImage(w, h)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      dst.depth.values(x, y) = base + 0.05 * x + 0.02 * y;
      dst.depth.valid(x, y) = 1;
      dst.image.values(x, y) = Rgb(0.3 + 0.02 * x, 0.5, 0.2 + 0.03 * y);
    }
  }
  Slot src = dst;
  src.camera.id = "cam_src";
  for (auto& v : src.depth.values.data()) v += delta;
  b.slots = {src, dst};
  b.link(0, 1);
  return b;
}

}  // namespace mvgc::testing
