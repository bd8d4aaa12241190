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

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "mvgc/adapter.hpp"
#include "mvgc/camgeom.hpp"
#include "mvgc/consist.hpp"
#include "mvgc/evalkit.hpp"
#include "mvgc/synthrig.hpp"
#include "mvgc/warp.hpp"

namespace mvgc {

using json = nlohmann::json;

// Raster files. PFM: "Pf", width height, scale -1.0 (little endian),
// float32 rows bottom to top. PGM masks are P5, 255 = valid. PPM is P6 with
// maxval 255, decoded linearly to [0, 1].
void write_pfm(const std::filesystem::path& path, const Raster<double>& r);
Raster<double> read_pfm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const Mask& m);
Mask read_pgm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const RgbImage& img);
RgbImage read_ppm(const std::filesystem::path& path);

// Depth map as `<stem>.pfm` plus the validity mask `<mask>`.
void write_depth(const std::filesystem::path& pfm, const std::filesystem::path& pgm,
                 const DepthMap& d);
DepthMap read_depth(const std::filesystem::path& pfm, const std::filesystem::path& pgm);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);
json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const json& j);

// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

void to_json(json& j, const CameraIntrinsics& k);
void from_json(const json& j, CameraIntrinsics& k);
void to_json(json& j, const RigidTransform& t);
void from_json(const json& j, RigidTransform& t);
void to_json(json& j, const CameraView& v);
void from_json(const json& j, CameraView& v);
void to_json(json& j, const CameraRig& r);
void from_json(const json& j, CameraRig& r);
void to_json(json& j, const ShiftSpec& s);
void from_json(const json& j, ShiftSpec& s);
void to_json(json& j, const Box3D& b);
void from_json(const json& j, Box3D& b);
void to_json(json& j, const MetricBundle& m);
void to_json(json& j, const BoxObject& b);
void from_json(const json& j, BoxObject& b);
void to_json(json& j, const SphereObject& s);
void from_json(const json& j, SphereObject& s);
void to_json(json& j, const SceneSpec& s);
void from_json(const json& j, SceneSpec& s);
void to_json(json& j, const LossReport& r);
void to_json(json& j, const FdReport& r);
void to_json(json& j, const AdapterSpec& s);
void from_json(const json& j, AdapterSpec& s);
void to_json(json& j, const ParamTensor& t);
void from_json(const json& j, ParamTensor& t);
void to_json(json& j, const AdapterState& s);
void from_json(const json& j, AdapterState& s);
void to_json(json& j, const LedaReport& r);

// Parses JSON into T, mapping structural errors to kParse.
template <typename T>
T parse_as(const json& j, const char* what) {
  try {
    return j.get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string(what) + ": " + e.what());
  }
}

// Rig file with validation (kInvalidRig on bad content).
CameraRig load_rig(const std::filesystem::path& path);

// slot,x,y,analytic,numeric,rel_err
std::string fd_report_csv(const FdReport& r);

}  // namespace mvgc
