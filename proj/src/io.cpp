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

#include "mvgc/io.hpp"

#include <openssl/evp.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

#include "mvgc/error.hpp"

namespace mvgc {

namespace fs = std::filesystem;

namespace {

std::string read_binary(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_binary(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIo, "short write to " + path.string());
}

// Netpbm-style header: whitespace separated tokens, '#' comments, then a
// single whitespace byte before the payload.
struct HeaderReader {
  const std::string& bytes;
  std::size_t pos = 0;
  std::string where;

  std::string token() {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    if (start == pos) throw Error(ErrorCode::kParse, where + ": truncated header");
    return bytes.substr(start, pos - start);
  }

  int integer() {
    const std::string t = token();
    try {
      std::size_t used = 0;
      const int v = std::stoi(t, &used);
      if (used != t.size() || v < 0) throw std::invalid_argument(t);
      return v;
    } catch (const std::exception&) {
      throw Error(ErrorCode::kParse, where + ": bad header field '" + t + "'");
    }
  }

  std::size_t payload(std::size_t need) {
    if (pos >= bytes.size()) throw Error(ErrorCode::kParse, where + ": missing payload");
    ++pos;  // the single separator byte
    if (bytes.size() - pos < need) throw Error(ErrorCode::kParse, where + ": truncated payload");
    return pos;
  }
};

bool host_little_endian() {
  const std::uint16_t probe = 1;
  std::uint8_t first;
  std::memcpy(&first, &probe, 1);
  return first == 1;
}

std::string pnm_header(const char* magic, int w, int h, const char* tail) {
  return std::string(magic) + "\n" + std::to_string(w) + " " + std::to_string(h) + "\n" + tail + "\n";
}

}  // namespace

void write_pfm(const fs::path& path, const Raster<double>& r) {
  std::string out = pnm_header("Pf", r.width(), r.height(), "-1.0");
  const bool swap = !host_little_endian();
  for (int y = r.height() - 1; y >= 0; --y) {
    for (int x = 0; x < r.width(); ++x) {
      const float f = static_cast<float>(r(x, y));
      char b[4];
      std::memcpy(b, &f, 4);
      if (swap) std::swap(b[0], b[3]), std::swap(b[1], b[2]);
      out.append(b, 4);
    }
  }
  write_binary(path, out);
}

Raster<double> read_pfm(const fs::path& path) {
  const std::string bytes = read_binary(path);
  HeaderReader hr{bytes, 0, path.string()};
  if (hr.token() != "Pf") throw Error(ErrorCode::kParse, path.string() + ": not a grayscale PFM");
  const int w = hr.integer();
  const int h = hr.integer();
  double scale;
  try {
    scale = std::stod(hr.token());
  } catch (const std::exception&) {
    throw Error(ErrorCode::kParse, path.string() + ": bad PFM scale");
  }
  if (scale == 0.0) throw Error(ErrorCode::kParse, path.string() + ": zero PFM scale");
  const std::size_t start = hr.payload(static_cast<std::size_t>(w) * h * 4);
  const bool swap = (scale < 0.0) != host_little_endian();
  Raster<double> r(w, h);
  std::size_t p = start;
  for (int y = h - 1; y >= 0; --y) {
    for (int x = 0; x < w; ++x, p += 4) {
      char b[4];
      std::memcpy(b, bytes.data() + p, 4);
      if (swap) std::swap(b[0], b[3]), std::swap(b[1], b[2]);
      float f;
      std::memcpy(&f, b, 4);
      r(x, y) = f;
    }
  }
  return r;
}

void write_pgm(const fs::path& path, const Mask& m) {
  std::string out = pnm_header("P5", m.width(), m.height(), "255");
  for (std::size_t i = 0; i < m.size(); ++i) out.push_back(static_cast<char>(m[i] ? 255 : 0));
  write_binary(path, out);
}

Mask read_pgm(const fs::path& path) {
  const std::string bytes = read_binary(path);
  HeaderReader hr{bytes, 0, path.string()};
  if (hr.token() != "P5") throw Error(ErrorCode::kParse, path.string() + ": not a binary PGM");
  const int w = hr.integer();
  const int h = hr.integer();
  if (hr.integer() != 255) throw Error(ErrorCode::kParse, path.string() + ": maxval must be 255");
  const std::size_t start = hr.payload(static_cast<std::size_t>(w) * h);
  Mask m(w, h);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = static_cast<unsigned char>(bytes[start + i]) >= 128;
  return m;
}

void write_ppm(const fs::path& path, const RgbImage& img) {
  std::string out = pnm_header("P6", img.width(), img.height(), "255");
  for (const Rgb& c : img.values.data()) {
    for (int k = 0; k < 3; ++k) {
      out.push_back(static_cast<char>(std::lround(std::clamp(c[k], 0.0, 1.0) * 255.0)));
    }
  }
  write_binary(path, out);
}

RgbImage read_ppm(const fs::path& path) {
  const std::string bytes = read_binary(path);
  HeaderReader hr{bytes, 0, path.string()};
  if (hr.token() != "P6") throw Error(ErrorCode::kParse, path.string() + ": not a binary PPM");
  const int w = hr.integer();
  const int h = hr.integer();
  if (hr.integer() != 255) throw Error(ErrorCode::kParse, path.string() + ": maxval must be 255");
  const std::size_t start = hr.payload(static_cast<std::size_t>(w) * h * 3);
  RgbImage img(w, h);
  for (std::size_t i = 0; i < img.values.size(); ++i) {
    for (int k = 0; k < 3; ++k) {
      img.values[i][k] = static_cast<unsigned char>(bytes[start + 3 * i + static_cast<std::size_t>(k)]) / 255.0;
    }
  }
  return img;
}

void write_depth(const fs::path& pfm, const fs::path& pgm, const DepthMap& d) {
  write_pfm(pfm, d.values);
  write_pgm(pgm, d.valid);
}

DepthMap read_depth(const fs::path& pfm, const fs::path& pgm) {
  DepthMap d;
  d.values = read_pfm(pfm);
  d.valid = read_pgm(pgm);
  d.validate();
  return d;
}

std::string read_text(const fs::path& path) { return read_binary(path); }
void write_text(const fs::path& path, const std::string& text) { write_binary(path, text); }

json read_json(const fs::path& path) {
  const std::string text = read_binary(path);
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) { write_binary(path, j.dump(2) + "\n"); }

std::string sha256_file(const fs::path& path) {
  const std::string bytes = read_binary(path);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::kIo, "SHA-256 failed for " + path.string());
  }
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return hex.str();
}

// --- JSON --------------------------------------------------------------

namespace {

json vec3(const Eigen::Vector3d& v) { return {v.x(), v.y(), v.z()}; }

Eigen::Vector3d vec3(const json& j) {
  if (!j.is_array() || j.size() != 3) throw Error(ErrorCode::kParse, "expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

ShiftMode mode_or_throw(const std::string& s) {
  try {
    return parse_shift_mode(s);
  } catch (const Error& e) {
    throw Error(ErrorCode::kParse, e.what());
  }
}

}  // namespace

void to_json(json& j, const CameraIntrinsics& k) {
  j = {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}, {"width", k.width}, {"height", k.height}};
}

void from_json(const json& j, CameraIntrinsics& k) {
  k.fx = j.at("fx").get<double>();
  k.fy = j.at("fy").get<double>();
  k.cx = j.at("cx").get<double>();
  k.cy = j.at("cy").get<double>();
  k.width = j.at("width").get<int>();
  k.height = j.at("height").get<int>();
}

// Rotation as 9 row-major floats.
void to_json(json& j, const RigidTransform& t) {
  json rot = json::array();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) rot.push_back(t.rotation(r, c));
  }
  j = {{"rotation", rot}, {"translation", vec3(t.translation)}};
}

void from_json(const json& j, RigidTransform& t) {
  const json& rot = j.at("rotation");
  if (!rot.is_array() || rot.size() != 9) {
    throw Error(ErrorCode::kParse, "rotation must hold 9 row-major floats");
  }
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) t.rotation(r, c) = rot[static_cast<std::size_t>(3 * r + c)].get<double>();
  }
  t.translation = vec3(j.at("translation"));
}

// Views are flat: id, intrinsics fields, rotation, translation.
void to_json(json& j, const CameraView& v) {
  j = v.intrinsics;
  j["id"] = v.id;
  const json t = v.extrinsics;
  j["rotation"] = t["rotation"];
  j["translation"] = t["translation"];
}

void from_json(const json& j, CameraView& v) {
  v.id = j.at("id").get<std::string>();
  v.intrinsics = j.get<CameraIntrinsics>();
  v.extrinsics = j.get<RigidTransform>();
}

void to_json(json& j, const CameraRig& r) {
  json adj = json::array();
  for (const auto& [a, b] : r.adjacency) adj.push_back({a, b});
  j = {{"views", r.views}, {"adjacency", adj}};
}

void from_json(const json& j, CameraRig& r) {
  r.views = j.at("views").get<std::vector<CameraView>>();
  r.adjacency.clear();
  for (const auto& p : j.at("adjacency")) {
    if (!p.is_array() || p.size() != 2) throw Error(ErrorCode::kParse, "adjacency entries are pairs");
    r.adjacency.emplace_back(p[0].get<std::string>(), p[1].get<std::string>());
  }
}

void to_json(json& j, const ShiftSpec& s) {
  j = {{"mode", std::string(to_string(s.mode))}, {"dx", s.dx}, {"dy", s.dy}, {"dz", s.dz},
       {"dpitch_deg", s.dpitch * 180.0 / std::numbers::pi},
       {"dyaw_deg", s.dyaw * 180.0 / std::numbers::pi}};
}

void from_json(const json& j, ShiftSpec& s) {
  s.mode = mode_or_throw(j.value("mode", std::string("custom")));
  s.dx = j.value("dx", 0.0);
  s.dy = j.value("dy", 0.0);
  s.dz = j.value("dz", 0.0);
  s.dpitch = j.value("dpitch_deg", 0.0) * std::numbers::pi / 180.0;
  s.dyaw = j.value("dyaw_deg", 0.0) * std::numbers::pi / 180.0;
}

void to_json(json& j, const Box3D& b) {
  j = {{"cx", b.cx}, {"cy", b.cy}, {"cz", b.cz}, {"l", b.l}, {"w", b.w}, {"h", b.h},
       {"yaw", b.yaw}, {"score", b.score}, {"cls", b.cls}, {"id", b.id}};
}

void from_json(const json& j, Box3D& b) {
  b.cx = j.at("cx").get<double>();
  b.cy = j.at("cy").get<double>();
  b.cz = j.at("cz").get<double>();
  b.l = j.at("l").get<double>();
  b.w = j.at("w").get<double>();
  b.h = j.at("h").get<double>();
  b.yaw = j.at("yaw").get<double>();
  b.score = j.value("score", 1.0);
  b.cls = j.value("cls", std::string("car"));
  b.id = j.value("id", std::string());
}

void to_json(json& j, const MetricBundle& m) {
  j = {{"mAP", m.mAP}, {"mATE", m.mATE}, {"mASE", m.mASE}, {"mAOE", m.mAOE}, {"nds", m.nds}};
}

void to_json(json& j, const BoxObject& b) {
  j = {{"center", vec3(b.center)}, {"l", b.l}, {"w", b.w}, {"h", b.h}, {"yaw", b.yaw},
       {"albedo", vec3(b.albedo)}, {"cls", b.cls}, {"id", b.id}};
}

void from_json(const json& j, BoxObject& b) {
  b.center = vec3(j.at("center"));
  b.l = j.at("l").get<double>();
  b.w = j.at("w").get<double>();
  b.h = j.at("h").get<double>();
  b.yaw = j.at("yaw").get<double>();
  b.albedo = vec3(j.at("albedo"));
  b.cls = j.value("cls", std::string("car"));
  b.id = j.value("id", std::string());
}

void to_json(json& j, const SphereObject& s) {
  j = {{"center", vec3(s.center)}, {"radius", s.radius}, {"albedo", vec3(s.albedo)}};
}

void from_json(const json& j, SphereObject& s) {
  s.center = vec3(j.at("center"));
  s.radius = j.at("radius").get<double>();
  s.albedo = vec3(j.at("albedo"));
}

void to_json(json& j, const SceneSpec& s) {
  j = {{"seed", s.seed},
       {"frames", s.frames},
       {"ground",
        {{"albedo", vec3(s.ground.albedo)},
         {"texture_amplitude", s.ground.texture_amplitude},
         {"texture_wavelength", s.ground.texture_wavelength},
         {"rotation", s.ground.rotation},
         {"phase", {s.ground.phase.x(), s.ground.phase.y()}}}},
       {"boxes", s.boxes},
       {"spheres", s.spheres},
       {"trajectory", s.trajectory},
       {"light", vec3(s.light)},
       {"ambient", s.ambient},
       {"sky", vec3(s.sky)},
       {"max_depth", s.max_depth}};
}

void from_json(const json& j, SceneSpec& s) {
  s.seed = j.value("seed", std::uint64_t{0});
  s.frames = j.at("frames").get<int>();
  if (j.contains("ground")) {
    const json& g = j.at("ground");
    s.ground.albedo = vec3(g.at("albedo"));
    s.ground.texture_amplitude = g.value("texture_amplitude", s.ground.texture_amplitude);
    s.ground.texture_wavelength = g.value("texture_wavelength", s.ground.texture_wavelength);
    s.ground.rotation = g.value("rotation", 0.0);
    if (g.contains("phase")) {
      s.ground.phase = Eigen::Vector2d(g.at("phase").at(0).get<double>(), g.at("phase").at(1).get<double>());
    }
  }
  s.boxes = j.value("boxes", std::vector<BoxObject>{});
  s.spheres = j.value("spheres", std::vector<SphereObject>{});
  s.trajectory = j.at("trajectory").get<std::vector<RigidTransform>>();
  if (j.contains("light")) s.light = vec3(j.at("light"));
  s.ambient = j.value("ambient", s.ambient);
  if (j.contains("sky")) s.sky = vec3(j.at("sky"));
  s.max_depth = j.value("max_depth", s.max_depth);
}

void to_json(json& j, const LossReport& r) {
  json pairs = json::array();
  for (const auto& p : r.per_pair) {
    pairs.push_back({{"label", p.label},
                     {"src", p.src},
                     {"dst", p.dst},
                     {"l_ov", p.l_ov(r.reduction)},
                     {"l_p", p.l_p(r.reduction)},
                     {"ov_sum", p.ov.sum},
                     {"ov_count", p.ov.count},
                     {"p_sum", p.p.sum},
                     {"p_count", p.p.count}});
  }
  j = {{"l_det", r.l_det},
       {"l_ov", r.l_ov},
       {"l_p", r.l_p},
       {"l_total", r.l_total},
       {"weights", {{"det", r.weights.det}, {"ov", r.weights.ov}, {"p", r.weights.p}}},
       {"reduction", r.reduction == Reduction::kMean ? "mean" : "sum"},
       {"total_valid", r.total_valid},
       {"per_pair", pairs}};
}

void to_json(json& j, const FdReport& r) {
  auto entry = [](const FdEntry& e) {
    return json{{"slot", e.slot}, {"x", e.x}, {"y", e.y}, {"analytic", e.analytic},
                {"numeric", e.numeric}, {"rel_err", e.rel_err}};
  };
  j = {{"max_rel_err", r.max_rel_err},
       {"mean_rel_err", r.mean_rel_err},
       {"eps", r.eps},
       {"samples", r.entries.size()},
       {"skipped_boundary", r.skipped_boundary},
       {"skipped_nonsmooth", r.skipped_nonsmooth},
       {"worst", entry(r.worst)}};
}

void to_json(json& j, const AdapterSpec& s) {
  j = {{"down", std::string(to_string(s.down))},
       {"up", std::string(to_string(s.up))},
       {"kernel", s.kernel},
       {"ratio", s.ratio},
       {"norm", std::string(to_string(s.norm))},
       {"activation", std::string(to_string(s.activation))},
       {"bottleneck", std::string(to_string(s.bottleneck))},
       {"channels", s.channels},
       {"height", s.height},
       {"width", s.width}};
}

void from_json(const json& j, AdapterSpec& s) {
  s.down = parse_projection(j.at("down").get<std::string>());
  s.up = parse_projection(j.at("up").get<std::string>());
  s.kernel = j.value("kernel", 3);
  s.ratio = j.value("ratio", 4);
  s.norm = parse_norm(j.value("norm", std::string("batch")));
  s.activation = parse_activation(j.value("activation", std::string("relu")));
  s.bottleneck = parse_bottleneck(j.value("bottleneck", std::string("spatial")));
  s.channels = j.at("channels").get<int>();
  s.height = j.at("height").get<int>();
  s.width = j.at("width").get<int>();
}

void to_json(json& j, const ParamTensor& t) { j = {{"shape", t.shape}, {"values", t.values}}; }

void from_json(const json& j, ParamTensor& t) {
  t.shape = j.at("shape").get<std::vector<int>>();
  t.values = j.at("values").get<std::vector<double>>();
}

void to_json(json& j, const AdapterState& s) {
  j = {{"down.weight", s.down_weight}, {"down.bias", s.down_bias},
       {"up.weight", s.up_weight},     {"up.bias", s.up_bias},
       {"norm.scale", s.norm_scale},   {"norm.shift", s.norm_shift},
       {"norm.running_mean", s.running_mean}, {"norm.running_var", s.running_var}};
}

void from_json(const json& j, AdapterState& s) {
  s.down_weight = j.at("down.weight").get<ParamTensor>();
  s.down_bias = j.at("down.bias").get<ParamTensor>();
  s.up_weight = j.at("up.weight").get<ParamTensor>();
  s.up_bias = j.at("up.bias").get<ParamTensor>();
  s.norm_scale = j.at("norm.scale").get<ParamTensor>();
  s.norm_shift = j.at("norm.shift").get<ParamTensor>();
  s.running_mean = j.value("norm.running_mean", std::vector<double>{});
  s.running_var = j.value("norm.running_var", std::vector<double>{});
}

void to_json(json& j, const LedaReport& r) {
  j = {{"source_err", r.source_err},
       {"source_retention_err", r.source_retention_err},
       {"block_unchanged", r.block_unchanged},
       {"target_err_before", r.target_err_before},
       {"target_err_after", r.target_err_after},
       {"relative_reduction", r.relative_reduction},
       {"adapt_samples", r.adapt_samples},
       {"adapter_params", r.adapter_params},
       {"final_loss", r.final_loss}};
}

CameraRig load_rig(const fs::path& path) {
  CameraRig rig = parse_as<CameraRig>(read_json(path), path.string().c_str());
  rig.validate();
  return rig;
}

std::string fd_report_csv(const FdReport& r) {
  std::ostringstream out;
  out << std::setprecision(12);
  out << "slot,x,y,analytic,numeric,rel_err\n";
  for (const auto& e : r.entries) {
    out << e.slot << ',' << e.x << ',' << e.y << ',' << e.analytic << ',' << e.numeric << ','
        << e.rel_err << '\n';
  }
  return out.str();
}

}  // namespace mvgc
