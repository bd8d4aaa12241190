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

// mvgc command-line tool. Exit codes: 0 success, 2 usage or input error,
// 3 a checked property failed.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mvgc/adapter.hpp"
#include "mvgc/camgeom.hpp"
#include "mvgc/consist.hpp"
#include "mvgc/evalkit.hpp"
#include "mvgc/io.hpp"
#include "mvgc/synthrig.hpp"

#ifndef MVGC_VERSION
#define MVGC_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using namespace mvgc;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitProperty = 3;
constexpr double kDeg = std::numbers::pi / 180.0;

// Thrown by command bodies to request a specific exit code.
struct ExitCode {
  int code;
};

// Collects what a run read and wrote, then writes the manifest.
class Manifest {
 public:
  Manifest(int argc, char** argv) : start_(std::chrono::steady_clock::now()) {
    for (int i = 1; i < argc; ++i) args_.push_back(argv[i]);
  }
  void set_command(std::string c) { command_ = std::move(c); }
  void set_seed(std::uint64_t s) { seed_ = s; }
  void input(const fs::path& p) { inputs_.push_back(p); }
  void output(const fs::path& p) { outputs_.push_back(p); }

  void write(const fs::path& path) const {
    json in = json::object(), out = json::object();
    for (const auto& p : inputs_) in[p.string()] = sha256_file(p);
    for (const auto& p : outputs_) out[p.string()] = sha256_file(p);
    json j = {{"command", command_},
              {"arguments", args_},
              {"version", MVGC_VERSION},
              {"inputs", in},
              {"outputs", out},
              {"wall_time_s", std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count()}};
    j["seed"] = seed_ ? json(*seed_) : json(nullptr);
    write_json(path, j);
  }

 private:
  std::chrono::steady_clock::time_point start_;
  std::string command_;
  std::vector<std::string> args_;
  std::optional<std::uint64_t> seed_;
  std::vector<fs::path> inputs_;
  std::vector<fs::path> outputs_;
};

// Sibling manifest for a single output file.
fs::path manifest_for(const fs::path& file) {
  return file.parent_path() / (file.filename().string() + ".manifest.json");
}

std::vector<double> parse_list(const std::string& s, const char* what) {
  std::vector<double> out;
  std::stringstream in(s);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    if (tok.empty()) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw Error(ErrorCode::kParse, std::string(what) + ": not a number: " + tok);
    }
  }
  return out;
}

LossWeights parse_weights(const std::string& s) {
  const auto v = parse_list(s, "--weights");
  if (v.size() != 3) throw Error(ErrorCode::kParse, "--weights takes det,ov,p");
  LossWeights w{v[0], v[1], v[2]};
  w.validate();
  return w;
}

std::string fixed(double v, int digits) {
  std::ostringstream o;
  o << std::fixed << std::setprecision(digits) << v;
  return o.str();
}

// ---------------------------------------------------------------- rig

struct RigArgs {
  std::string preset = "nuscenes6";
  fs::path input, output;
  std::string mode = "custom";
  double dx = 0, dy = 0, dz = 0, dpitch_deg = 0, dyaw_deg = 0;
  fs::path shift_file;
};

void emit_rig(const CameraRig& rig, const fs::path& out, Manifest& m) {
  if (out.empty()) {
    std::cout << json(rig).dump(2) << "\n";
    return;
  }
  write_json(out, rig);
  m.output(out);
  m.write(manifest_for(out));
  std::cout << "wrote " << out.string() << " (" << rig.views.size() << " views)\n";
}

void cmd_rig_gen(const RigArgs& a, Manifest& m) {
  m.set_command("rig gen");
  emit_rig(make_preset_rig(a.preset), a.output, m);
}

void cmd_rig_perturb(const RigArgs& a, Manifest& m) {
  m.set_command("rig perturb");
  CameraRig rig;
  if (!a.input.empty()) {
    rig = load_rig(a.input);
    m.input(a.input);
  } else {
    rig = make_preset_rig(a.preset);
  }
  ShiftSpec s;
  if (!a.shift_file.empty()) {
    s = parse_as<ShiftSpec>(read_json(a.shift_file), "shift file");
    m.input(a.shift_file);
  } else {
    s.mode = parse_shift_mode(a.mode);
    s.dx = a.dx;
    s.dy = a.dy;
    s.dz = a.dz;
    s.dpitch = a.dpitch_deg * kDeg;
    s.dyaw = a.dyaw_deg * kDeg;
  }
  emit_rig(perturb_rig(rig, s), a.output, m);
}

// ---------------------------------------------------------------- scenes

struct SceneArgs {
  fs::path rig_file;
  std::string preset = "nuscenes6";
  std::uint64_t seed = 7;
  int frames = 2;
  int boxes = 8;
  int spheres = 3;
  double step = 1.0;
  fs::path bundle;  // read a synth output directory instead
};

struct LoadedScene {
  CameraRig rig;
  SceneSpec spec;
  std::vector<FrameBundle> bundles;
};

CameraRig scene_rig(const SceneArgs& a, Manifest& m) {
  if (a.rig_file.empty()) return make_preset_rig(a.preset);
  m.input(a.rig_file);
  return load_rig(a.rig_file);
}

SceneSpec scene_spec(const SceneArgs& a) {
  if (a.frames < 1) throw Error(ErrorCode::kInvalidScene, "--frames must be >= 1");
  if (a.boxes < 0 || a.spheres < 0) throw Error(ErrorCode::kInvalidScene, "object counts must be >= 0");
  SceneGenOptions o;
  o.frames = a.frames;
  o.boxes = a.boxes;
  o.spheres = a.spheres;
  o.step = a.step;
  return random_scene(a.seed, o);
}

fs::path frame_dir(const fs::path& root, int f) { return root / ("frame_" + std::to_string(f)); }

LoadedScene load_bundle(const fs::path& dir, Manifest& m) {
  LoadedScene s;
  s.rig = load_rig(dir / "rig.json");
  s.spec = parse_as<SceneSpec>(read_json(dir / "scene.json"), "scene.json");
  s.spec.validate(s.rig);
  m.input(dir / "rig.json");
  m.input(dir / "scene.json");
  for (int f = 0; f < s.spec.frames; ++f) {
    FrameBundle fb;
    fb.frame = f;
    fb.ego_pose = s.spec.trajectory[static_cast<std::size_t>(f)];
    const fs::path fd = frame_dir(dir, f);
    for (const auto& v : s.rig.views) {
      ViewRender r;
      const fs::path depth = fd / (v.id + "_depth.pfm"), mask = fd / (v.id + "_mask.pgm"),
                     rgb = fd / (v.id + "_rgb.ppm");
      r.depth = read_depth(depth, mask);
      r.image = read_ppm(rgb);
      for (const auto& p : {depth, mask, rgb}) m.input(p);
      fb.views.push_back(std::move(r));
    }
    fb.boxes = parse_as<std::vector<Box3D>>(read_json(fd / "boxes.json"), "boxes.json");
    s.bundles.push_back(std::move(fb));
  }
  return s;
}

LoadedScene obtain_scene(const SceneArgs& a, Manifest& m) {
  if (!a.bundle.empty()) return load_bundle(a.bundle, m);
  LoadedScene s;
  s.rig = scene_rig(a, m);
  s.spec = scene_spec(a);
  m.set_seed(a.seed);
  s.bundles = render_scene(s.rig, s.spec);
  return s;
}

void cmd_synth(const SceneArgs& a, const fs::path& out, Manifest& m) {
  m.set_command("synth");
  m.set_seed(a.seed);
  if (out.empty()) throw Error(ErrorCode::kIo, "synth needs -o <dir>");
  const CameraRig rig = scene_rig(a, m);
  const SceneSpec spec = scene_spec(a);
  const auto bundles = render_scene(rig, spec);
  fs::create_directories(out);
  auto put_json = [&](const fs::path& p, const json& j) {
    write_json(p, j);
    m.output(p);
  };
  put_json(out / "rig.json", rig);
  put_json(out / "scene.json", spec);
  put_json(out / "trajectory.json", spec.trajectory);
  std::size_t rasters = 0;
  for (const auto& fb : bundles) {
    const fs::path fd = frame_dir(out, fb.frame);
    fs::create_directories(fd);
    for (std::size_t v = 0; v < rig.views.size(); ++v) {
      const auto& id = rig.views[v].id;
      const fs::path depth = fd / (id + "_depth.pfm"), mask = fd / (id + "_mask.pgm"),
                     rgb = fd / (id + "_rgb.ppm");
      write_depth(depth, mask, fb.views[v].depth);
      write_ppm(rgb, fb.views[v].image);
      for (const auto& p : {depth, mask, rgb}) m.output(p);
      ++rasters;
    }
    put_json(fd / "boxes.json", fb.boxes);
  }
  m.write(out / "manifest.json");
  std::cout << "wrote " << rasters << " depth maps, " << rasters << " images, " << bundles.size()
            << " box files to " << out.string() << "\n";
}

// ---------------------------------------------------------------- consist

struct ConsistArgs {
  SceneArgs scene;
  int window = 1;
  std::string weights = "1,1,1";
  double l_det = 0.0;
  std::string interp = "inverse";
  std::string reduction = "mean";
  bool zbuffer = false;
  fs::path output;
  // gradcheck
  double eps = 1e-3;
  std::size_t samples = 1000;
  std::uint64_t fd_seed = 42;
  double modulate = 0.03;
  fs::path csv;
  // shift-study
  std::string dz = "0,0.2,0.65";
  std::string pitch_deg = "5";
  bool all_axes = false;
};

ConsistOptions consist_options(const ConsistArgs& a) {
  ConsistOptions o;
  if (a.interp == "inverse") {
    o.interpolation = DepthInterpolation::kInverse;
  } else if (a.interp == "linear") {
    o.interpolation = DepthInterpolation::kLinear;
  } else {
    throw Error(ErrorCode::kParse, "--interp must be inverse or linear");
  }
  if (a.reduction == "mean") {
    o.reduction = Reduction::kMean;
  } else if (a.reduction == "sum") {
    o.reduction = Reduction::kSum;
  } else {
    throw Error(ErrorCode::kParse, "--reduction must be mean or sum");
  }
  o.warp.zbuffer = a.zbuffer;
  return o;
}

MultiViewBatch scene_to_batch(const LoadedScene& s, int window) {
  if (window < 0) throw Error(ErrorCode::kInvalidSpec, "--window must be >= 0");
  const auto pairs = enumerate_pairs(s.rig, static_cast<int>(s.bundles.size()), window);
  return make_batch(s.rig, s.spec, s.bundles, pairs);
}

void emit_json(const json& j, const fs::path& out, Manifest& m) {
  std::cout << j.dump(2) << "\n";
  if (out.empty()) return;
  write_json(out, j);
  m.output(out);
  m.write(manifest_for(out));
}

void cmd_consist_eval(const ConsistArgs& a, Manifest& m) {
  m.set_command("consist eval");
  const auto s = obtain_scene(a.scene, m);
  const auto batch = scene_to_batch(s, a.window);
  const auto opt = consist_options(a);
  const auto report = evaluate(batch, parse_weights(a.weights), a.l_det, opt);
  emit_json(report, a.output, m);
  std::cout << "l_ov " << report.l_ov << "  l_p " << report.l_p << "  l_total " << report.l_total
            << "  pairs " << report.per_pair.size() << "\n";
}

void cmd_consist_gradcheck(const ConsistArgs& a, Manifest& m) {
  m.set_command("consist gradcheck");
  const auto s = obtain_scene(a.scene, m);
  auto batch = scene_to_batch(s, a.window);
  if (a.modulate != 0.0) modulate_depths(batch, a.modulate);
  const auto rep = finite_difference_check(batch, parse_weights(a.weights), consist_options(a), a.eps,
                                           a.samples, a.fd_seed);
  if (!a.csv.empty()) {
    write_text(a.csv, fd_report_csv(rep));
    m.output(a.csv);
    m.write(manifest_for(a.csv));
  }
  emit_json(rep, a.output, m);
  const bool ok = rep.max_rel_err < 1e-4;
  std::cout << "max rel err " << rep.max_rel_err << " over " << rep.entries.size() << " pixels: "
            << (ok ? "ok" : "FAILED (>= 1e-4)") << "\n";
  if (!ok) throw ExitCode{kExitProperty};
}

void cmd_consist_shift_study(const ConsistArgs& a, Manifest& m) {
  m.set_command("consist shift-study");
  m.set_seed(a.scene.seed);
  const CameraRig rig = scene_rig(a.scene, m);
  const SceneSpec spec = scene_spec(a.scene);
  std::vector<ShiftSpec> shifts;
  bool has_zero = false;
  for (double dz : parse_list(a.dz, "--dz")) {
    shifts.push_back(ShiftSpec::height(dz));
    has_zero = has_zero || dz == 0.0;
  }
  for (double p : parse_list(a.pitch_deg, "--pitch-deg")) shifts.push_back(ShiftSpec::pitch(p * kDeg));
  if (a.all_axes) shifts.push_back(ShiftSpec::all_axes());
  if (!has_zero) shifts.insert(shifts.begin(), ShiftSpec::height(0.0));
  const auto study = shift_study(rig, spec, shifts, parse_weights(a.weights), consist_options(a), a.window);
  const std::string csv = study.csv();
  std::cout << csv;
  if (!a.output.empty()) {
    write_text(a.output, csv);
    m.output(a.output);
    m.write(manifest_for(a.output));
  }
  std::cout << "monotone: " << (study.monotone ? "true" : "false") << "\n";
  if (!study.monotone) throw ExitCode{kExitProperty};
}

// ---------------------------------------------------------------- adapter

struct AdapterArgs {
  int c = 64, r = 4, k = 3;
  std::string bottleneck = "spatial";
  std::string norm = "batch";
  bool as_json = false;
  // demo
  double k_percent = 0.05;
  std::uint64_t seed = 1;
  int steps = -1;
  double lr = -1.0;
  double gain = 1.25, offset = 0.5;
  std::uint64_t teacher_seed = 99;
  fs::path output;
};

void cmd_adapter_bench(const AdapterArgs& a, Manifest& m) {
  m.set_command("adapter bench");
  AdapterSpec s;
  s.channels = a.c;
  s.ratio = a.r;
  s.kernel = a.k;
  s.bottleneck = parse_bottleneck(a.bottleneck);
  s.norm = parse_norm(a.norm);
  s.validate();
  struct Variant {
    const char* name;
    ProjectionKind down, up;
    std::size_t count = 0;
  };
  std::vector<Variant> rows = {{"H", ProjectionKind::kConv, ProjectionKind::kConv},
                               {"B", ProjectionKind::kConv, ProjectionKind::kLinear},
                               {"S", ProjectionKind::kLinear, ProjectionKind::kConv},
                               {"T", ProjectionKind::kLinear, ProjectionKind::kLinear},
                               {"ours", ProjectionKind::kConv, ProjectionKind::kLinear}};
  for (auto& v : rows) {
    s.down = v.down;
    s.up = v.up;
    v.count = param_count(s);
  }
  const bool symmetric = rows[2].count == rows[4].count && rows[1].count == rows[2].count;
  const bool ordered = rows[0].count > rows[1].count && rows[1].count > rows[3].count;
  if (a.as_json) {
    json j = json::array();
    for (const auto& v : rows) {
      j.push_back({{"variant", v.name}, {"down", to_string(v.down)}, {"up", to_string(v.up)},
                   {"params", v.count}});
    }
    std::cout << json{{"C", a.c}, {"r", a.r}, {"k", a.k}, {"variants", j},
                      {"symmetric", symmetric}, {"ordered", ordered}}
                     .dump(2)
              << "\n";
  } else {
    std::printf("C=%d r=%d k=%d bottleneck=%s\n", a.c, a.r, a.k, a.bottleneck.c_str());
    std::printf("%-8s %-8s %-8s %12s\n", "variant", "down", "up", "params");
    for (const auto& v : rows) {
      std::printf("%-8s %-8s %-8s %12zu\n", v.name, std::string(to_string(v.down)).c_str(),
                  std::string(to_string(v.up)).c_str(), v.count);
    }
    std::printf("count(S) == count(ours): %s\n", symmetric ? "yes" : "NO");
    std::printf("count(H) > count(B) > count(T): %s\n", ordered ? "yes" : "NO");
  }
  if (!symmetric || !ordered) throw ExitCode{kExitProperty};
}

void cmd_adapter_demo(const AdapterArgs& a, Manifest& m) {
  m.set_command("adapter demo");
  m.set_seed(a.seed);
  auto cfg = LedaConfig::defaults();
  cfg.k_percent = a.k_percent;
  cfg.seed = a.seed;
  if (a.steps >= 0) cfg.steps = a.steps;
  if (a.lr > 0.0) cfg.lr = a.lr;
  cfg.validate();
  const auto teacher = make_teacher(cfg.channels, cfg.height, cfg.width, a.teacher_seed);
  const auto report = leda_demo(teacher, affine_shift(teacher, a.gain, a.offset), cfg);
  emit_json(report, a.output, m);
  std::cout << "source_retention_err " << report.source_retention_err << "\n"
            << "target_err_before " << fixed(report.target_err_before, 4) << "\n"
            << "target_err_after " << fixed(report.target_err_after, 4) << "\n"
            << "relative_reduction " << fixed(report.relative_reduction, 3) << "\n";
  if (report.source_retention_err != 0.0 || !report.block_unchanged) throw ExitCode{kExitProperty};
}

// ---------------------------------------------------------------- metrics

struct MetricsArgs {
  double map = 0, mate = 0, mase = 0, maoe = 0;
  double model = 0, dt = 0, oracle = 0;
  fs::path preds, gts;
  double range = 50.0;
  std::string thresholds = "0.5,1,2,4";
  bool csv = false;
};

void print_bundle(const MetricBundle& b, bool csv) {
  if (csv) {
    std::cout << "mAP,mATE,mASE,mAOE,NDS*\n"
              << fixed(b.mAP, 3) << ',' << fixed(b.mATE, 3) << ',' << fixed(b.mASE, 3) << ','
              << fixed(b.mAOE, 3) << ',' << fixed(b.nds, 3) << "\n";
    return;
  }
  std::printf("%-8s %-8s %-8s %-8s %-8s\n", "NDS*", "mAP", "mATE", "mASE", "mAOE");
  std::printf("%-8s %-8s %-8s %-8s %-8s\n", fixed(b.nds, 3).c_str(), fixed(b.mAP, 3).c_str(),
              fixed(b.mATE, 3).c_str(), fixed(b.mASE, 3).c_str(), fixed(b.mAOE, 3).c_str());
}

void cmd_metrics_nds(const MetricsArgs& a, Manifest& m) {
  m.set_command("metrics nds");
  std::cout << fixed(nds_star(a.map, a.mate, a.mase, a.maoe), 3) << "\n";
}

void cmd_metrics_gap(const MetricsArgs& a, Manifest& m) {
  m.set_command("metrics closed-gap");
  const double g = closed_gap(a.model, a.dt, a.oracle);
  std::cout << (g >= 0 ? "+" : "") << fixed(g, 1) << "%\n";
}

void cmd_metrics_match(const MetricsArgs& a, Manifest& m) {
  m.set_command("metrics match");
  m.input(a.preds);
  m.input(a.gts);
  const auto preds = parse_as<std::vector<Box3D>>(read_json(a.preds), "predictions");
  const auto gts = parse_as<std::vector<Box3D>>(read_json(a.gts), "ground truth");
  for (const auto* set : {&preds, &gts}) {
    for (const auto& b : *set) b.validate();
  }
  EvalConfig cfg;
  cfg.range_limit = a.range;
  cfg.thresholds = parse_list(a.thresholds, "--thresholds");
  print_bundle(match_and_score(preds, gts, cfg), a.csv);
}

int exit_for(const Error& e) {
  std::cerr << "error: " << e.what() << "\n";
  return kExitUsage;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mvgc: multi-view geometry consistency toolkit"};
  app.set_version_flag("--version", MVGC_VERSION);
  app.require_subcommand(1);
  Manifest manifest(argc, argv);
  std::function<void()> action;

  // rig
  RigArgs rig;
  auto* rig_cmd = app.add_subcommand("rig", "generate or perturb camera rigs");
  rig_cmd->require_subcommand(1);
  auto* gen = rig_cmd->add_subcommand("gen", "write a preset rig");
  gen->add_option("--preset", rig.preset, "nuscenes6 | front3 | mono1")->capture_default_str();
  gen->add_option("-o,--output", rig.output, "rig JSON (stdout when omitted)");
  gen->callback([&] { action = [&] { cmd_rig_gen(rig, manifest); }; });
  auto* perturb = rig_cmd->add_subcommand("perturb", "apply an installation shift");
  perturb->add_option("-i,--input", rig.input, "rig JSON (default: --preset)");
  perturb->add_option("--preset", rig.preset)->capture_default_str();
  perturb->add_option("-o,--output", rig.output);
  perturb->add_option("--mode", rig.mode, "height | pitch | all | custom")->capture_default_str();
  perturb->add_option("--dx", rig.dx, "meters, ego frame");
  perturb->add_option("--dy", rig.dy);
  perturb->add_option("--dz", rig.dz);
  perturb->add_option("--dpitch-deg", rig.dpitch_deg);
  perturb->add_option("--dyaw-deg", rig.dyaw_deg);
  perturb->add_option("--shift", rig.shift_file, "ShiftSpec JSON instead of flags");
  perturb->callback([&] { action = [&] { cmd_rig_perturb(rig, manifest); }; });

  // synth
  SceneArgs synth;
  fs::path synth_out;
  auto* synth_cmd = app.add_subcommand("synth", "render a seeded scene to a bundle directory");
  auto add_scene = [](CLI::App* c, SceneArgs& s) {
    c->add_option("--rig", s.rig_file, "rig JSON (default: --preset)");
    c->add_option("--preset", s.preset)->capture_default_str();
    c->add_option("--seed", s.seed)->capture_default_str();
    c->add_option("--frames", s.frames)->capture_default_str();
    c->add_option("--boxes", s.boxes)->capture_default_str();
    c->add_option("--spheres", s.spheres)->capture_default_str();
    c->add_option("--step", s.step, "ego motion per frame, meters")->capture_default_str();
  };
  add_scene(synth_cmd, synth);
  synth_cmd->add_option("-o,--output", synth_out, "output directory")->required();
  synth_cmd->callback([&] { action = [&] { cmd_synth(synth, synth_out, manifest); }; });

  // consist
  ConsistArgs con;
  auto* con_cmd = app.add_subcommand("consist", "overlap depth and photometric losses");
  con_cmd->require_subcommand(1);
  auto add_consist = [&](CLI::App* c) {
    add_scene(c, con.scene);
    c->add_option("--bundle", con.scene.bundle, "synth output directory to read instead");
    c->add_option("--window", con.window, "temporal window")->capture_default_str();
    c->add_option("--weights", con.weights, "det,ov,p")->capture_default_str();
    c->add_option("--interp", con.interp, "inverse | linear")->capture_default_str();
    c->add_option("--reduction", con.reduction, "mean | sum")->capture_default_str();
    c->add_flag("--zbuffer", con.zbuffer, "drop occluded correspondences");
    c->add_option("-o,--output", con.output);
  };
  auto* eval = con_cmd->add_subcommand("eval", "print the loss report for a scene");
  add_consist(eval);
  eval->add_option("--l-det", con.l_det, "external detection loss")->capture_default_str();
  auto* grad = con_cmd->add_subcommand("gradcheck", "analytic gradient vs central differences");
  add_consist(grad);
  grad->add_option("--eps", con.eps)->capture_default_str();
  grad->add_option("--samples", con.samples)->capture_default_str();
  grad->add_option("--fd-seed", con.fd_seed)->capture_default_str();
  grad->add_option("--modulate", con.modulate, "relative depth modulation applied first")
      ->capture_default_str();
  grad->add_option("--csv", con.csv, "per-pixel CSV");
  auto* study = con_cmd->add_subcommand("shift-study", "loss growth under rig shifts");
  add_consist(study);
  study->add_option("--dz", con.dz, "comma-separated height shifts, meters")->capture_default_str();
  study->add_option("--pitch-deg", con.pitch_deg, "comma-separated pitch shifts")->capture_default_str();
  study->add_flag("--all-axes", con.all_axes, "add the combined x/y/z/yaw shift");
  // Consistency checks run on the ground-only scene unless objects are asked for.
  for (auto* c : {eval, study}) {
    c->get_option("--boxes")->default_val(0);
    c->get_option("--spheres")->default_val(0);
  }
  eval->callback([&] { action = [&] { cmd_consist_eval(con, manifest); }; });
  grad->callback([&] { action = [&] { cmd_consist_gradcheck(con, manifest); }; });
  study->callback([&] { action = [&] { cmd_consist_shift_study(con, manifest); }; });

  // adapter
  AdapterArgs ad;
  auto* ad_cmd = app.add_subcommand("adapter", "adapter parameter counts and adaptation demo");
  ad_cmd->require_subcommand(1);
  auto* bench = ad_cmd->add_subcommand("bench", "parameter counts per structure variant");
  bench->add_option("--c", ad.c, "channels")->capture_default_str();
  bench->add_option("--r", ad.r, "ratio")->capture_default_str();
  bench->add_option("--k", ad.k, "kernel")->capture_default_str();
  bench->add_option("--bottleneck", ad.bottleneck, "spatial | channel")->capture_default_str();
  bench->add_option("--norm", ad.norm, "batch | layer")->capture_default_str();
  bench->add_flag("--json", ad.as_json);
  bench->callback([&] { action = [&] { cmd_adapter_bench(ad, manifest); }; });
  auto* demo = ad_cmd->add_subcommand("demo", "adapt a frozen regressor to an affine-shifted target");
  demo->add_option("--k-percent", ad.k_percent, "labeled target fraction in (0, 1]")->capture_default_str();
  demo->add_option("--seed", ad.seed)->capture_default_str();
  demo->add_option("--steps", ad.steps, "adaptation steps");
  demo->add_option("--lr", ad.lr, "adaptation step size");
  demo->add_option("--gain", ad.gain)->capture_default_str();
  demo->add_option("--offset", ad.offset)->capture_default_str();
  demo->add_option("--teacher-seed", ad.teacher_seed)->capture_default_str();
  demo->add_option("-o,--output", ad.output);
  demo->callback([&] { action = [&] { cmd_adapter_demo(ad, manifest); }; });

  // metrics
  MetricsArgs me;
  auto* me_cmd = app.add_subcommand("metrics", "detection metrics");
  me_cmd->require_subcommand(1);
  auto* nds = me_cmd->add_subcommand("nds", "NDS* from mAP and TP errors");
  nds->add_option("--map", me.map)->required();
  nds->add_option("--mate", me.mate)->required();
  nds->add_option("--mase", me.mase)->required();
  nds->add_option("--maoe", me.maoe)->required();
  nds->callback([&] { action = [&] { cmd_metrics_nds(me, manifest); }; });
  auto* gap = me_cmd->add_subcommand("closed-gap", "percent of the oracle gap recovered");
  gap->add_option("--model", me.model)->required();
  gap->add_option("--dt", me.dt, "direct transfer NDS")->required();
  gap->add_option("--oracle", me.oracle)->required();
  gap->callback([&] { action = [&] { cmd_metrics_gap(me, manifest); }; });
  auto* match = me_cmd->add_subcommand("match", "score predicted boxes against ground truth");
  match->add_option("--pred", me.preds, "predictions JSON")->required();
  match->add_option("--gt", me.gts, "ground truth JSON")->required();
  match->add_option("--range", me.range)->capture_default_str();
  match->add_option("--thresholds", me.thresholds)->capture_default_str();
  match->add_flag("--csv", me.csv);
  match->callback([&] { action = [&] { cmd_metrics_match(me, manifest); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }
  try {
    if (action) action();
  } catch (const ExitCode& e) {
    return e.code;
  } catch (const Error& e) {
    return exit_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return 0;
}
