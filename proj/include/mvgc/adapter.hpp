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
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace mvgc {

// Dense C x H x W feature raster, channel-major.
struct Feature {
  int c = 0;
  int h = 0;
  int w = 0;
  std::vector<double> v;

  Feature() = default;
  Feature(int channels, int height, int width, double fill = 0.0);

  std::size_t size() const noexcept { return v.size(); }
  double& at(int ch, int y, int x) { return v[index(ch, y, x)]; }
  double at(int ch, int y, int x) const { return v[index(ch, y, x)]; }
  std::size_t index(int ch, int y, int x) const noexcept {
    return (static_cast<std::size_t>(ch) * h + y) * w + x;
  }
  bool same_shape(const Feature& o) const { return c == o.c && h == o.h && w == o.w; }

  bool operator==(const Feature&) const = default;
};

enum class ProjectionKind { kConv, kLinear };
enum class NormKind { kBatch, kLayer };
enum class Activation { kRelu, kGelu };
// kSpatial compresses H x W by r and keeps C; kChannel keeps H x W and
// compresses C by r.
enum class Bottleneck { kSpatial, kChannel };

ProjectionKind parse_projection(std::string_view s);
NormKind parse_norm(std::string_view s);
Activation parse_activation(std::string_view s);
Bottleneck parse_bottleneck(std::string_view s);
std::string_view to_string(ProjectionKind k);
std::string_view to_string(NormKind k);
std::string_view to_string(Activation k);
std::string_view to_string(Bottleneck k);

// A(x) = up(act(down(norm(x)))).
//   conv down: k x k convolution with stride s, zero padding (k - 1) / 2.
//   linear down: s x s average pooling, then a learned channel-mixing map.
//   conv up: nearest upsampling by s, then a stride-1 k x k convolution.
//   linear up: a learned channel-mixing map, then nearest upsampling.
// s = r in spatial mode and 1 in channel mode.
struct AdapterSpec {
  ProjectionKind down = ProjectionKind::kConv;
  ProjectionKind up = ProjectionKind::kLinear;
  int kernel = 3;
  int ratio = 4;
  NormKind norm = NormKind::kBatch;
  Activation activation = Activation::kRelu;
  Bottleneck bottleneck = Bottleneck::kSpatial;
  int channels = 16;
  int height = 16;
  int width = 16;

  void validate() const;  // kInvalidSpec
  int stride() const { return bottleneck == Bottleneck::kSpatial ? ratio : 1; }
  int hidden_channels() const;
  int hidden_height() const;
  int hidden_width() const;

  bool operator==(const AdapterSpec&) const = default;
};

// Flat values with a declared shape.
struct ParamTensor {
  std::vector<int> shape;
  std::vector<double> values;

  static ParamTensor zeros(std::vector<int> shape);
  bool operator==(const ParamTensor&) const = default;
};

inline constexpr double kNormEpsilon = 1e-5;

struct AdapterState {
  ParamTensor down_weight;  // conv [Ch, C, k, k]; linear [Ch, C]
  ParamTensor down_bias;    // [Ch]
  ParamTensor up_weight;    // conv [C, Ch, k, k]; linear [C, Ch]
  ParamTensor up_bias;      // [C]
  ParamTensor norm_scale;   // [C]
  ParamTensor norm_shift;   // [C]
  // Batch norm only; not trainable.
  std::vector<double> running_mean;
  std::vector<double> running_var;

  void validate(const AdapterSpec& spec) const;  // kShapeMismatch
  std::vector<ParamTensor*> trainable();
  std::vector<const ParamTensor*> trainable() const;
  std::size_t trainable_count() const;

  bool operator==(const AdapterState&) const = default;
};

AdapterState adapter_init(const AdapterSpec& spec, std::uint64_t seed);

// Inference pass; batch norm uses the running statistics.
Feature adapter_forward(const AdapterSpec& spec, const AdapterState& state,
                        const Feature& x);

// Frozen per-pixel block B(x) = act(W x + b) over channels.
struct BlockStub {
  int channels = 0;
  std::vector<double> weight;  // [C, C] row-major
  std::vector<double> bias;    // [C]
  Activation activation = Activation::kGelu;

  static BlockStub random(int channels, std::uint64_t seed, double scale = 1.0,
                          Activation activation = Activation::kGelu);
  Feature forward(const Feature& x) const;

  bool operator==(const BlockStub&) const = default;
};

// y = B(x) + A(x); with bypass set, y = B(x).
Feature fused_forward(const BlockStub& block, const AdapterSpec& spec,
                      const AdapterState& state, const Feature& x,
                      bool bypass = false);

// Trainable parameters: conv k^2 Cin Cout + Cout, linear Cin Cout + Cout,
// norm 2 C.
std::size_t param_count(const AdapterSpec& spec);

// Gradients of a scalar loss with respect to the trainable tensors of one
// forward pass, accumulated into `grad` (same layout as state.trainable()).
// `g_out` is dLoss/dA(x).
void adapter_backward(const AdapterSpec& spec, const AdapterState& state,
                      const Feature& x, const Feature& g_out,
                      std::vector<ParamTensor>& grad);

// Sets the batch-norm running statistics to the exact moments of `xs`.
void set_batch_statistics(const AdapterSpec& spec, AdapterState& state,
                          const std::vector<Feature>& xs);

// --- label-efficient adaptation demo -------------------------------------

using ScalarFn = std::function<double(const Feature&)>;

// Scalar regressor readout(B(x)) with a linear readout over C x H x W.
struct RegressionModel {
  BlockStub block;
  std::vector<double> readout;  // [C * H * W]
  double readout_bias = 0.0;

  double predict(const Feature& block_out) const;
};

// Random teacher with the model's architecture.
ScalarFn make_teacher(int channels, int height, int width, std::uint64_t seed);
// gain * f(x) + offset.
ScalarFn affine_shift(ScalarFn f, double gain, double offset);

struct LedaConfig {
  int channels = 4;
  int height = 2;
  int width = 2;
  int source_samples = 1000;
  int target_samples = 8000;  // pool; k_percent of it is labeled
  int test_samples = 500;
  double k_percent = 0.05;
  int pretrain_steps = 5000;
  double pretrain_lr = 0.1;
  int steps = 800;
  double lr = 0.03;
  std::uint64_t seed = 1;
  AdapterSpec adapter;  // channels/height/width are overwritten

  void validate() const;  // kInvalidSpec
  static LedaConfig defaults();
};

struct LedaReport {
  double source_err = 0.0;            // pretrained model on held-out source
  double source_retention_err = 0.0;  // max |bypassed after - before|
  bool block_unchanged = false;
  double target_err_before = 0.0;     // RMSE, held-out target
  double target_err_after = 0.0;
  double relative_reduction = 0.0;
  std::size_t adapt_samples = 0;
  std::size_t adapter_params = 0;
  double final_loss = 0.0;
};

// Pretrains the model on source_fn with plain gradient descent, freezes it,
// then trains only the adapter with full-batch Adam (cosine-decayed step
// size) on k_percent of the target samples.
// Throws kDivergence when a loss turns non-finite.
LedaReport leda_demo(const ScalarFn& source_fn, const ScalarFn& target_fn,
                     const LedaConfig& config);

}  // namespace mvgc
