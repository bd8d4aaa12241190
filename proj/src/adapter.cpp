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

#include "mvgc/adapter.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Core>

#include "mvgc/error.hpp"

namespace mvgc {

namespace {

constexpr double kPi = 3.14159265358979323846;

int ceil_div(int a, int b) { return (a + b - 1) / b; }

std::size_t product(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int s : shape) n *= static_cast<std::size_t>(s);
  return n;
}

double activate(Activation a, double h) {
  if (a == Activation::kRelu) return h > 0.0 ? h : 0.0;
  return 0.5 * h * (1.0 + std::erf(h / std::sqrt(2.0)));
}

double activate_grad(Activation a, double h) {
  if (a == Activation::kRelu) return h > 0.0 ? 1.0 : 0.0;
  constexpr double kInvSqrt2Pi = 0.39894228040143267794;
  return 0.5 * (1.0 + std::erf(h / std::sqrt(2.0))) + h * kInvSqrt2Pi * std::exp(-0.5 * h * h);
}

// Zero-padded k x k convolution with the given stride.
Feature conv2d(const Feature& in, const ParamTensor& w, const ParamTensor& b,
               int stride, int out_h, int out_w) {
  const int cout = w.shape[0];
  const int cin = w.shape[1];
  const int k = w.shape[2];
  const int pad = (k - 1) / 2;
  Feature out(cout, out_h, out_w);
  for (int co = 0; co < cout; ++co) {
    for (int oy = 0; oy < out_h; ++oy) {
      for (int ox = 0; ox < out_w; ++ox) {
        double acc = b.values[static_cast<std::size_t>(co)];
        for (int ci = 0; ci < cin; ++ci) {
          for (int ky = 0; ky < k; ++ky) {
            const int iy = oy * stride + ky - pad;
            if (iy < 0 || iy >= in.h) continue;
            for (int kx = 0; kx < k; ++kx) {
              const int ix = ox * stride + kx - pad;
              if (ix < 0 || ix >= in.w) continue;
              acc += w.values[((static_cast<std::size_t>(co) * cin + ci) * k + ky) * k + kx] *
                     in.at(ci, iy, ix);
            }
          }
        }
        out.at(co, oy, ox) = acc;
      }
    }
  }
  return out;
}

void conv2d_backward(const Feature& in, const ParamTensor& w, int stride,
                     const Feature& g_out, ParamTensor& g_w, ParamTensor& g_b,
                     Feature* g_in) {
  const int cout = w.shape[0];
  const int cin = w.shape[1];
  const int k = w.shape[2];
  const int pad = (k - 1) / 2;
  for (int co = 0; co < cout; ++co) {
    for (int oy = 0; oy < g_out.h; ++oy) {
      for (int ox = 0; ox < g_out.w; ++ox) {
        const double g = g_out.at(co, oy, ox);
        if (g == 0.0) continue;
        g_b.values[static_cast<std::size_t>(co)] += g;
        for (int ci = 0; ci < cin; ++ci) {
          for (int ky = 0; ky < k; ++ky) {
            const int iy = oy * stride + ky - pad;
            if (iy < 0 || iy >= in.h) continue;
            for (int kx = 0; kx < k; ++kx) {
              const int ix = ox * stride + kx - pad;
              if (ix < 0 || ix >= in.w) continue;
              const std::size_t wi = ((static_cast<std::size_t>(co) * cin + ci) * k + ky) * k + kx;
              g_w.values[wi] += g * in.at(ci, iy, ix);
              if (g_in) g_in->at(ci, iy, ix) += g * w.values[wi];
            }
          }
        }
      }
    }
  }
}

// Per-position channel mixing.
Feature channel_mix(const Feature& in, const ParamTensor& w, const ParamTensor& b) {
  const int cout = w.shape[0];
  const int cin = w.shape[1];
  Feature out(cout, in.h, in.w);
  for (int co = 0; co < cout; ++co) {
    for (int y = 0; y < in.h; ++y) {
      for (int x = 0; x < in.w; ++x) {
        double acc = b.values[static_cast<std::size_t>(co)];
        for (int ci = 0; ci < cin; ++ci) {
          acc += w.values[static_cast<std::size_t>(co) * cin + ci] * in.at(ci, y, x);
        }
        out.at(co, y, x) = acc;
      }
    }
  }
  return out;
}

void channel_mix_backward(const Feature& in, const ParamTensor& w, const Feature& g_out,
                          ParamTensor& g_w, ParamTensor& g_b, Feature* g_in) {
  const int cout = w.shape[0];
  const int cin = w.shape[1];
  for (int co = 0; co < cout; ++co) {
    for (int y = 0; y < in.h; ++y) {
      for (int x = 0; x < in.w; ++x) {
        const double g = g_out.at(co, y, x);
        g_b.values[static_cast<std::size_t>(co)] += g;
        for (int ci = 0; ci < cin; ++ci) {
          g_w.values[static_cast<std::size_t>(co) * cin + ci] += g * in.at(ci, y, x);
          if (g_in) g_in->at(ci, y, x) += g * w.values[static_cast<std::size_t>(co) * cin + ci];
        }
      }
    }
  }
}

Feature average_pool(const Feature& in, int s, int out_h, int out_w) {
  Feature out(in.c, out_h, out_w);
  for (int c = 0; c < in.c; ++c) {
    for (int oy = 0; oy < out_h; ++oy) {
      for (int ox = 0; ox < out_w; ++ox) {
        double acc = 0.0;
        int n = 0;
        for (int y = oy * s; y < std::min(in.h, oy * s + s); ++y) {
          for (int x = ox * s; x < std::min(in.w, ox * s + s); ++x) {
            acc += in.at(c, y, x);
            ++n;
          }
        }
        out.at(c, oy, ox) = acc / n;
      }
    }
  }
  return out;
}

Feature upsample_nearest(const Feature& in, int s, int out_h, int out_w) {
  Feature out(in.c, out_h, out_w);
  for (int c = 0; c < in.c; ++c) {
    for (int y = 0; y < out_h; ++y) {
      for (int x = 0; x < out_w; ++x) out.at(c, y, x) = in.at(c, y / s, x / s);
    }
  }
  return out;
}

struct Forward {
  Feature xhat;
  Feature n;
  Feature pooled;  // linear down input
  Feature h;
  Feature a;
  Feature u;       // conv up input
  Feature o;
};

Feature normalize(const AdapterSpec& spec, const AdapterState& st, const Feature& x) {
  Feature xhat(x.c, x.h, x.w);
  if (spec.norm == NormKind::kBatch) {
    for (int c = 0; c < x.c; ++c) {
      const double mu = st.running_mean[static_cast<std::size_t>(c)];
      const double inv = 1.0 / std::sqrt(st.running_var[static_cast<std::size_t>(c)] + kNormEpsilon);
      for (int y = 0; y < x.h; ++y) {
        for (int xx = 0; xx < x.w; ++xx) xhat.at(c, y, xx) = (x.at(c, y, xx) - mu) * inv;
      }
    }
  } else {
    for (int y = 0; y < x.h; ++y) {
      for (int xx = 0; xx < x.w; ++xx) {
        double mu = 0.0;
        for (int c = 0; c < x.c; ++c) mu += x.at(c, y, xx);
        mu /= x.c;
        double var = 0.0;
        for (int c = 0; c < x.c; ++c) var += (x.at(c, y, xx) - mu) * (x.at(c, y, xx) - mu);
        var /= x.c;
        const double inv = 1.0 / std::sqrt(var + kNormEpsilon);
        for (int c = 0; c < x.c; ++c) xhat.at(c, y, xx) = (x.at(c, y, xx) - mu) * inv;
      }
    }
  }
  return xhat;
}

void check_input(const AdapterSpec& spec, const Feature& x) {
  if (x.c != spec.channels || x.h != spec.height || x.w != spec.width ||
      x.v.size() != static_cast<std::size_t>(x.c) * x.h * x.w) {
    throw Error(ErrorCode::kShapeMismatch,
                "input " + std::to_string(x.c) + "x" + std::to_string(x.h) + "x" +
                    std::to_string(x.w) + " vs adapter " + std::to_string(spec.channels) +
                    "x" + std::to_string(spec.height) + "x" + std::to_string(spec.width));
  }
}

Forward run_forward(const AdapterSpec& spec, const AdapterState& st, const Feature& x) {
  check_input(spec, x);
  Forward f;
  f.xhat = normalize(spec, st, x);
  f.n = f.xhat;
  for (int c = 0; c < x.c; ++c) {
    const double g = st.norm_scale.values[static_cast<std::size_t>(c)];
    const double b = st.norm_shift.values[static_cast<std::size_t>(c)];
    for (int y = 0; y < x.h; ++y) {
      for (int xx = 0; xx < x.w; ++xx) f.n.at(c, y, xx) = g * f.xhat.at(c, y, xx) + b;
    }
  }
  const int s = spec.stride();
  const int hh = spec.hidden_height();
  const int hw = spec.hidden_width();
  if (spec.down == ProjectionKind::kConv) {
    f.h = conv2d(f.n, st.down_weight, st.down_bias, s, hh, hw);
  } else {
    f.pooled = average_pool(f.n, s, hh, hw);
    f.h = channel_mix(f.pooled, st.down_weight, st.down_bias);
  }
  f.a = f.h;
  for (double& v : f.a.v) v = activate(spec.activation, v);
  if (spec.up == ProjectionKind::kConv) {
    f.u = upsample_nearest(f.a, s, spec.height, spec.width);
    f.o = conv2d(f.u, st.up_weight, st.up_bias, 1, spec.height, spec.width);
  } else {
    f.o = upsample_nearest(channel_mix(f.a, st.up_weight, st.up_bias), s, spec.height,
                           spec.width);
  }
  return f;
}

void check_shape(const ParamTensor& t, const std::vector<int>& shape, const char* name) {
  if (t.shape != shape || t.values.size() != product(shape)) {
    throw Error(ErrorCode::kShapeMismatch, std::string("adapter tensor ") + name);
  }
  for (double v : t.values) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kShapeMismatch, std::string("non-finite ") + name);
  }
}

std::vector<int> down_shape(const AdapterSpec& s) {
  if (s.down == ProjectionKind::kConv) return {s.hidden_channels(), s.channels, s.kernel, s.kernel};
  return {s.hidden_channels(), s.channels};
}

std::vector<int> up_shape(const AdapterSpec& s) {
  if (s.up == ProjectionKind::kConv) return {s.channels, s.hidden_channels(), s.kernel, s.kernel};
  return {s.channels, s.hidden_channels()};
}

std::vector<Feature> random_inputs(int n, int c, int h, int w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Feature> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Feature f(c, h, w);
    for (double& v : f.v) v = normal(rng);
    out.push_back(std::move(f));
  }
  return out;
}

double rmse(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(acc / static_cast<double>(a.size()));
}

RegressionModel random_model(int c, int h, int w, std::uint64_t seed) {
  RegressionModel m;
  m.block = BlockStub::random(c, seed, 0.6);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(c) * h * w));
  m.readout.resize(static_cast<std::size_t>(c) * h * w);
  for (double& v : m.readout) v = 2.0 * normal(rng);
  return m;
}

void require_finite(double loss, const char* phase) {
  if (!std::isfinite(loss)) {
    throw Error(ErrorCode::kDivergence, std::string(phase) + " loss became non-finite");
  }
}

}  // namespace

Feature::Feature(int channels, int height, int width, double fill)
    : c(channels), h(height), w(width) {
  if (channels < 0 || height < 0 || width < 0) {
    throw Error(ErrorCode::kShapeMismatch, "negative feature shape");
  }
  v.assign(static_cast<std::size_t>(channels) * height * width, fill);
}

ProjectionKind parse_projection(std::string_view s) {
  if (s == "conv") return ProjectionKind::kConv;
  if (s == "linear") return ProjectionKind::kLinear;
  throw Error(ErrorCode::kInvalidSpec, "projection must be conv or linear, got " + std::string(s));
}

NormKind parse_norm(std::string_view s) {
  if (s == "batch") return NormKind::kBatch;
  if (s == "layer") return NormKind::kLayer;
  throw Error(ErrorCode::kInvalidSpec, "norm must be batch or layer, got " + std::string(s));
}

Activation parse_activation(std::string_view s) {
  if (s == "relu") return Activation::kRelu;
  if (s == "gelu") return Activation::kGelu;
  throw Error(ErrorCode::kInvalidSpec, "activation must be relu or gelu, got " + std::string(s));
}

Bottleneck parse_bottleneck(std::string_view s) {
  if (s == "spatial") return Bottleneck::kSpatial;
  if (s == "channel") return Bottleneck::kChannel;
  throw Error(ErrorCode::kInvalidSpec, "bottleneck must be spatial or channel, got " + std::string(s));
}

std::string_view to_string(ProjectionKind k) { return k == ProjectionKind::kConv ? "conv" : "linear"; }
std::string_view to_string(NormKind k) { return k == NormKind::kBatch ? "batch" : "layer"; }
std::string_view to_string(Activation k) { return k == Activation::kRelu ? "relu" : "gelu"; }
std::string_view to_string(Bottleneck k) { return k == Bottleneck::kSpatial ? "spatial" : "channel"; }

void AdapterSpec::validate() const {
  if (channels < 1 || height < 1 || width < 1) {
    throw Error(ErrorCode::kInvalidSpec, "adapter shape must be positive");
  }
  if (ratio < 1) throw Error(ErrorCode::kInvalidSpec, "ratio must be >= 1");
  if (kernel < 1 || kernel % 2 == 0) throw Error(ErrorCode::kInvalidSpec, "kernel must be odd");
}

int AdapterSpec::hidden_channels() const {
  return bottleneck == Bottleneck::kSpatial ? channels : ceil_div(channels, ratio);
}
int AdapterSpec::hidden_height() const { return ceil_div(height, stride()); }
int AdapterSpec::hidden_width() const { return ceil_div(width, stride()); }

ParamTensor ParamTensor::zeros(std::vector<int> shape) {
  ParamTensor t;
  t.values.assign(product(shape), 0.0);
  t.shape = std::move(shape);
  return t;
}

void AdapterState::validate(const AdapterSpec& spec) const {
  spec.validate();
  check_shape(down_weight, down_shape(spec), "down.weight");
  check_shape(down_bias, {spec.hidden_channels()}, "down.bias");
  check_shape(up_weight, up_shape(spec), "up.weight");
  check_shape(up_bias, {spec.channels}, "up.bias");
  check_shape(norm_scale, {spec.channels}, "norm.scale");
  check_shape(norm_shift, {spec.channels}, "norm.shift");
  const std::size_t stats = spec.norm == NormKind::kBatch ? static_cast<std::size_t>(spec.channels) : 0;
  if (running_mean.size() != stats || running_var.size() != stats) {
    throw Error(ErrorCode::kShapeMismatch, "adapter running statistics");
  }
  for (double v : running_var) {
    if (!(v >= 0.0)) throw Error(ErrorCode::kShapeMismatch, "negative running variance");
  }
}

std::vector<ParamTensor*> AdapterState::trainable() {
  return {&down_weight, &down_bias, &up_weight, &up_bias, &norm_scale, &norm_shift};
}

std::vector<const ParamTensor*> AdapterState::trainable() const {
  return {&down_weight, &down_bias, &up_weight, &up_bias, &norm_scale, &norm_shift};
}

std::size_t AdapterState::trainable_count() const {
  std::size_t n = 0;
  for (const auto* t : trainable()) n += t->values.size();
  return n;
}

AdapterState adapter_init(const AdapterSpec& spec, std::uint64_t seed) {
  spec.validate();
  AdapterState st;
  st.down_weight = ParamTensor::zeros(down_shape(spec));
  st.down_bias = ParamTensor::zeros({spec.hidden_channels()});
  st.up_weight = ParamTensor::zeros(up_shape(spec));
  st.up_bias = ParamTensor::zeros({spec.channels});
  st.norm_scale = ParamTensor::zeros({spec.channels});
  st.norm_shift = ParamTensor::zeros({spec.channels});
  std::fill(st.norm_scale.values.begin(), st.norm_scale.values.end(), 1.0);
  if (spec.norm == NormKind::kBatch) {
    st.running_mean.assign(static_cast<std::size_t>(spec.channels), 0.0);
    st.running_var.assign(static_cast<std::size_t>(spec.channels), 1.0);
  }
  const int fan_in = spec.channels * (spec.down == ProjectionKind::kConv ? spec.kernel * spec.kernel : 1);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(fan_in)));
  for (double& v : st.down_weight.values) v = normal(rng);
  return st;
}

Feature adapter_forward(const AdapterSpec& spec, const AdapterState& state, const Feature& x) {
  state.validate(spec);
  return run_forward(spec, state, x).o;
}

namespace {

void backward_from(const AdapterSpec& spec, const AdapterState& st, const Forward& f,
                   const Feature& g_out, std::vector<ParamTensor>& grad) {
  const int s = spec.stride();
  Feature g_a(f.a.c, f.a.h, f.a.w);
  if (spec.up == ProjectionKind::kConv) {
    Feature g_u(f.u.c, f.u.h, f.u.w);
    conv2d_backward(f.u, st.up_weight, 1, g_out, grad[2], grad[3], &g_u);
    for (int c = 0; c < g_u.c; ++c) {
      for (int y = 0; y < g_u.h; ++y) {
        for (int xx = 0; xx < g_u.w; ++xx) g_a.at(c, y / s, xx / s) += g_u.at(c, y, xx);
      }
    }
  } else {
    Feature g_small(spec.channels, f.a.h, f.a.w);
    for (int c = 0; c < g_out.c; ++c) {
      for (int y = 0; y < g_out.h; ++y) {
        for (int xx = 0; xx < g_out.w; ++xx) g_small.at(c, y / s, xx / s) += g_out.at(c, y, xx);
      }
    }
    channel_mix_backward(f.a, st.up_weight, g_small, grad[2], grad[3], &g_a);
  }
  Feature g_h = g_a;
  for (std::size_t i = 0; i < g_h.v.size(); ++i) g_h.v[i] *= activate_grad(spec.activation, f.h.v[i]);
  Feature g_n(f.n.c, f.n.h, f.n.w);
  if (spec.down == ProjectionKind::kConv) {
    conv2d_backward(f.n, st.down_weight, s, g_h, grad[0], grad[1], &g_n);
  } else {
    Feature g_pooled(f.pooled.c, f.pooled.h, f.pooled.w);
    channel_mix_backward(f.pooled, st.down_weight, g_h, grad[0], grad[1], &g_pooled);
    for (int c = 0; c < g_n.c; ++c) {
      for (int y = 0; y < g_n.h; ++y) {
        for (int xx = 0; xx < g_n.w; ++xx) {
          const int oy = y / s;
          const int ox = xx / s;
          const int ny = std::min(g_n.h, oy * s + s) - oy * s;
          const int nx = std::min(g_n.w, ox * s + s) - ox * s;
          g_n.at(c, y, xx) = g_pooled.at(c, oy, ox) / (ny * nx);
        }
      }
    }
  }
  for (int c = 0; c < g_n.c; ++c) {
    for (int y = 0; y < g_n.h; ++y) {
      for (int xx = 0; xx < g_n.w; ++xx) {
        grad[4].values[static_cast<std::size_t>(c)] += g_n.at(c, y, xx) * f.xhat.at(c, y, xx);
        grad[5].values[static_cast<std::size_t>(c)] += g_n.at(c, y, xx);
      }
    }
  }
}

}  // namespace

void adapter_backward(const AdapterSpec& spec, const AdapterState& st, const Feature& x,
                      const Feature& g_out, std::vector<ParamTensor>& grad) {
  st.validate(spec);
  if (grad.empty()) {
    for (const auto* t : st.trainable()) grad.push_back(ParamTensor::zeros(t->shape));
  }
  if (grad.size() != 6 || !g_out.same_shape(x)) {
    throw Error(ErrorCode::kShapeMismatch, "adapter gradient buffers");
  }
  backward_from(spec, st, run_forward(spec, st, x), g_out, grad);
}

void set_batch_statistics(const AdapterSpec& spec, AdapterState& state,
                          const std::vector<Feature>& xs) {
  if (spec.norm != NormKind::kBatch || xs.empty()) return;
  const std::size_t c = static_cast<std::size_t>(spec.channels);
  std::vector<double> sum(c, 0.0), sq(c, 0.0);
  double n = 0.0;
  for (const auto& x : xs) {
    check_input(spec, x);
    const std::size_t plane = static_cast<std::size_t>(x.h) * x.w;
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t i = 0; i < plane; ++i) sum[ch] += x.v[ch * plane + i];
    }
    n += static_cast<double>(plane);
  }
  for (std::size_t ch = 0; ch < c; ++ch) sum[ch] /= n;
  for (const auto& x : xs) {
    const std::size_t plane = static_cast<std::size_t>(x.h) * x.w;
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t i = 0; i < plane; ++i) {
        const double d = x.v[ch * plane + i] - sum[ch];
        sq[ch] += d * d;
      }
    }
  }
  state.running_mean = sum;
  state.running_var.resize(c);
  for (std::size_t ch = 0; ch < c; ++ch) state.running_var[ch] = sq[ch] / n;
}

BlockStub BlockStub::random(int channels, std::uint64_t seed, double scale,
                            Activation activation) {
  if (channels < 1) throw Error(ErrorCode::kInvalidSpec, "block channels must be >= 1");
  BlockStub b;
  b.channels = channels;
  b.activation = activation;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  b.weight.resize(static_cast<std::size_t>(channels) * channels);
  for (double& v : b.weight) v = scale * normal(rng) / std::sqrt(static_cast<double>(channels));
  b.bias.resize(static_cast<std::size_t>(channels));
  for (double& v : b.bias) v = 0.1 * normal(rng);
  return b;
}

Feature BlockStub::forward(const Feature& x) const {
  if (x.c != channels) throw Error(ErrorCode::kShapeMismatch, "block channel count");
  Feature y(x.c, x.h, x.w);
  for (int co = 0; co < channels; ++co) {
    for (int p = 0; p < x.h * x.w; ++p) {
      double acc = bias[static_cast<std::size_t>(co)];
      for (int ci = 0; ci < channels; ++ci) {
        acc += weight[static_cast<std::size_t>(co) * channels + ci] *
               x.v[static_cast<std::size_t>(ci) * x.h * x.w + p];
      }
      y.v[static_cast<std::size_t>(co) * x.h * x.w + p] = activate(activation, acc);
    }
  }
  return y;
}

Feature fused_forward(const BlockStub& block, const AdapterSpec& spec,
                      const AdapterState& state, const Feature& x, bool bypass) {
  check_input(spec, x);
  Feature y = block.forward(x);
  if (bypass) return y;
  const Feature a = adapter_forward(spec, state, x);
  for (std::size_t i = 0; i < y.v.size(); ++i) y.v[i] += a.v[i];
  return y;
}

std::size_t param_count(const AdapterSpec& spec) {
  spec.validate();
  const std::size_t c = static_cast<std::size_t>(spec.channels);
  const std::size_t ch = static_cast<std::size_t>(spec.hidden_channels());
  const std::size_t k2 = static_cast<std::size_t>(spec.kernel) * spec.kernel;
  auto layer = [&](ProjectionKind kind, std::size_t cin, std::size_t cout) {
    return (kind == ProjectionKind::kConv ? k2 : 1) * cin * cout + cout;
  };
  return layer(spec.down, c, ch) + layer(spec.up, ch, c) + 2 * c;
}

double RegressionModel::predict(const Feature& block_out) const {
  double acc = readout_bias;
  for (std::size_t i = 0; i < readout.size(); ++i) acc += readout[i] * block_out.v[i];
  return acc;
}

ScalarFn make_teacher(int channels, int height, int width, std::uint64_t seed) {
  const RegressionModel m = random_model(channels, height, width, seed);
  return [m](const Feature& x) { return m.predict(m.block.forward(x)); };
}

ScalarFn affine_shift(ScalarFn f, double gain, double offset) {
  return [f = std::move(f), gain, offset](const Feature& x) { return gain * f(x) + offset; };
}

void LedaConfig::validate() const {
  if (!(k_percent > 0.0 && k_percent <= 1.0)) {
    throw Error(ErrorCode::kInvalidSpec, "k_percent must lie in (0, 1]");
  }
  if (channels < 1 || height < 1 || width < 1 || source_samples < 1 || target_samples < 1 ||
      test_samples < 1 || steps < 0 || pretrain_steps < 0) {
    throw Error(ErrorCode::kInvalidSpec, "demo sizes must be positive");
  }
  if (!(lr > 0.0) || !(pretrain_lr > 0.0)) throw Error(ErrorCode::kInvalidSpec, "learning rates must be > 0");
}

LedaConfig LedaConfig::defaults() {
  LedaConfig c;
  // Channel bottleneck with 1x1 projections: the shift to undo is per-pixel
  // affine in the readout, so spatial capacity only adds variance at k = 5%.
  c.adapter.down = ProjectionKind::kConv;
  c.adapter.up = ProjectionKind::kConv;
  c.adapter.kernel = 1;
  c.adapter.ratio = 1;
  c.adapter.bottleneck = Bottleneck::kChannel;
  c.adapter.activation = Activation::kGelu;
  return c;
}

LedaReport leda_demo(const ScalarFn& source_fn, const ScalarFn& target_fn,
                     const LedaConfig& config) {
  config.validate();
  AdapterSpec spec = config.adapter;
  spec.channels = config.channels;
  spec.height = config.height;
  spec.width = config.width;
  spec.validate();
  const int C = config.channels, H = config.height, W = config.width;

  const auto src_train = random_inputs(config.source_samples, C, H, W, config.seed * 4 + 1);
  const auto src_test = random_inputs(config.test_samples, C, H, W, config.seed * 4 + 2);
  const auto tgt_pool = random_inputs(config.target_samples, C, H, W, config.seed * 4 + 3);
  const auto tgt_test = random_inputs(config.test_samples, C, H, W, config.seed * 4 + 4);
  auto labels = [](const ScalarFn& fn, const std::vector<Feature>& xs) {
    std::vector<double> y;
    y.reserve(xs.size());
    for (const auto& x : xs) y.push_back(fn(x));
    return y;
  };
  const auto y_src = labels(source_fn, src_train);
  const auto y_src_test = labels(source_fn, src_test);
  const auto y_tgt = labels(target_fn, tgt_pool);
  const auto y_tgt_test = labels(target_fn, tgt_test);

  // Pretraining: plain full-batch gradient descent on block and readout.
  // Samples are stacked column-wise so the per-pixel block is one product.
  RegressionModel model = random_model(C, H, W, config.seed * 4 + 5);
  const Eigen::Index plane = static_cast<Eigen::Index>(H) * W;
  const Eigen::Index n_src = static_cast<Eigen::Index>(src_train.size());
  Eigen::MatrixXd xs(C, n_src * plane);
  for (Eigen::Index i = 0; i < n_src; ++i) {
    xs.middleCols(i * plane, plane) =
        Eigen::Map<const Eigen::MatrixXd>(src_train[static_cast<std::size_t>(i)].v.data(), plane, C)
            .transpose();
  }
  const Eigen::Map<const Eigen::VectorXd> ys(y_src.data(), n_src);
  for (int step = 0; step < config.pretrain_steps; ++step) {
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> wm(
        model.block.weight.data(), C, C);
    Eigen::Map<Eigen::VectorXd> bv(model.block.bias.data(), C);
    Eigen::Map<Eigen::MatrixXd> rm(model.readout.data(), plane, C);  // [c][p] layout
    const Activation act = model.block.activation;
    const Eigen::MatrixXd z = (wm * xs).colwise() + bv;
    const Eigen::MatrixXd f = z.unaryExpr([act](double v) { return activate(act, v); });
    const Eigen::MatrixXd df = z.unaryExpr([act](double v) { return activate_grad(act, v); });
    const Eigen::MatrixXd rt = rm.transpose();                        // C x plane
    Eigen::VectorXd err(n_src);
    for (Eigen::Index i = 0; i < n_src; ++i) {
      err[i] = (rt.array() * f.middleCols(i * plane, plane).array()).sum() + model.readout_bias - ys[i];
    }
    const double loss = err.squaredNorm() / static_cast<double>(n_src);
    require_finite(loss, "pretraining");
    const Eigen::VectorXd e = 2.0 * err / static_cast<double>(n_src);
    Eigen::MatrixXd g_r = Eigen::MatrixXd::Zero(C, plane);
    Eigen::MatrixXd g_z(C, n_src * plane);
    for (Eigen::Index i = 0; i < n_src; ++i) {
      const auto fi = f.middleCols(i * plane, plane);
      g_r += e[i] * fi;
      g_z.middleCols(i * plane, plane) =
          (e[i] * rt.array() * df.middleCols(i * plane, plane).array()).matrix();
    }
    const Eigen::MatrixXd g_w = g_z * xs.transpose();
    const Eigen::VectorXd g_b = g_z.rowwise().sum();
    wm -= config.pretrain_lr * g_w;
    bv -= config.pretrain_lr * g_b;
    rm -= config.pretrain_lr * g_r.transpose();
    model.readout_bias -= config.pretrain_lr * e.sum();
  }

  const BlockStub frozen = model.block;
  AdapterState state = adapter_init(spec, config.seed * 4 + 6);
  auto predict_all = [&](const std::vector<Feature>& xs, bool bypass) {
    std::vector<double> out;
    out.reserve(xs.size());
    for (const auto& x : xs) out.push_back(model.predict(fused_forward(model.block, spec, state, x, bypass)));
    return out;
  };

  LedaReport report;
  const auto src_before = predict_all(src_test, true);
  report.source_err = rmse(src_before, y_src_test);

  const std::size_t n_adapt = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(config.k_percent * config.target_samples)));
  const std::vector<Feature> adapt_x(tgt_pool.begin(), tgt_pool.begin() + static_cast<long>(n_adapt));
  const std::vector<double> adapt_y(y_tgt.begin(), y_tgt.begin() + static_cast<long>(n_adapt));
  report.adapt_samples = n_adapt;
  report.adapter_params = state.trainable_count();
  set_batch_statistics(spec, state, adapt_x);

  report.target_err_before = rmse(predict_all(tgt_test, false), y_tgt_test);

  // Adaptation: Adam on the adapter only; block and readout stay frozen.
  std::vector<Feature> block_out;
  block_out.reserve(adapt_x.size());
  for (const auto& x : adapt_x) block_out.push_back(model.block.forward(x));
  std::vector<ParamTensor> m, v;
  for (const auto* t : state.trainable()) {
    m.push_back(ParamTensor::zeros(t->shape));
    v.push_back(ParamTensor::zeros(t->shape));
  }
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kAdamEps = 1e-8;
  const double n_adapt_d = static_cast<double>(n_adapt);
  double loss = 0.0;
  for (int step = 1; step <= config.steps; ++step) {
    std::vector<ParamTensor> grad;
    for (const auto* t : state.trainable()) grad.push_back(ParamTensor::zeros(t->shape));
    loss = 0.0;
    for (std::size_t i = 0; i < n_adapt; ++i) {
      const Forward fw = run_forward(spec, state, adapt_x[i]);
      const Feature& a = fw.o;
      double pred = model.readout_bias;
      for (std::size_t k = 0; k < a.v.size(); ++k) pred += model.readout[k] * (block_out[i].v[k] + a.v[k]);
      const double err = pred - adapt_y[i];
      loss += err * err / n_adapt_d;
      Feature g_out(C, H, W);
      for (std::size_t k = 0; k < g_out.v.size(); ++k) g_out.v[k] = 2.0 * err / n_adapt_d * model.readout[k];
      backward_from(spec, state, fw, g_out, grad);
    }
    require_finite(loss, "adaptation");
    const double lr = 0.5 * config.lr * (1.0 + std::cos(kPi * (step - 1) / config.steps));
    const double c1 = 1.0 - std::pow(kBeta1, step);
    const double c2 = 1.0 - std::pow(kBeta2, step);
    auto params = state.trainable();
    for (std::size_t t = 0; t < params.size(); ++t) {
      for (std::size_t k = 0; k < params[t]->values.size(); ++k) {
        const double g = grad[t].values[k];
        m[t].values[k] = kBeta1 * m[t].values[k] + (1.0 - kBeta1) * g;
        v[t].values[k] = kBeta2 * v[t].values[k] + (1.0 - kBeta2) * g * g;
        params[t]->values[k] -= lr * (m[t].values[k] / c1) / (std::sqrt(v[t].values[k] / c2) + kAdamEps);
      }
    }
  }
  report.final_loss = loss;
  report.target_err_after = rmse(predict_all(tgt_test, false), y_tgt_test);
  report.relative_reduction = report.target_err_before > 0.0
                                  ? 1.0 - report.target_err_after / report.target_err_before
                                  : 0.0;

  const auto src_after = predict_all(src_test, true);
  double retention = 0.0;
  for (std::size_t i = 0; i < src_after.size(); ++i) {
    retention = std::max(retention, std::abs(src_after[i] - src_before[i]));
  }
  report.source_retention_err = retention;
  report.block_unchanged = model.block == frozen;
  return report;
}

}  // namespace mvgc
