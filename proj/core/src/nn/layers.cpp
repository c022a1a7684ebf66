// Copyright 2026 The gradw Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "gradw/nn/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace gradw {
namespace {

template <typename T>
Tensor<T> gaussian_tensor(Shape shape, double stddev, Rng& rng) {
  Tensor<T> t(std::move(shape));
  for (auto& v : t.values()) v = static_cast<T>(gaussian(rng, 0.0, stddev));
  return t;
}

Extent2 extent_of(const Shape& s) { return Extent2{s[s.size() - 2], s[s.size() - 1]}; }

}  // namespace

template <typename T>
Conv2d<T>::Conv2d(ParamSet<T>& params, const std::string& name, std::size_t in, std::size_t out,
                  std::size_t kernel, std::size_t stride, ConvMode mode, bool bias, Rng& rng)
    : stride_(stride), pad_(kernel / 2), mode_(mode) {
  const Shape shape = mode == ConvMode::forward ? Shape{out, in, kernel, kernel}
                                                : Shape{in, out, kernel, kernel};
  const double fan_in = static_cast<double>(in * kernel * kernel);
  weight_ = params.add(name + ".weight", gaussian_tensor<T>(shape, std::sqrt(2.0 / fan_in), rng));
  if (bias) bias_ = params.add(name + ".bias", Tensor<T>(Shape{out}));
}

template <typename T>
Var<T> Conv2d<T>::operator()(Context<T>& ctx, const Var<T>& x,
                             std::optional<Extent2> output_extent) const {
  const Var<T> w = ctx.tape.parameter(ctx.params, weight_);
  std::optional<Var<T>> b;
  if (bias_) b = ctx.tape.parameter(ctx.params, *bias_);
  return conv_layer(x, w, b, mode_, Extent2{stride_, stride_}, Extent2{pad_, pad_}, output_extent);
}

template <typename T>
Norm2d<T>::Norm2d(ParamSet<T>& params, const std::string& name, std::size_t channels,
                  NormMode mode)
    : mode_(mode) {
  scale_ = params.add(name + ".scale", Tensor<T>(Shape{channels}, T(1)));
  shift_ = params.add(name + ".shift", Tensor<T>(Shape{channels}, T(0)));
  if (mode == NormMode::batch) {
    running_mean_ = params.add(name + ".running_mean", Tensor<T>(Shape{channels}, T(0)), false);
    running_var_ = params.add(name + ".running_var", Tensor<T>(Shape{channels}, T(1)), false);
  }
}

template <typename T>
Var<T> Norm2d<T>::operator()(Context<T>& ctx, const Var<T>& x) const {
  const Var<T> g = ctx.tape.parameter(ctx.params, scale_);
  const Var<T> b = ctx.tape.parameter(ctx.params, shift_);
  constexpr T eps = T(1e-5);
  if (mode_ == NormMode::instance) {
    return normalize_2d(x, NormMode::instance, g, b, ctx.stats, eps);
  }
  // Frozen sets never move their running statistics.
  if (ctx.params.frozen() && ctx.stats == StatsMode::train) {
    throw FrozenError("batch norm in train mode on a frozen parameter set");
  }
  RunningStats<T> rs{&ctx.params[running_mean_].value, &ctx.params[running_var_].value,
                     ctx.bn_momentum};
  return normalize_2d(x, NormMode::batch, g, b, ctx.stats, eps, &rs);
}

template <typename T>
Linear<T>::Linear(ParamSet<T>& params, const std::string& name, std::size_t in, std::size_t out,
                  Rng& rng) {
  weight_ = params.add(name + ".weight",
                       gaussian_tensor<T>(Shape{out, in}, std::sqrt(1.0 / static_cast<double>(in)), rng));
  bias_ = params.add(name + ".bias", Tensor<T>(Shape{out}));
}

template <typename T>
Var<T> Linear<T>::operator()(Context<T>& ctx, const Var<T>& x) const {
  return affine(x, ctx.tape.parameter(ctx.params, weight_), ctx.tape.parameter(ctx.params, bias_));
}

template <typename T>
ResidualBlock<T>::ResidualBlock(ParamSet<T>& params, const std::string& name, std::size_t in,
                                std::size_t out, std::size_t stride, Rng& rng)
    : project_(stride != 1 || in != out) {
  conv1_ = Conv2d<T>(params, name + ".conv1", in, out, 3, stride, ConvMode::forward, false, rng);
  bn1_ = Norm2d<T>(params, name + ".bn1", out, NormMode::batch);
  conv2_ = Conv2d<T>(params, name + ".conv2", out, out, 3, 1, ConvMode::forward, false, rng);
  bn2_ = Norm2d<T>(params, name + ".bn2", out, NormMode::batch);
  if (project_) {
    proj_ = Conv2d<T>(params, name + ".proj", in, out, 1, stride, ConvMode::forward, false, rng);
    proj_bn_ = Norm2d<T>(params, name + ".proj_bn", out, NormMode::batch);
  }
}

template <typename T>
Var<T> ResidualBlock<T>::operator()(Context<T>& ctx, const Var<T>& x) const {
  Var<T> h = relu(bn1_(ctx, conv1_(ctx, x)));
  h = bn2_(ctx, conv2_(ctx, h));
  const Var<T> shortcut = project_ ? proj_bn_(ctx, proj_(ctx, x)) : x;
  return relu(add(h, shortcut));
}

void EncoderConfig::validate() const {
  if (first_channels == 0) throw std::invalid_argument("encoder: first_channels must be positive");
  for (std::size_t d : depths) {
    if (d < 2 || d % 2 != 0) {
      throw std::invalid_argument("encoder: stage depth must be a positive even number of "
                                  "convolution layers, got " + std::to_string(d));
    }
  }
}

template <typename T>
FrameEncoder<T>::FrameEncoder(ParamSet<T>& params, const std::string& prefix,
                              const EncoderConfig& cfg, Rng& rng) {
  cfg.validate();
  stem_conv_ = Conv2d<T>(params, prefix + ".stem", 1, cfg.first_channels, 3, 1, ConvMode::forward,
                         false, rng);
  stem_bn_ = Norm2d<T>(params, prefix + ".stem_bn", cfg.first_channels, NormMode::batch);
  std::size_t in = cfg.first_channels;
  for (std::size_t s = 0; s < 4; ++s) {
    const std::size_t out = cfg.stage_channels(s);
    std::vector<ResidualBlock<T>> blocks;
    for (std::size_t b = 0; b < cfg.depths[s] / 2; ++b) {
      blocks.emplace_back(params, prefix + ".stage" + std::to_string(s) + ".block" + std::to_string(b),
                          b == 0 ? in : out, out, b == 0 ? 2 : 1, rng);
    }
    stages_.push_back(std::move(blocks));
    in = out;
  }
}

template <typename T>
typename FrameEncoder<T>::Output FrameEncoder<T>::operator()(Context<T>& ctx,
                                                            const Var<T>& x) const {
  Output out;
  out.input_extent = extent_of(x.shape());
  out.stem = relu(stem_bn_(ctx, stem_conv_(ctx, x)));
  Var<T> h = out.stem;
  for (std::size_t s = 0; s < 4; ++s) {
    for (const auto& block : stages_[s]) h = block(ctx, h);
    out.stages[s] = h;
    out.stage_extents[s] = extent_of(h.shape());
  }
  return out;
}

template <typename T>
Tensor<T> stack_features(const std::vector<const FeatureMap*>& maps) {
  if (maps.empty()) throw std::invalid_argument("stack_features: no feature maps");
  const std::size_t frames = maps[0]->frames, bins = maps[0]->bins;
  Tensor<T> out(Shape{maps.size(), 1, frames, bins});
  for (std::size_t i = 0; i < maps.size(); ++i) {
    if (maps[i]->frames != frames || maps[i]->bins != bins) {
      throw ShapeError("stack_features: feature maps differ in shape");
    }
    std::copy(maps[i]->values.begin(), maps[i]->values.end(), out.data() + i * frames * bins);
  }
  return out;
}

template class Conv2d<float>;
template class Conv2d<double>;
template class Norm2d<float>;
template class Norm2d<double>;
template class Linear<float>;
template class Linear<double>;
template class ResidualBlock<float>;
template class ResidualBlock<double>;
template class FrameEncoder<float>;
template class FrameEncoder<double>;
template Tensor<float> stack_features(const std::vector<const FeatureMap*>&);
template Tensor<double> stack_features(const std::vector<const FeatureMap*>&);

}  // namespace gradw
