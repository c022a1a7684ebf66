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

#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "gradw/autodiff/ops.hpp"
#include "gradw/common/random.hpp"
#include "gradw/dsp/waveform.hpp"

namespace gradw {

/// Everything a layer needs during one forward pass.
template <typename T>
struct Context {
  Tape<T>& tape;
  ParamSet<T>& params;
  StatsMode stats = StatsMode::eval;
  T bn_momentum = T(0.1);
};

template <typename T>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(ParamSet<T>& params, const std::string& name, std::size_t in, std::size_t out,
         std::size_t kernel, std::size_t stride, ConvMode mode, bool bias, Rng& rng);

  Var<T> operator()(Context<T>& ctx, const Var<T>& x,
                    std::optional<Extent2> output_extent = std::nullopt) const;

 private:
  std::size_t weight_ = 0;
  std::optional<std::size_t> bias_;
  std::size_t stride_ = 1;
  std::size_t pad_ = 0;
  ConvMode mode_ = ConvMode::forward;
};

template <typename T>
class Norm2d {
 public:
  Norm2d() = default;
  Norm2d(ParamSet<T>& params, const std::string& name, std::size_t channels, NormMode mode);

  Var<T> operator()(Context<T>& ctx, const Var<T>& x) const;

 private:
  NormMode mode_ = NormMode::batch;
  std::size_t scale_ = 0, shift_ = 0;
  std::size_t running_mean_ = 0, running_var_ = 0;
};

template <typename T>
class Linear {
 public:
  Linear() = default;
  Linear(ParamSet<T>& params, const std::string& name, std::size_t in, std::size_t out, Rng& rng);
  Var<T> operator()(Context<T>& ctx, const Var<T>& x) const;

 private:
  std::size_t weight_ = 0, bias_ = 0;
};

/// conv3x3 - BN - ReLU - conv3x3 - BN, plus an identity or projected
/// (1x1 conv + BN) shortcut, then ReLU.
template <typename T>
class ResidualBlock {
 public:
  ResidualBlock() = default;
  ResidualBlock(ParamSet<T>& params, const std::string& name, std::size_t in, std::size_t out,
                std::size_t stride, Rng& rng);
  Var<T> operator()(Context<T>& ctx, const Var<T>& x) const;

 private:
  Conv2d<T> conv1_, conv2_, proj_;
  Norm2d<T> bn1_, bn2_, proj_bn_;
  bool project_ = false;
};

struct EncoderConfig {
  std::size_t first_channels = 8;
  /// Convolution layers per stage; each stage halves time and frequency and
  /// its residual blocks hold two layers apiece.
  std::array<std::size_t, 4> depths{2, 2, 2, 2};

  void validate() const;
  std::size_t stage_channels(std::size_t stage) const { return first_channels << stage; }
};

/// Frame-level layers shared by the speaker network and the U-Net encoder:
/// a 3x3 stem (conv, BN, ReLU) and four stride-2 residual stages.
template <typename T>
class FrameEncoder {
 public:
  struct Output {
    Var<T> stem;
    std::array<Var<T>, 4> stages;
    Extent2 input_extent;
    std::array<Extent2, 4> stage_extents;
  };

  FrameEncoder() = default;
  FrameEncoder(ParamSet<T>& params, const std::string& prefix, const EncoderConfig& cfg, Rng& rng);

  Output operator()(Context<T>& ctx, const Var<T>& x) const;

 private:
  Conv2d<T> stem_conv_;
  Norm2d<T> stem_bn_;
  std::vector<std::vector<ResidualBlock<T>>> stages_;
};

/// Stacks equal-length feature maps into an N x 1 x T x F tensor.
template <typename T>
Tensor<T> stack_features(const std::vector<const FeatureMap*>& maps);
template <typename T>
Tensor<T> stack_features(const FeatureMap& map) {
  return stack_features<T>(std::vector<const FeatureMap*>{&map});
}

extern template class Conv2d<float>;
extern template class Conv2d<double>;
extern template class Norm2d<float>;
extern template class Norm2d<double>;
extern template class Linear<float>;
extern template class Linear<double>;
extern template class ResidualBlock<float>;
extern template class ResidualBlock<double>;
extern template class FrameEncoder<float>;
extern template class FrameEncoder<double>;

}  // namespace gradw
