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
#include <cstdint>
#include <vector>

#include "gradw/dsp/waveform.hpp"
#include "gradw/io/checkpoint.hpp"
#include "gradw/nn/layers.hpp"

namespace gradw {

struct UNetConfig {
  std::size_t mel_bins = 24;
  std::size_t first_conv_channels = 8;
  std::array<std::size_t, 4> encoder_depths{2, 2, 2, 2};
  /// Transposed convolutions per decoder block.
  std::array<std::size_t, 3> decoder_depths{2, 2, 2};

  void validate() const;
  EncoderConfig encoder() const { return {first_conv_channels, encoder_depths}; }
  bool operator==(const UNetConfig&) const = default;
};

/// Per-bin gain in (0, 1), T x F.
struct Mask {
  std::size_t frames = 0;
  std::size_t bins = 0;
  std::vector<float> values;
};

/// Mask estimator: the speaker network's frame encoder (own weights), three
/// decoder blocks that upsample, concatenate the matching encoder stage and
/// refine with a residual pair of convolutions, then a last upsampling to the
/// input grid and a 1x1 convolution with sigmoid.
template <typename T>
class UNet {
 public:
  static constexpr std::size_t kMinFrames = 16;

  UNet(const UNetConfig& cfg, std::uint64_t seed);

  const UNetConfig& config() const noexcept { return cfg_; }
  ParamSet<T>& params() noexcept { return params_; }
  const ParamSet<T>& params() const noexcept { return params_; }

  /// N x 1 x T x F noisy features to an N x 1 x T x F mask.
  Var<T> forward(Tape<T>& tape, const Var<T>& noisy, StatsMode stats, T bn_momentum = T(0.1));

 private:
  struct DecoderBlock {
    std::vector<Conv2d<T>> up;
    std::vector<Norm2d<T>> up_norm;
    Conv2d<T> conv1, conv2;
    Norm2d<T> norm1, norm2;
  };

  UNetConfig cfg_;
  ParamSet<T> params_;
  FrameEncoder<T> encoder_;
  std::array<DecoderBlock, 3> decoder_;
  Conv2d<T> final_up_;
  Norm2d<T> final_norm_;
  Conv2d<T> head_;
};

template <typename T>
Var<T> enhance(const Var<T>& noisy, const Var<T>& mask) {
  return mul(mask, noisy);
}

/// Eval-mode mask of one utterance.
template <typename T>
Mask estimate_mask(UNet<T>& unet, const FeatureMap& noisy);

/// E = M * X, elementwise.
FeatureMap enhance(const FeatureMap& noisy, const Mask& mask);

template <typename T>
Checkpoint unet_checkpoint(const UNet<T>& unet, std::uint64_t seed);
template <typename T>
UNet<T> load_unet(const Checkpoint& ckpt);

extern template class UNet<float>;
extern template class UNet<double>;

}  // namespace gradw
