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
#include <optional>
#include <vector>

#include "gradw/autodiff/ops.hpp"
#include "gradw/dsp/waveform.hpp"
#include "gradw/io/checkpoint.hpp"
#include "gradw/nn/layers.hpp"

namespace gradw {

struct SpeakerNetConfig {
  std::size_t mel_bins = 24;
  std::size_t first_conv_channels = 8;
  std::array<std::size_t, 4> block_depths{2, 2, 2, 2};
  std::size_t embedding_dim = 32;
  std::size_t num_speakers = 8;

  void validate() const;
  EncoderConfig encoder() const { return {first_conv_channels, block_depths}; }
  /// Channels of the activation map fed to pooling.
  std::size_t activation_channels() const { return first_conv_channels << 3; }
  bool operator==(const SpeakerNetConfig&) const = default;
};

/// Extent of the activation map after four stride-2 stages: ceil(n / 16).
Extent2 activation_extent(Extent2 input);

template <typename T>
struct ForwardTrace {
  Var<T> activation;  // N x C x T' x F', the final stage's post-ReLU output
  Var<T> embedding;   // N x E
  Var<T> logits;      // N x num_speakers
  std::optional<std::size_t> target_logit_index;
};

/// Residual frame encoder, mean+std pooling over time and frequency, an
/// embedding layer and a linear speaker classifier.
template <typename T>
class SpeakerNet {
 public:
  SpeakerNet(const SpeakerNetConfig& cfg, std::uint64_t seed);

  const SpeakerNetConfig& config() const noexcept { return cfg_; }
  ParamSet<T>& params() noexcept { return params_; }
  const ParamSet<T>& params() const noexcept { return params_; }

  bool frozen() const noexcept { return params_.frozen(); }
  void freeze() { params_.set_frozen(true); }

  /// `features` is N x 1 x T x F. With `tap`, the activation map is flagged
  /// as a gradient tap before pooling consumes it.
  ForwardTrace<T> forward(Tape<T>& tape, const Var<T>& features, StatsMode stats, bool tap,
                          std::optional<std::size_t> target = std::nullopt,
                          T bn_momentum = T(0.1));

  /// Pooling, embedding and classifier applied to an N x C x T' x F'
  /// activation map; fills embedding and logits of the returned trace.
  ForwardTrace<T> head(Tape<T>& tape, const Var<T>& activation);

  template <typename U>
  SpeakerNet<U> cast() const;

 private:
  template <typename>
  friend class SpeakerNet;
  SpeakerNet() = default;
  void build(std::uint64_t seed);

  SpeakerNetConfig cfg_;
  ParamSet<T> params_;
  FrameEncoder<T> encoder_;
  Linear<T> embed_, classify_;
};

template <typename T>
ForwardTrace<T> speaker_forward(Tape<T>& tape, SpeakerNet<T>& model, const FeatureMap& features,
                                StatsMode stats, bool tap,
                                std::optional<std::size_t> target = std::nullopt);

/// Eval-mode embedding of one utterance.
template <typename T>
std::vector<T> embed(SpeakerNet<T>& model, const FeatureMap& features);

template <typename T>
std::vector<T> normalized(std::vector<T> v);

template <typename T>
Checkpoint speaker_checkpoint(const SpeakerNet<T>& model, std::uint64_t seed);
template <typename T>
SpeakerNet<T> load_speaker_net(const Checkpoint& ckpt);

extern template class SpeakerNet<float>;
extern template class SpeakerNet<double>;

}  // namespace gradw
