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
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gradw/autodiff/ops.hpp"
#include "gradw/dsp/waveform.hpp"
#include "gradw/speaker/speaker_net.hpp"

namespace gradw {

enum class GradSource { ref, enh };
enum class DistanceDomain { time_freq, channel };
enum class DistanceMode { artifact, residual, both, channel };
enum class Normalization { softmax, minmax, softmax_plus_one };
enum class WeightScheme { softmax, minmax, softmax_plus_one, clean_softmax };

enum class LossVariant { grad_w, equal_w, clean_w, res_w, no_softmax, channel, residual, both };

const std::array<LossVariant, 8>& all_loss_variants();
std::string_view to_string(LossVariant v);
/// Throws std::invalid_argument listing the valid names.
LossVariant parse_loss_variant(std::string_view name);

/// How a variant builds its weights. Variants without a distance use uniform
/// (unit) weights.
struct VariantSpec {
  std::optional<DistanceMode> distance;  // unset for equal_w and clean_w
  WeightScheme scheme = WeightScheme::softmax;
  bool weighted = true;
};
VariantSpec variant_spec(LossVariant v);

/// d(target logit) / d(activation), C x T' x F'.
template <typename T>
struct GradientMap {
  Tensor<T> values;
  GradSource source = GradSource::ref;
};

/// T' x F' for time_freq, C for channel.
template <typename T>
struct DistanceMap {
  Tensor<T> values;
  DistanceDomain domain = DistanceDomain::time_freq;
};

template <typename T>
struct WeightMap {
  Tensor<T> values;
  Normalization normalization = Normalization::softmax;
  DistanceDomain domain = DistanceDomain::time_freq;
};

/// Eval-mode forward of one utterance with the activation tapped, then one
/// backward pass from logits[target] restricted to the tap.
template <typename T>
GradientMap<T> gradient_map(SpeakerNet<T>& model, const FeatureMap& features, std::size_t target);

template <typename T>
DistanceMap<T> artifact_distance(const GradientMap<T>& g_enh, const GradientMap<T>& g_ref,
                                 DistanceMode mode);

/// Sum over channels of the clean-side gradient, the input Clean-W weighs by.
template <typename T>
DistanceMap<T> clean_distance(const GradientMap<T>& g_ref);

template <typename T>
WeightMap<T> weight_map(const DistanceMap<T>& d, WeightScheme scheme);

/// Sum of |a_ref - a_enh| * P over channels and bins, averaged over the batch.
/// Activations are C x T' x F' (one map in `p`) or N x C x T' x F' (N maps).
/// equal_w takes no maps. Only a_enh carries gradient.
template <typename T>
Var<T> enhancement_loss(const Var<T>& a_ref, const Var<T>& a_enh,
                        std::span<const WeightMap<T>> p, LossVariant variant);

/// Intermediate values of compose_loss for diagnostics and tests. The weight
/// path (g_*, d, p) lives on the tape but only p's detached copy reaches the
/// loss.
template <typename T>
struct ComposeTrace {
  Var<T> a_ref, a_enh;
  Var<T> g_ref, g_enh;  // N x C x T' x F'; invalid for equal_w
  Var<T> d, p, p_detached;
  std::vector<WeightMap<T>> weights;
};

/// clean: N x 1 x T x F constant; enh: on the same tape, produced by the
/// enhancer. Both passes use the same per-item target logit.
template <typename T>
Var<T> compose_loss(SpeakerNet<T>& frozen_model, const Var<T>& clean, const Var<T>& enh,
                    std::span<const std::size_t> targets, LossVariant variant,
                    ComposeTrace<T>* trace = nullptr);

}  // namespace gradw
