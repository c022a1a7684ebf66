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

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "gradw/dsp/corpus.hpp"
#include "gradw/dsp/mel.hpp"
#include "gradw/speaker/speaker_net.hpp"
#include "gradw/trainer/optim.hpp"

namespace gradw {

/// Training-time corruption mix for the speaker network: clean, additive
/// noise or music (tonal) at a listed SNR, or babble of several speakers.
struct AugmentPolicy {
  double clean_ratio = 0.4;
  double noise_ratio = 0.3;
  double babble_ratio = 0.3;
  std::vector<double> noise_snrs{0, 5, 10, 15};
  std::vector<double> music_snrs{5, 8, 10, 15};
  std::size_t babble_min_sources = 3;
  std::size_t babble_max_sources = 7;
  std::vector<double> babble_snrs{13, 15, 17, 20};

  void validate() const;
  bool operator==(const AugmentPolicy&) const = default;
};

Waveform augment_utterance(const Waveform& clean, const Corpus& corpus,
                           const AugmentPolicy& policy, std::uint64_t seed);

struct PretrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 8;
  double learning_rate = 1e-3;
  std::size_t warmup_epochs = 1;
  std::size_t crop_frames = 96;
  AdamConfig adam;

  void validate() const;
  bool operator==(const PretrainConfig&) const = default;
};

struct PretrainEpoch {
  std::size_t epoch = 0;
  double loss = 0;
  double accuracy = 0;  // on the augmented training batches, train mode
  double lr = 0;
  double seconds = 0;
};

template <typename T>
struct PretrainResult {
  SpeakerNet<T> model;
  std::vector<PretrainEpoch> log;
  /// Eval-mode accuracy on the clean training utterances after the
  /// normalization statistics are finalized.
  double train_accuracy = 0;
};

/// Cross-entropy training on augmented crops, then one calibration pass that
/// sets every batch-norm running statistic to its average over the epoch's
/// batches. The returned model is frozen.
template <typename T>
PretrainResult<T> pretrain_speaker(const SpeakerNetConfig& cfg, const Corpus& corpus,
                                   const MelConfig& mel, const AugmentPolicy& policy,
                                   const PretrainConfig& train, std::uint64_t seed);

/// Fraction of utterances whose argmax logit is their speaker (eval mode).
template <typename T>
double speaker_accuracy(SpeakerNet<T>& model, const std::vector<const Utterance*>& utts,
                        const MelConfig& mel);

/// CSV "epoch,train_loss,train_accuracy,lr,seconds"; the seconds column is
/// dropped without timing.
void write_pretrain_log(std::ostream& out, const std::vector<PretrainEpoch>& log,
                        bool with_timing = true);

}  // namespace gradw
