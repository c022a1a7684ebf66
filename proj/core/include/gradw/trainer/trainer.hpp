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
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <vector>

#include "gradw/dsp/corpus.hpp"
#include "gradw/dsp/mel.hpp"
#include "gradw/enhance/unet.hpp"
#include "gradw/loss/gradw_loss.hpp"
#include "gradw/speaker/speaker_net.hpp"
#include "gradw/trainer/optim.hpp"

namespace gradw {

struct TrainConfig {
  double learning_rate = 5e-4;
  std::size_t warmup_epochs = 5;
  std::size_t epochs = 50;
  std::size_t batch_size = 32;
  AdamConfig adam;
  std::uint64_t seed = 0;
  LossVariant variant = LossVariant::grad_w;
  std::size_t crop_frames = 200;
  double snr_min_db = -10;
  double snr_max_db = 0;
  std::vector<double> babble_snrs{5, 8, 10, 13, 15};
  std::size_t babble_min_sources = 5;
  std::size_t babble_max_sources = 8;
  /// The highest-numbered speakers are held out for validation.
  std::size_t validation_speakers = 2;

  /// 10 epochs of batch 8 on 128-frame crops at lr 2e-3.
  static TrainConfig desk();
  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

/// Clean utterance corrupted by white noise, tonal "music" or babble, chosen
/// uniformly. Noise and music use a uniform SNR from the configured range;
/// babble sums 5 to 8 sources at per-source SNRs drawn from the list.
Waveform corrupt_for_training(const Waveform& clean, const Corpus& corpus, const TrainConfig& cfg,
                              std::uint64_t seed);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0;
  double val_loss = 0;
  double lr = 0;
  double seconds = 0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
};

/// CSV "epoch,train_loss,val_loss,lr,seconds". Without timing the seconds
/// column is omitted, leaving only run-determined values.
void write_train_log(std::ostream& out, const TrainLog& log, bool with_timing = true);

class NonFiniteLoss : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename T>
struct TrainResult {
  UNet<T> best;
  TrainLog log;
  std::size_t best_epoch = 0;
};

template <typename T>
using EpochCallback = std::function<void(const EpochRecord&, const UNet<T>&, bool is_best)>;

/// Trains `unet` in place against the frozen speaker network. Speakers below
/// corpus.num_speakers - validation_speakers train; the rest validate with
/// the equal_w loss on fixed corruptions. `on_epoch` sees every epoch's model.
/// A non-finite loss aborts with NonFiniteLoss after writing the offending
/// batch to `dump_dir` when one is given.
template <typename T>
TrainResult<T> train_enhancer(UNet<T>& unet, SpeakerNet<T>& frozen_speaker, const Corpus& corpus,
                              const MelConfig& mel, const TrainConfig& cfg,
                              const EpochCallback<T>& on_epoch = {},
                              const std::optional<std::filesystem::path>& dump_dir = std::nullopt);

}  // namespace gradw
