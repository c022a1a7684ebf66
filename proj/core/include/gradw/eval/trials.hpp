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
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gradw/dsp/corpus.hpp"
#include "gradw/dsp/mel.hpp"
#include "gradw/enhance/unet.hpp"
#include "gradw/speaker/speaker_net.hpp"

namespace gradw {

struct Trial {
  bool target = false;
  std::string enroll;
  std::string test;

  bool operator==(const Trial&) const = default;
};

/// Lines "label enroll_id test_id", label 1 for target trials.
void write_trials(std::ostream& out, const std::vector<Trial>& trials);
std::vector<Trial> read_trials(std::istream& in);

/// Fresh utterances of the corpus voices for verification trials, with ids
/// "eval_spkSSS_uttUUU".
std::vector<Utterance> eval_utterances(std::size_t speakers, std::size_t per_speaker,
                                       double seconds, std::uint64_t seed,
                                       int sample_rate = 16000);

/// Target trials pair two distinct utterances of a speaker, nontarget trials
/// two speakers. Drawn without repeating a pair where possible.
std::vector<Trial> make_trials(const std::vector<Utterance>& utts, std::size_t n_target,
                               std::size_t n_nontarget, std::uint64_t seed);

struct Condition {
  std::optional<double> snr_db;  // unset: clean

  std::string label() const;
  bool operator==(const Condition&) const = default;
};
/// "clean" or a dB value.
Condition parse_condition(std::string_view text);
std::vector<Condition> parse_condition_list(std::string_view text);

struct EvalSetup {
  MelConfig mel;
  std::vector<NoiseKind> noise_kinds{NoiseKind::white, NoiseKind::tonal, NoiseKind::babble_source};
  std::size_t babble_sources = 5;
  double p_target = 0.01;
  double c_miss = 1.0;
  double c_fa = 1.0;
};

/// Feature-domain enhancement applied before the speaker network.
using Enhancer = std::function<FeatureMap(const FeatureMap&)>;

template <typename T>
Enhancer unet_enhancer(UNet<T>& unet) {
  return [&unet](const FeatureMap& x) { return enhance(x, estimate_mask(unet, x)); };
}

struct EvalRow {
  std::string condition;
  std::string variant;
  double eer = 0;
  double min_dcf = 0;
  std::size_t n_trials = 0;
  std::uint64_t seed = 0;
  std::vector<double> scores;  // per trial, in trial order

  bool operator==(const EvalRow&) const = default;
};

/// Scores every trial by cosine similarity of embeddings. The test side is
/// corrupted at the condition's SNR with a noise kind drawn per trial (fresh
/// synthetic noise, independent of the training pool); enrollment stays
/// clean. With an enhancer, both sides pass through it.
template <typename T>
EvalRow run_trial_eval(const std::vector<Trial>& trials, const std::vector<Utterance>& utts,
                       SpeakerNet<T>& speaker, const Enhancer* enhancer, const Condition& condition,
                       const EvalSetup& setup, const std::string& variant, std::uint64_t seed);

/// Corrupted test waveform for trial `index`: identical across systems so
/// comparisons are paired.
Waveform corrupt_for_eval(const Waveform& clean, double snr_db, const EvalSetup& setup,
                          std::uint64_t seed, std::size_t index);

/// CSV "condition,variant,eer,min_dcf,n_trials,seed".
void write_eval_report(std::ostream& out, const std::vector<EvalRow>& rows);

}  // namespace gradw
