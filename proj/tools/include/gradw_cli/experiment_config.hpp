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

#include <cstdint>
#include <filesystem>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "gradw/dsp/corpus.hpp"
#include "gradw/dsp/mel.hpp"
#include "gradw/enhance/unet.hpp"
#include "gradw/eval/trials.hpp"
#include "gradw/speaker/pretrain.hpp"
#include "gradw/trainer/trainer.hpp"

namespace gradw::cli {

/// Error with a short machine-readable code; printed as one line by main.
class CliError : public std::runtime_error {
 public:
  CliError(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

struct EvalConfig {
  std::vector<Condition> conditions{Condition{-10.0}, Condition{-5.0}, Condition{0.0}, Condition{}};
  /// "noisy" (no enhancer) or loss variant names with a trained checkpoint.
  std::vector<std::string> systems{"noisy", "grad_w", "equal_w"};
  std::size_t utterances_per_speaker = 10;
  double utterance_seconds = 2.0;
  std::size_t target_trials = 100;
  std::size_t nontarget_trials = 100;
  std::vector<NoiseKind> noise_kinds{NoiseKind::white, NoiseKind::tonal, NoiseKind::babble_source};
  std::size_t babble_sources = 5;
  double p_target = 0.01;
  double c_miss = 1.0;
  double c_fa = 1.0;
  bool operator==(const EvalConfig&) const = default;
};

/// Everything a run depends on. Mel bins, speaker count and seed are stored
/// once and copied into the module configs by resolve().
struct ExperimentConfig {
  std::uint64_t seed = 1;
  CorpusSpec corpus;
  MelConfig mel;
  SpeakerNetConfig speaker;
  AugmentPolicy augment;
  PretrainConfig pretrain;
  UNetConfig unet;
  TrainConfig train = TrainConfig::desk();
  EvalConfig eval;

  /// Propagates shared fields into the module configs and validates them.
  void resolve();
  EvalSetup eval_setup() const;
  bool operator==(const ExperimentConfig&) const = default;
};

/// Sectioned "key = value" text. '#' starts a comment. Unknown sections or
/// keys, duplicates and malformed values are errors naming the line.
ExperimentConfig parse_experiment_config(std::istream& in, const std::string& origin = "config");
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Canonical text with every key; parses back to an equal config.
void write_experiment_config(std::ostream& out, const ExperimentConfig& cfg);
std::string to_text(const ExperimentConfig& cfg);

}  // namespace gradw::cli
