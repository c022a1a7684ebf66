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

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "gradw_cli/experiment_config.hpp"

namespace gradw::cli {

/// Output layout under --out.
struct OutputDirs {
  std::filesystem::path root;
  std::filesystem::path manifests() const { return root / "manifests"; }
  std::filesystem::path checkpoints() const { return root / "checkpoints"; }
  std::filesystem::path reports() const { return root / "reports"; }
  std::filesystem::path diagnostics() const { return root / "diagnostics"; }
  std::filesystem::path corpus_manifest() const { return manifests() / "corpus.tsv"; }
  std::filesystem::path noise_manifest() const { return manifests() / "noise.tsv"; }
  std::filesystem::path speaker_checkpoint() const { return checkpoints() / "speaker.ckpt"; }
  std::filesystem::path unet_checkpoint(const std::string& variant) const {
    return checkpoints() / ("unet_" + variant + ".ckpt");
  }
  std::filesystem::path train_log(const std::string& variant) const {
    return reports() / ("train_" + variant + ".csv");
  }
  std::filesystem::path eval_report() const { return reports() / "eval.csv"; }
};

struct RunContext {
  ExperimentConfig config;  // resolved
  OutputDirs out;
  bool f64 = false;
  std::ostream* progress = nullptr;  // null: quiet
};

struct SynthSummary {
  std::size_t utterances = 0;
  std::size_t noises = 0;
};
SynthSummary cmd_synth_data(const RunContext& ctx);

/// Reads the corpus back from the manifests written by synth-data.
Corpus load_corpus(const OutputDirs& out);

struct PretrainSummary {
  double train_accuracy = 0;
  std::size_t epochs = 0;
};
PretrainSummary cmd_pretrain(const RunContext& ctx);

struct TrainSummary {
  TrainLog log;
  std::size_t best_epoch = 0;
};
TrainSummary cmd_train_enh(const RunContext& ctx, LossVariant variant);

struct EvaluateSummary {
  std::vector<EvalRow> rows;
};
EvaluateSummary cmd_evaluate(const RunContext& ctx);

struct DiagnoseRequest {
  std::filesystem::path clean_wav, noisy_wav;
  /// A loss variant whose checkpoint enhances, or "noisy" for no enhancement.
  std::string system = "grad_w";
  /// Variant whose distance and weights are dumped.
  LossVariant variant = LossVariant::grad_w;
  std::optional<std::size_t> target;  // default: argmax logit of the clean input
};
void cmd_diagnose(const RunContext& ctx, const DiagnoseRequest& req);

/// Writes the resolved config next to the outputs as reports/<command>.config.
void echo_config(const RunContext& ctx, const std::string& command);

}  // namespace gradw::cli
