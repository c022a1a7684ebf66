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
#include <string>
#include <vector>

#include "gradw/dsp/synth.hpp"
#include "gradw/dsp/waveform.hpp"

namespace gradw {

struct Utterance {
  std::string id;
  std::size_t speaker = 0;
  Waveform audio;
};

struct NoiseClip {
  std::string id;
  NoiseKind kind = NoiseKind::white;
  Waveform audio;
};

struct CorpusSpec {
  std::size_t speakers = 8;
  std::size_t utterances_per_speaker = 20;
  double utterance_seconds = 2.0;
  std::size_t noise_clips = 40;
  double noise_seconds = 3.0;
  int sample_rate = 16000;
  bool operator==(const CorpusSpec&) const = default;
};

struct Corpus {
  std::size_t num_speakers = 0;
  std::vector<Utterance> utterances;
  std::vector<NoiseClip> noises;

  std::vector<const NoiseClip*> noises_of(NoiseKind kind) const;
};

/// Deterministic synthetic corpus. Noise clips cycle white, tonal and two
/// babble sources so the babble pool is twice the size of the others.
Corpus synth_corpus(const CorpusSpec& spec, std::uint64_t seed);

/// Kind of the i-th noise clip in a synthesized corpus.
NoiseKind corpus_noise_kind(std::size_t index);

}  // namespace gradw
