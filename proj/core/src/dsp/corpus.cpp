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

#include "gradw/dsp/corpus.hpp"

#include <cstdio>

#include "gradw/common/random.hpp"

namespace gradw {

std::vector<const NoiseClip*> Corpus::noises_of(NoiseKind kind) const {
  std::vector<const NoiseClip*> out;
  for (const auto& n : noises) {
    if (n.kind == kind) out.push_back(&n);
  }
  return out;
}

NoiseKind corpus_noise_kind(std::size_t index) {
  switch (index % 4) {
    case 0: return NoiseKind::white;
    case 1: return NoiseKind::tonal;
    default: return NoiseKind::babble_source;
  }
}

Corpus synth_corpus(const CorpusSpec& spec, std::uint64_t seed) {
  Corpus c;
  c.num_speakers = spec.speakers;
  char buf[64];
  for (std::size_t s = 0; s < spec.speakers; ++s) {
    for (std::size_t u = 0; u < spec.utterances_per_speaker; ++u) {
      std::snprintf(buf, sizeof buf, "spk%03zu_utt%03zu", s, u);
      c.utterances.push_back(Utterance{
          buf, s,
          synth_utterance(s, spec.utterance_seconds, derive_seed(seed, {0xc0, s, u}),
                          spec.sample_rate)});
    }
  }
  for (std::size_t k = 0; k < spec.noise_clips; ++k) {
    const NoiseKind kind = corpus_noise_kind(k);
    std::snprintf(buf, sizeof buf, "noise%03zu_%s", k, std::string(to_string(kind)).c_str());
    c.noises.push_back(NoiseClip{
        buf, kind,
        synth_noise(kind, spec.noise_seconds, derive_seed(seed, {0x40, k}), spec.sample_rate)});
  }
  return c;
}

}  // namespace gradw
