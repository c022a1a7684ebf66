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
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "gradw/dsp/waveform.hpp"

namespace gradw {

/// Fixed per-speaker voice parameters, drawn from a generator seeded by the
/// speaker id alone.
struct VoiceSignature {
  double f0_hz = 120.0;
  double tilt_db_per_octave = -6.0;
  std::array<double, 2> formant_hz{500.0, 1500.0};
  std::array<double, 2> bandwidth_hz{100.0, 150.0};
  std::vector<double> harmonic_gain_db;
};

VoiceSignature voice_signature(std::uint64_t speaker_id);

/// Harmonic voiced speech stand-in. Same (speaker_id, seed) gives identical
/// samples; the seed varies pitch contour, syllable envelope and phases.
Waveform synth_utterance(std::uint64_t speaker_id, double duration_s, std::uint64_t seed,
                         int sample_rate = 16000);

enum class NoiseKind { white, tonal, babble_source };

std::string_view to_string(NoiseKind kind);
NoiseKind parse_noise_kind(std::string_view name);

/// Speaker ids at or above this value are reserved for babble sources.
inline constexpr std::uint64_t kBabbleSpeakerBase = 1'000'000;

Waveform synth_noise(NoiseKind kind, double duration_s, std::uint64_t seed,
                     int sample_rate = 16000);

}  // namespace gradw
