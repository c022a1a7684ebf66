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
#include <span>
#include <vector>

#include "gradw/dsp/waveform.hpp"

namespace gradw {

/// 10 log10(P_signal / P_noise).
double measure_snr_db(std::span<const float> signal, std::span<const float> noise);

/// Brings `noise` to exactly `length` samples: a seeded random crop when it is
/// longer, wrap-around looping when it is shorter.
Waveform fit_length(const Waveform& noise, std::size_t length, std::uint64_t seed);

struct MixResult {
  Waveform mixture;       // gain * (clean + noise_scale * noise)
  Waveform scaled_noise;  // noise_scale * noise, before gain
  double noise_scale = 1.0;
  double gain = 1.0;      // peak-normalization gain applied to the mixture
};

/// clean + alpha * noise with alpha = sqrt(P_clean / (P_noise 10^(snr/10))).
/// With `peak_normalize`, a mixture whose peak exceeds 1 is scaled down to a
/// peak of 0.99 and the applied gain is reported.
MixResult mix_at_snr(const Waveform& clean, const Waveform& noise, double snr_db,
                     std::uint64_t seed = 0, bool peak_normalize = false);

/// Sum of `sources`, each scaled to sit `per_source_snr_db[i]` below the
/// reference power. Between 3 and 8 sources.
Waveform make_babble(const std::vector<Waveform>& sources,
                     const std::vector<double>& per_source_snr_db, const Waveform& reference,
                     std::uint64_t seed = 0);

}  // namespace gradw
