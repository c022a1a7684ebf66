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

#include <memory>
#include <vector>

#include "gradw/dsp/waveform.hpp"

namespace gradw {

struct MelConfig {
  int sample_rate = 16000;
  std::size_t window = 400;  // 25 ms
  std::size_t hop = 160;     // 10 ms
  std::size_t fft_size = 512;
  std::size_t bins = 24;
  double f_min = 40.0;
  double f_max = 7600.0;

  void validate() const;
  friend bool operator==(const MelConfig&, const MelConfig&) = default;
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Centre frequency (Hz) of each triangular filter.
std::vector<double> mel_centers(const MelConfig& cfg);

/// Hann-windowed power spectrum -> triangular mel filterbank -> log1p.
/// Holds an FFT plan, so reuse one instance for many waveforms.
class MelExtractor {
 public:
  explicit MelExtractor(MelConfig cfg);
  ~MelExtractor();
  MelExtractor(const MelExtractor&) = delete;
  MelExtractor& operator=(const MelExtractor&) = delete;

  const MelConfig& config() const noexcept { return cfg_; }
  FeatureMap operator()(const Waveform& w) const;

  /// Filter weights, bins x (fft_size / 2 + 1).
  const std::vector<double>& filterbank() const noexcept { return fbank_; }

 private:
  struct Fft;
  MelConfig cfg_;
  std::vector<double> window_;
  std::vector<double> fbank_;
  std::unique_ptr<Fft> fft_;
};

FeatureMap mel_features(const Waveform& w, const MelConfig& cfg);

}  // namespace gradw
