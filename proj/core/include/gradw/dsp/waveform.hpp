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
#include <span>
#include <stdexcept>
#include <vector>

namespace gradw {

/// Mono audio, samples nominally in [-1, 1].
struct Waveform {
  std::vector<float> samples;
  int sample_rate = 16000;

  std::size_t size() const noexcept { return samples.size(); }
  double duration() const { return static_cast<double>(samples.size()) / sample_rate; }
  friend bool operator==(const Waveform&, const Waveform&) = default;
};

inline void validate(const Waveform& w) {
  if (w.samples.empty()) throw std::invalid_argument("empty waveform");
  if (w.sample_rate <= 0) throw std::invalid_argument("waveform sample rate must be positive");
}

/// Mean square of the samples.
inline double mean_power(std::span<const float> x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (float v : x) acc += static_cast<double>(v) * v;
  return acc / static_cast<double>(x.size());
}

/// Time x frequency feature matrix, row-major (one row per frame).
struct FeatureMap {
  std::size_t frames = 0;
  std::size_t bins = 0;
  std::vector<float> values;
  double frame_shift = 0.01;

  float& at(std::size_t t, std::size_t f) { return values[t * bins + f]; }
  float at(std::size_t t, std::size_t f) const { return values[t * bins + f]; }

  /// Rows [start, start + count).
  FeatureMap crop(std::size_t start, std::size_t count) const {
    if (start + count > frames) throw std::out_of_range("feature crop past the last frame");
    FeatureMap out{count, bins, {}, frame_shift};
    out.values.assign(values.begin() + static_cast<std::ptrdiff_t>(start * bins),
                      values.begin() + static_cast<std::ptrdiff_t>((start + count) * bins));
    return out;
  }
  friend bool operator==(const FeatureMap&, const FeatureMap&) = default;
};

}  // namespace gradw
