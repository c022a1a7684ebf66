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

#include "gradw/dsp/mixing.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "gradw/common/random.hpp"

namespace gradw {

double measure_snr_db(std::span<const float> signal, std::span<const float> noise) {
  const double ps = mean_power(signal);
  const double pn = mean_power(noise);
  if (!(ps > 0.0) || !(pn > 0.0)) throw std::invalid_argument("SNR of a zero-power signal");
  return 10.0 * std::log10(ps / pn);
}

Waveform fit_length(const Waveform& noise, std::size_t length, std::uint64_t seed) {
  validate(noise);
  Waveform out{std::vector<float>(length), noise.sample_rate};
  const std::size_t n = noise.size();
  if (n >= length) {
    Rng rng = make_rng(seed, {0xc409});
    const std::size_t start = n == length ? 0 : uniform_index(rng, n - length + 1);
    std::copy_n(noise.samples.begin() + static_cast<std::ptrdiff_t>(start), length,
                out.samples.begin());
  } else {
    for (std::size_t i = 0; i < length; ++i) out.samples[i] = noise.samples[i % n];
  }
  return out;
}

MixResult mix_at_snr(const Waveform& clean, const Waveform& noise, double snr_db,
                     std::uint64_t seed, bool peak_normalize) {
  validate(clean);
  validate(noise);
  if (clean.sample_rate != noise.sample_rate) {
    throw std::invalid_argument("mix_at_snr: sample rates differ");
  }
  Waveform fitted = fit_length(noise, clean.size(), seed);
  const double pc = mean_power(clean.samples);
  const double pn = mean_power(fitted.samples);
  if (!(pc > 0.0)) throw std::invalid_argument("mix_at_snr: clean signal has zero power");
  if (!(pn > 0.0)) throw std::invalid_argument("mix_at_snr: noise has zero power");

  MixResult r;
  r.noise_scale = std::sqrt(pc / (pn * std::pow(10.0, snr_db / 10.0)));
  r.scaled_noise = std::move(fitted);
  for (auto& v : r.scaled_noise.samples) v = static_cast<float>(v * r.noise_scale);
  r.mixture = clean;
  float peak = 0.0f;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    r.mixture.samples[i] += r.scaled_noise.samples[i];
    peak = std::max(peak, std::abs(r.mixture.samples[i]));
  }
  if (peak_normalize && peak > 1.0f) {
    r.gain = 0.99 / peak;
    for (auto& v : r.mixture.samples) v = static_cast<float>(v * r.gain);
  }
  return r;
}

Waveform make_babble(const std::vector<Waveform>& sources,
                     const std::vector<double>& per_source_snr_db, const Waveform& reference,
                     std::uint64_t seed) {
  if (sources.size() != per_source_snr_db.size()) {
    throw std::invalid_argument("make_babble: " + std::to_string(sources.size()) +
                                " sources but " + std::to_string(per_source_snr_db.size()) +
                                " SNR values");
  }
  if (sources.size() < 3 || sources.size() > 8) {
    throw std::invalid_argument("make_babble: need 3 to 8 sources, got " +
                                std::to_string(sources.size()));
  }
  validate(reference);
  Waveform out{std::vector<float>(reference.size(), 0.0f), reference.sample_rate};
  for (std::size_t k = 0; k < sources.size(); ++k) {
    MixResult m = mix_at_snr(reference, sources[k], per_source_snr_db[k], derive_seed(seed, {k}));
    for (std::size_t i = 0; i < out.size(); ++i) out.samples[i] += m.scaled_noise.samples[i];
  }
  return out;
}

}  // namespace gradw
