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

#include "gradw/dsp/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "gradw/common/random.hpp"

namespace gradw {
namespace {

constexpr std::uint64_t kVoiceTag = 0x701ce;
constexpr std::uint64_t kUtteranceTag = 0x0773;
constexpr std::uint64_t kNoiseTag = 0x9015e;
constexpr std::size_t kMaxHarmonics = 48;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

double resonance(double f, double centre, double bw) {
  const double d = (f - centre) / bw;
  return 1.0 / (1.0 + d * d);
}

std::size_t sample_count(double duration_s, int sample_rate) {
  if (!(duration_s > 0.0)) throw std::invalid_argument("duration must be positive");
  if (sample_rate <= 0) throw std::invalid_argument("sample rate must be positive");
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(duration_s * sample_rate)));
}

void normalize_rms(std::vector<float>& x, double target_rms, double max_peak) {
  const double p = mean_power(x);
  if (!(p > 0.0)) return;
  double g = target_rms / std::sqrt(p);
  float peak = 0.0f;
  for (float v : x) peak = std::max(peak, std::abs(v));
  if (peak * g > max_peak) g = max_peak / peak;
  for (auto& v : x) v = static_cast<float>(v * g);
}

}  // namespace

VoiceSignature voice_signature(std::uint64_t speaker_id) {
  Rng rng = make_rng(speaker_id, {kVoiceTag});
  VoiceSignature s;
  s.f0_hz = uniform(rng, 85.0, 260.0);
  s.tilt_db_per_octave = uniform(rng, -9.0, -3.0);
  s.formant_hz = {uniform(rng, 300.0, 900.0), uniform(rng, 1000.0, 2600.0)};
  s.bandwidth_hz = {uniform(rng, 60.0, 160.0), uniform(rng, 90.0, 240.0)};
  s.harmonic_gain_db.resize(kMaxHarmonics);
  for (auto& g : s.harmonic_gain_db) g = gaussian(rng, 0.0, 3.0);
  return s;
}

Waveform synth_utterance(std::uint64_t speaker_id, double duration_s, std::uint64_t seed,
                         int sample_rate) {
  const std::size_t n = sample_count(duration_s, sample_rate);
  const VoiceSignature sig = voice_signature(speaker_id);
  Rng rng = make_rng(seed, {kUtteranceTag, speaker_id});
  const double sr = sample_rate;

  // Pitch contour: slow drift plus vibrato around a per-utterance offset.
  const double f0 = sig.f0_hz * (1.0 + uniform(rng, -0.05, 0.05));
  const double drift_amp = uniform(rng, 0.02, 0.06);
  const double drift_hz = uniform(rng, 0.3, 1.5);
  const double drift_ph = uniform(rng, 0.0, kTwoPi);
  const double vib_amp = uniform(rng, 0.005, 0.02);
  const double vib_hz = uniform(rng, 3.0, 6.0);
  const double vib_ph = uniform(rng, 0.0, kTwoPi);
  const double formant_shift = 1.0 + uniform(rng, -0.04, 0.04);

  // Syllable envelope: raised-cosine bursts separated by short gaps.
  std::vector<float> env(n, 0.0f);
  double t = uniform(rng, 0.0, 0.08);
  while (t < duration_s) {
    const double len = uniform(rng, 0.12, 0.32);
    const double amp = uniform(rng, 0.6, 1.0);
    const auto a = static_cast<std::size_t>(t * sr);
    const auto b = std::min(n, static_cast<std::size_t>((t + len) * sr));
    for (std::size_t i = a; i < b; ++i) {
      const double u = static_cast<double>(i - a) / static_cast<double>(b - a);
      env[i] = static_cast<float>(amp * std::pow(std::sin(std::numbers::pi * u), 2.0));
    }
    t += len + uniform(rng, 0.04, 0.14);
  }

  const std::size_t harmonics =
      std::min<std::size_t>(kMaxHarmonics, static_cast<std::size_t>(0.45 * sr / (f0 * 1.1)));
  std::vector<double> phase(harmonics);
  for (auto& p : phase) p = uniform(rng, 0.0, kTwoPi);
  std::vector<double> amp(harmonics);

  Waveform out{std::vector<float>(n, 0.0f), sample_rate};
  constexpr std::size_t kBlock = 64;
  for (std::size_t start = 0; start < n; start += kBlock) {
    const double time = static_cast<double>(start) / sr;
    const double f_now = f0 * (1.0 + drift_amp * std::sin(kTwoPi * drift_hz * time + drift_ph) +
                               vib_amp * std::sin(kTwoPi * vib_hz * time + vib_ph));
    for (std::size_t k = 0; k < harmonics; ++k) {
      const double fk = f_now * static_cast<double>(k + 1);
      const double tilt = sig.tilt_db_per_octave * std::log2(static_cast<double>(k + 1));
      const double shape = resonance(fk, sig.formant_hz[0] * formant_shift, sig.bandwidth_hz[0]) +
                           0.7 * resonance(fk, sig.formant_hz[1] * formant_shift,
                                           sig.bandwidth_hz[1]) +
                           0.05;
      amp[k] = fk < 0.48 * sr ? std::pow(10.0, (tilt + sig.harmonic_gain_db[k]) / 20.0) * shape
                              : 0.0;
    }
    // Frequency is constant within a block: advance each harmonic by a fixed
    // complex rotation instead of calling sin per sample.
    const std::size_t stop = std::min(n, start + kBlock);
    std::array<double, kBlock> acc{};
    for (std::size_t k = 0; k < harmonics; ++k) {
      if (amp[k] == 0.0) continue;
      const double step = kTwoPi * f_now * static_cast<double>(k + 1) / sr;
      const double rc = std::cos(step), rs = std::sin(step);
      double zc = std::cos(phase[k]), zs = std::sin(phase[k]);
      for (std::size_t i = 0; i < stop - start; ++i) {
        acc[i] += amp[k] * zs;
        const double c = zc * rc - zs * rs;
        zs = zc * rs + zs * rc;
        zc = c;
      }
      phase[k] = std::fmod(phase[k] + step * static_cast<double>(stop - start), kTwoPi);
    }
    for (std::size_t i = start; i < stop; ++i) out.samples[i] = static_cast<float>(acc[i - start] * env[i]);
  }
  normalize_rms(out.samples, 0.08, 0.95);
  return out;
}

std::string_view to_string(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::white: return "white";
    case NoiseKind::tonal: return "tonal";
    case NoiseKind::babble_source: return "babble_source";
  }
  return "unknown";
}

NoiseKind parse_noise_kind(std::string_view name) {
  if (name == "white") return NoiseKind::white;
  if (name == "tonal") return NoiseKind::tonal;
  if (name == "babble_source" || name == "babble") return NoiseKind::babble_source;
  throw std::invalid_argument("unknown noise kind '" + std::string(name) +
                              "' (expected white, tonal or babble_source)");
}

Waveform synth_noise(NoiseKind kind, double duration_s, std::uint64_t seed, int sample_rate) {
  const std::size_t n = sample_count(duration_s, sample_rate);
  Rng rng = make_rng(seed, {kNoiseTag, static_cast<std::uint64_t>(kind)});
  Waveform out{std::vector<float>(n), sample_rate};
  switch (kind) {
    case NoiseKind::white: {
      std::normal_distribution<double> dist(0.0, 0.2);
      for (auto& v : out.samples) v = static_cast<float>(std::clamp(dist(rng), -1.0, 1.0));
      break;
    }
    case NoiseKind::tonal: {
      std::array<double, 3> freq{}, amp{}, ph{};
      for (std::size_t k = 0; k < 3; ++k) {
        freq[k] = uniform(rng, 150.0, 3500.0);
        amp[k] = uniform(rng, 0.3, 1.0);
        ph[k] = uniform(rng, 0.0, kTwoPi);
      }
      for (std::size_t i = 0; i < n; ++i) {
        const double time = static_cast<double>(i) / sample_rate;
        double acc = 0.0;
        for (std::size_t k = 0; k < 3; ++k) acc += amp[k] * std::sin(kTwoPi * freq[k] * time + ph[k]);
        out.samples[i] = static_cast<float>(acc);
      }
      normalize_rms(out.samples, 0.2, 0.5);
      break;
    }
    case NoiseKind::babble_source: {
      const std::uint64_t speaker = kBabbleSpeakerBase + rng() % 1'000'000;
      out = synth_utterance(speaker, duration_s, rng(), sample_rate);
      break;
    }
  }
  return out;
}

}  // namespace gradw
