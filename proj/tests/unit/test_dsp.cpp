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

#include <cmath>
#include <numbers>
#include <numeric>

#include "doctest.h"
#include "gradw/dsp/corpus.hpp"
#include "gradw/dsp/mel.hpp"
#include "gradw/dsp/mixing.hpp"
#include "gradw/dsp/synth.hpp"

using namespace gradw;

namespace {

Waveform tone(double hz, double seconds, double amp = 0.5, int sr = 16000) {
  Waveform w{std::vector<float>(static_cast<std::size_t>(seconds * sr)), sr};
  for (std::size_t i = 0; i < w.size(); ++i) {
    w.samples[i] = static_cast<float>(amp * std::sin(2 * std::numbers::pi * hz * i / sr));
  }
  return w;
}

double correlation(const std::vector<float>& a, const std::vector<float>& b) {
  const std::size_t n = std::min(a.size(), b.size());
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ab += double(a[i]) * b[i];
    aa += double(a[i]) * a[i];
    bb += double(b[i]) * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

}  // namespace

TEST_CASE("mel config validation") {
  MelConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  auto bad = cfg;
  bad.bins = 1;
  CHECK_THROWS(bad.validate());
  bad = cfg;
  bad.f_max = 9000;
  CHECK_THROWS(bad.validate());
  bad = cfg;
  bad.f_min = bad.f_max;
  CHECK_THROWS(bad.validate());
}

TEST_CASE("mel_features frame count and errors") {
  MelConfig cfg;
  MelExtractor mel(cfg);
  for (std::size_t len : {400u, 401u, 559u, 560u, 16000u, 32000u}) {
    Waveform w = synth_noise(NoiseKind::white, 1.0, len);
    w.samples.resize(len);
    auto f = mel(w);
    CHECK(f.frames == 1 + (len - cfg.window) / cfg.hop);
    CHECK(f.bins == cfg.bins);
  }
  CHECK_THROWS(mel(Waveform{std::vector<float>(399, 0.1f), 16000}));
  CHECK_THROWS(mel(Waveform{std::vector<float>(1000, 0.1f), 8000}));
}

TEST_CASE("mel_features of silence is zero") {
  auto f = mel_features(Waveform{std::vector<float>(16000, 0.0f), 16000}, MelConfig{});
  CHECK(std::all_of(f.values.begin(), f.values.end(), [](float v) { return v == 0.0f; }));
}

TEST_CASE("a tone at a filter centre peaks in that bin") {
  MelConfig cfg;
  MelExtractor mel(cfg);
  const auto centres = mel_centers(cfg);
  REQUIRE(centres.size() == cfg.bins);
  for (std::size_t b = 0; b < cfg.bins; ++b) {
    auto f = mel(tone(centres[b], 0.3));
    for (std::size_t t = 0; t < f.frames; ++t) {
      std::size_t arg = 0;
      for (std::size_t k = 1; k < f.bins; ++k) {
        if (f.at(t, k) > f.at(t, arg)) arg = k;
      }
      CHECK_MESSAGE(arg == b, "bin " << b << " frame " << t);
    }
  }
}

TEST_CASE("mel_features is nonnegative and monotone in amplitude") {
  MelExtractor mel(MelConfig{});
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    Waveform w = seed % 2 ? synth_utterance(seed, 0.5, seed) : synth_noise(NoiseKind::white, 0.5, seed);
    Waveform w2 = w;
    for (auto& v : w2.samples) v *= 2.0f;
    auto a = mel(w), b = mel(w2);
    for (std::size_t i = 0; i < a.values.size(); ++i) {
      CHECK(a.values[i] >= 0.0f);
      CHECK(b.values[i] >= a.values[i]);
    }
  }
}

TEST_CASE("mix_at_snr scale factor") {
  Waveform a = tone(440, 0.5), b = tone(1000, 0.5);
  CHECK(mix_at_snr(a, b, 0.0).noise_scale == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(mix_at_snr(a, b, 10.0).noise_scale == doctest::Approx(std::pow(10.0, -0.5)).epsilon(1e-6));
}

TEST_CASE("mix_at_snr round-trips the requested SNR") {
  Waveform clean = synth_utterance(3, 1.0, 11);
  for (NoiseKind kind : {NoiseKind::white, NoiseKind::tonal, NoiseKind::babble_source}) {
    Waveform noise = synth_noise(kind, 1.7, 5);
    for (double snr : {-15.0, -10.0, -5.0, 0.0, 5.0, 10.0, 15.0}) {
      auto m = mix_at_snr(clean, noise, snr, 42);
      CHECK(std::abs(measure_snr_db(clean.samples, m.scaled_noise.samples) - snr) < 0.01);
      for (std::size_t i = 0; i < clean.size(); i += 97) {
        CHECK(m.mixture.samples[i] == doctest::Approx(clean.samples[i] + m.scaled_noise.samples[i]).epsilon(1e-5));
      }
    }
  }
}

TEST_CASE("mix_at_snr peak normalization and errors") {
  Waveform clean = tone(300, 0.2, 0.9);
  Waveform noise = tone(700, 0.2, 0.9);
  auto m = mix_at_snr(clean, noise, -10.0, 0, true);
  CHECK(m.gain < 1.0);
  float peak = 0;
  for (float v : m.mixture.samples) peak = std::max(peak, std::abs(v));
  CHECK(peak <= 0.99f + 1e-6f);
  CHECK(mix_at_snr(tone(300, 0.2, 0.01), tone(700, 0.2, 0.01), 0.0, 0, true).gain == 1.0);
  Waveform silent{std::vector<float>(3200, 0.0f), 16000};
  CHECK_THROWS(mix_at_snr(silent, noise, 0.0));
  CHECK_THROWS(mix_at_snr(clean, silent, 0.0));
  CHECK_THROWS(mix_at_snr(clean, Waveform{noise.samples, 8000}, 0.0));
}

TEST_CASE("fit_length crops and loops") {
  Waveform n{{1, 2, 3, 4, 5}, 16000};
  CHECK(fit_length(n, 12, 0).samples == std::vector<float>{1, 2, 3, 4, 5, 1, 2, 3, 4, 5, 1, 2});
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto c = fit_length(n, 3, seed);
    CHECK(c.size() == 3);
    CHECK(c.samples[1] == c.samples[0] + 1);
    CHECK(c.samples[2] == c.samples[0] + 2);
    CHECK(c == fit_length(n, 3, seed));
  }
  CHECK(fit_length(n, 5, 9) == n);
}

TEST_CASE("make_babble") {
  Waveform ref = synth_utterance(0, 1.0, 1);
  std::vector<Waveform> src;
  for (std::uint64_t k = 0; k < 8; ++k) src.push_back(synth_noise(NoiseKind::white, 1.0, 100 + k));

  SUBCASE("single dominant source matches mix_at_snr's noise term") {
    // The other two sources sit 200 dB down and vanish in float precision.
    auto b = make_babble({src[0], src[1], src[2]}, {0.0, 200.0, 200.0}, ref, 3);
    auto m = mix_at_snr(ref, src[0], 0.0, 3);
    for (std::size_t i = 0; i < ref.size(); ++i) {
      CHECK(b.samples[i] == doctest::Approx(m.scaled_noise.samples[i]).epsilon(1e-5));
    }
  }
  SUBCASE("independent sources add in power") {
    const double p_ref = mean_power(ref.samples);
    for (std::size_t k = 3; k <= 8; ++k) {
      for (double s : {0.0, 5.0, 13.0}) {
        std::vector<Waveform> use(src.begin(), src.begin() + k);
        auto b = make_babble(use, std::vector<double>(k, s), ref, 4);
        const double want = k * p_ref / std::pow(10.0, s / 10.0);
        CHECK(std::abs(mean_power(b.samples) / want - 1.0) < 0.1);
      }
    }
  }
  SUBCASE("errors") {
    CHECK_THROWS(make_babble({}, {}, ref));
    CHECK_THROWS(make_babble({src[0], src[1]}, {0, 0}, ref));
    CHECK_THROWS(make_babble(std::vector<Waveform>(9, src[0]), std::vector<double>(9, 0.0), ref));
    CHECK_THROWS(make_babble({src[0], src[1], src[2]}, {0, 0}, ref));
  }
}

TEST_CASE("synth_utterance determinism and variability") {
  for (std::uint64_t spk = 0; spk < 8; ++spk) {
    auto a = synth_utterance(spk, 1.0, 7);
    CHECK(a == synth_utterance(spk, 1.0, 7));
    CHECK(a.size() == 16000);
    CHECK(std::abs(correlation(a.samples, synth_utterance(spk, 1.0, 8).samples)) < 0.99);
    for (float v : a.samples) REQUIRE(std::abs(v) <= 1.0f);
  }
  CHECK_THROWS(synth_utterance(0, 0.0, 1));
  CHECK(voice_signature(3).f0_hz == voice_signature(3).f0_hz);
  CHECK(voice_signature(3).f0_hz != voice_signature(4).f0_hz);
}

TEST_CASE("synth_noise") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto w = synth_noise(NoiseKind::white, 1.0, seed);
    const double mean = std::accumulate(w.samples.begin(), w.samples.end(), 0.0) / w.size();
    CHECK(std::abs(mean) < 0.01);
    CHECK(w == synth_noise(NoiseKind::white, 1.0, seed));
    CHECK(synth_noise(NoiseKind::tonal, 1.0, seed) == synth_noise(NoiseKind::tonal, 1.0, seed));
    CHECK(synth_noise(NoiseKind::babble_source, 0.5, seed) == synth_noise(NoiseKind::babble_source, 0.5, seed));
  }
  CHECK(parse_noise_kind(to_string(NoiseKind::tonal)) == NoiseKind::tonal);
  CHECK_THROWS(parse_noise_kind("pink"));
}

TEST_CASE("tonal noise has at most three spectral peaks") {
  constexpr std::size_t n = 2048;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto w = synth_noise(NoiseKind::tonal, 0.2, seed);
    std::vector<double> power(n / 2);
    for (std::size_t k = 0; k < power.size(); ++k) {
      double re = 0, im = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const double hann = 0.5 - 0.5 * std::cos(2 * std::numbers::pi * i / (n - 1));
        const double ph = 2 * std::numbers::pi * k * i / n;
        re += hann * w.samples[i] * std::cos(ph);
        im -= hann * w.samples[i] * std::sin(ph);
      }
      power[k] = re * re + im * im;
    }
    const double top = *std::max_element(power.begin(), power.end());
    int peaks = 0;
    for (std::size_t k = 1; k + 1 < power.size(); ++k) {
      if (power[k] > 0.01 * top && power[k] >= power[k - 1] && power[k] > power[k + 1]) ++peaks;
    }
    CHECK(peaks >= 1);
    CHECK(peaks <= 3);
  }
}

TEST_CASE("synthetic corpus") {
  CorpusSpec spec;
  spec.utterances_per_speaker = 3;
  spec.noise_clips = 8;
  spec.utterance_seconds = 0.5;
  spec.noise_seconds = 0.5;
  auto a = synth_corpus(spec, 5);
  CHECK(a.num_speakers == 8);
  CHECK(a.utterances.size() == 24);
  CHECK(a.noises.size() == 8);
  CHECK(a.noises_of(NoiseKind::babble_source).size() == 4);
  auto b = synth_corpus(spec, 5);
  for (std::size_t i = 0; i < a.utterances.size(); ++i) CHECK(a.utterances[i].audio == b.utterances[i].audio);
}
