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

#include "gradw/dsp/mel.hpp"

#include <fftw3.h>

#include <cmath>
#include <numbers>
#include <string>

namespace gradw {

void MelConfig::validate() const {
  if (sample_rate <= 0) throw std::invalid_argument("mel: sample_rate must be positive");
  if (window == 0 || hop == 0) throw std::invalid_argument("mel: window and hop must be positive");
  if (fft_size < window) throw std::invalid_argument("mel: fft_size must be >= window");
  if (bins < 2) throw std::invalid_argument("mel: need at least 2 mel bins");
  if (!(f_min >= 0.0 && f_min < f_max && f_max <= sample_rate / 2.0)) {
    throw std::invalid_argument("mel: need 0 <= f_min < f_max <= sample_rate / 2");
  }
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<double> mel_centers(const MelConfig& cfg) {
  const double lo = hz_to_mel(cfg.f_min);
  const double step = (hz_to_mel(cfg.f_max) - lo) / static_cast<double>(cfg.bins + 1);
  std::vector<double> c(cfg.bins);
  for (std::size_t b = 0; b < cfg.bins; ++b) c[b] = mel_to_hz(lo + step * static_cast<double>(b + 1));
  return c;
}

struct MelExtractor::Fft {
  explicit Fft(std::size_t n) : size(n) {
    in = fftw_alloc_real(n);
    out = fftw_alloc_complex(n / 2 + 1);
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in, out, FFTW_ESTIMATE);
  }
  ~Fft() {
    fftw_destroy_plan(plan);
    fftw_free(in);
    fftw_free(out);
  }
  std::size_t size;
  double* in;
  fftw_complex* out;
  fftw_plan plan;
};

MelExtractor::MelExtractor(MelConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  window_.resize(cfg_.window);
  for (std::size_t i = 0; i < cfg_.window; ++i) {
    window_[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                      static_cast<double>(cfg_.window - 1));
  }
  const std::size_t nfreq = cfg_.fft_size / 2 + 1;
  fbank_.assign(cfg_.bins * nfreq, 0.0);
  const double lo = hz_to_mel(cfg_.f_min);
  const double step = (hz_to_mel(cfg_.f_max) - lo) / static_cast<double>(cfg_.bins + 1);
  for (std::size_t b = 0; b < cfg_.bins; ++b) {
    const double left = lo + step * static_cast<double>(b);
    const double centre = left + step;
    const double right = centre + step;
    for (std::size_t k = 0; k < nfreq; ++k) {
      const double mel = hz_to_mel(static_cast<double>(k) * cfg_.sample_rate /
                                   static_cast<double>(cfg_.fft_size));
      double wgt = 0.0;
      if (mel > left && mel <= centre) {
        wgt = (mel - left) / (centre - left);
      } else if (mel > centre && mel < right) {
        wgt = (right - mel) / (right - centre);
      }
      fbank_[b * nfreq + k] = wgt;
    }
  }
  fft_ = std::make_unique<Fft>(cfg_.fft_size);
}

MelExtractor::~MelExtractor() = default;

FeatureMap MelExtractor::operator()(const Waveform& w) const {
  validate(w);
  if (w.sample_rate != cfg_.sample_rate) {
    throw std::invalid_argument("mel: waveform rate " + std::to_string(w.sample_rate) +
                                " does not match config rate " +
                                std::to_string(cfg_.sample_rate));
  }
  if (w.size() < cfg_.window) {
    throw std::invalid_argument("mel: waveform of " + std::to_string(w.size()) +
                                " samples is shorter than one window (" +
                                std::to_string(cfg_.window) + ")");
  }
  const std::size_t frames = 1 + (w.size() - cfg_.window) / cfg_.hop;
  const std::size_t nfreq = cfg_.fft_size / 2 + 1;
  FeatureMap out{frames, cfg_.bins, std::vector<float>(frames * cfg_.bins),
                 static_cast<double>(cfg_.hop) / cfg_.sample_rate};
  std::vector<double> power(nfreq);
  for (std::size_t t = 0; t < frames; ++t) {
    const float* src = w.samples.data() + t * cfg_.hop;
    for (std::size_t i = 0; i < cfg_.fft_size; ++i) {
      fft_->in[i] = i < cfg_.window ? window_[i] * static_cast<double>(src[i]) : 0.0;
    }
    fftw_execute(fft_->plan);
    for (std::size_t k = 0; k < nfreq; ++k) {
      power[k] = fft_->out[k][0] * fft_->out[k][0] + fft_->out[k][1] * fft_->out[k][1];
    }
    for (std::size_t b = 0; b < cfg_.bins; ++b) {
      const double* wb = fbank_.data() + b * nfreq;
      double e = 0.0;
      for (std::size_t k = 0; k < nfreq; ++k) e += wb[k] * power[k];
      out.values[t * cfg_.bins + b] = static_cast<float>(std::log1p(e));
    }
  }
  return out;
}

FeatureMap mel_features(const Waveform& w, const MelConfig& cfg) {
  return MelExtractor(cfg)(w);
}

}  // namespace gradw
