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

#include "gradw/speaker/pretrain.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <locale>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "gradw/dsp/mixing.hpp"

namespace gradw {
namespace {

double pick_from(const std::vector<double>& list, Rng& rng) {
  return list[uniform_index(rng, list.size())];
}

const NoiseClip& pick_clip(const std::vector<const NoiseClip*>& pool, Rng& rng) {
  return *pool[uniform_index(rng, pool.size())];
}

template <typename T>
std::size_t argmax_row(const Tensor<T>& logits, std::size_t row) {
  const std::size_t k = logits.extent(1);
  const T* p = logits.data() + row * k;
  return static_cast<std::size_t>(std::max_element(p, p + k) - p);
}

}  // namespace

void AugmentPolicy::validate() const {
  if (clean_ratio < 0 || noise_ratio < 0 || babble_ratio < 0 ||
      std::abs(clean_ratio + noise_ratio + babble_ratio - 1.0) > 1e-9) {
    throw std::invalid_argument("augment: ratios must be nonnegative and sum to 1");
  }
  if (noise_snrs.empty() || music_snrs.empty() || babble_snrs.empty()) {
    throw std::invalid_argument("augment: SNR lists must be nonempty");
  }
  if (babble_min_sources < 3 || babble_max_sources > 8 || babble_min_sources > babble_max_sources) {
    throw std::invalid_argument("augment: babble source count must lie within [3, 8]");
  }
}

Waveform augment_utterance(const Waveform& clean, const Corpus& corpus,
                           const AugmentPolicy& policy, std::uint64_t seed) {
  Rng rng = make_rng(seed, {0xa06});
  const double u = uniform(rng, 0.0, 1.0);
  if (u < policy.clean_ratio) return clean;
  if (u < policy.clean_ratio + policy.noise_ratio) {
    const bool music = uniform(rng, 0.0, 1.0) < 0.5;
    const auto pool = corpus.noises_of(music ? NoiseKind::tonal : NoiseKind::white);
    if (pool.empty()) throw std::invalid_argument("augment: corpus has no noise clips");
    const double snr = pick_from(music ? policy.music_snrs : policy.noise_snrs, rng);
    const auto& clip = pick_clip(pool, rng);
    return mix_at_snr(clean, clip.audio, snr, rng()).mixture;
  }
  const auto pool = corpus.noises_of(NoiseKind::babble_source);
  if (pool.empty()) throw std::invalid_argument("augment: corpus has no babble sources");
  const std::size_t n = policy.babble_min_sources +
                        uniform_index(rng, policy.babble_max_sources - policy.babble_min_sources + 1);
  std::vector<Waveform> sources;
  std::vector<double> snrs;
  for (std::size_t k = 0; k < n; ++k) {
    sources.push_back(pick_clip(pool, rng).audio);
    snrs.push_back(pick_from(policy.babble_snrs, rng));
  }
  const Waveform babble = make_babble(sources, snrs, clean, rng());
  Waveform out = clean;
  for (std::size_t i = 0; i < out.samples.size(); ++i) out.samples[i] += babble.samples[i];
  return out;
}

void PretrainConfig::validate() const {
  if (epochs == 0 || batch_size == 0 || crop_frames == 0) {
    throw std::invalid_argument("pretrain: epochs, batch_size and crop_frames must be positive");
  }
  if (!(learning_rate > 0)) throw std::invalid_argument("pretrain: learning_rate must be positive");
  if (warmup_epochs > epochs) throw std::invalid_argument("pretrain: warmup_epochs exceeds epochs");
}

template <typename T>
double speaker_accuracy(SpeakerNet<T>& model, const std::vector<const Utterance*>& utts,
                        const MelConfig& mel) {
  if (utts.empty()) return 0;
  MelExtractor extract(mel);
  std::size_t correct = 0;
  for (const Utterance* u : utts) {
    Tape<T> tape;
    const auto trace = speaker_forward(tape, model, extract(u->audio), StatsMode::eval, false);
    correct += argmax_row(trace.logits.value(), 0) == u->speaker;
  }
  return static_cast<double>(correct) / static_cast<double>(utts.size());
}

template <typename T>
PretrainResult<T> pretrain_speaker(const SpeakerNetConfig& cfg, const Corpus& corpus,
                                   const MelConfig& mel, const AugmentPolicy& policy,
                                   const PretrainConfig& train, std::uint64_t seed) {
  policy.validate();
  train.validate();
  if (corpus.utterances.empty()) throw std::invalid_argument("pretrain: empty corpus");
  if (corpus.num_speakers < 2) throw std::invalid_argument("pretrain: corpus has a single speaker");
  if (corpus.num_speakers != cfg.num_speakers) {
    throw std::invalid_argument("pretrain: corpus has " + std::to_string(corpus.num_speakers) +
                                " speakers, model expects " + std::to_string(cfg.num_speakers));
  }
  std::vector<std::size_t> per_speaker(corpus.num_speakers, 0);
  for (const auto& u : corpus.utterances) ++per_speaker.at(u.speaker);
  if (*std::min_element(per_speaker.begin(), per_speaker.end()) < 2) {
    throw std::invalid_argument("pretrain: every speaker needs at least 2 utterances");
  }

  PretrainResult<T> result{SpeakerNet<T>(cfg, derive_seed(seed, {1})), {}, 0};
  auto& model = result.model;
  MelExtractor extract(mel);
  AdamState<T> adam = AdamState<T>::for_params(model.params());
  const std::size_t n = corpus.utterances.size();
  const std::size_t steps = (n + train.batch_size - 1) / train.batch_size;

  // Draws one epoch's shuffled, augmented and cropped batches.
  auto epoch_batches = [&](std::size_t epoch, auto&& consume) {
    Rng rng = make_rng(seed, {2, epoch});
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t step = 0; step < steps; ++step) {
      std::vector<FeatureMap> feats;
      std::vector<std::size_t> labels;
      for (std::size_t i = step * train.batch_size; i < std::min(n, (step + 1) * train.batch_size); ++i) {
        const Utterance& u = corpus.utterances[order[i]];
        const FeatureMap f = extract(augment_utterance(u.audio, corpus, policy, rng()));
        const std::size_t crop = std::min(train.crop_frames, f.frames);
        feats.push_back(f.crop(uniform_index(rng, f.frames - crop + 1), crop));
        labels.push_back(u.speaker);
      }
      std::size_t frames = feats[0].frames;
      for (const auto& f : feats) frames = std::min(frames, f.frames);
      std::vector<const FeatureMap*> ptrs;
      for (auto& f : feats) {
        f = f.crop(0, frames);
        ptrs.push_back(&f);
      }
      consume(step, stack_features<T>(ptrs), labels);
    }
  };

  for (std::size_t epoch = 0; epoch < train.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    double loss_sum = 0, lr = 0;
    std::size_t correct = 0, seen = 0;
    epoch_batches(epoch, [&](std::size_t step, Tensor<T> x, const std::vector<std::size_t>& labels) {
      Tape<T> tape;
      const auto trace = model.forward(tape, tape.constant(std::move(x)), StatsMode::train, false);
      const Var<T> loss = cross_entropy(trace.logits, std::span<const std::size_t>(labels));
      model.params().zero_grad();
      tape.backward(loss);
      lr = lr_schedule(train.learning_rate, train.warmup_epochs, epoch, step, steps);
      adam_step(model.params(), adam, lr, train.adam);
      loss_sum += static_cast<double>(loss.value().item()) * static_cast<double>(labels.size());
      for (std::size_t i = 0; i < labels.size(); ++i) {
        correct += argmax_row(trace.logits.value(), i) == labels[i];
      }
      seen += labels.size();
    });
    const std::chrono::duration<double> took = std::chrono::steady_clock::now() - start;
    result.log.push_back({epoch + 1, loss_sum / static_cast<double>(seen),
                          static_cast<double>(correct) / static_cast<double>(seen), lr,
                          took.count()});
  }
  model.params().zero_grad();

  std::size_t k = 0;
  epoch_batches(train.epochs, [&](std::size_t, Tensor<T> x, const std::vector<std::size_t>&) {
    Tape<T> tape;
    model.forward(tape, tape.constant(std::move(x)), StatsMode::train, false, std::nullopt,
                  T(1) / static_cast<T>(k + 1));
    ++k;
  });

  model.freeze();
  std::vector<const Utterance*> all;
  for (const auto& u : corpus.utterances) all.push_back(&u);
  result.train_accuracy = speaker_accuracy(model, all, mel);
  return result;
}

void write_pretrain_log(std::ostream& out, const std::vector<PretrainEpoch>& log, bool with_timing) {
  out.imbue(std::locale::classic());
  out << "epoch,train_loss,train_accuracy,lr" << (with_timing ? ",seconds\n" : "\n") << std::setprecision(9);
  for (const auto& e : log) {
    out << e.epoch << ',' << e.loss << ',' << e.accuracy << ',' << e.lr;
    if (with_timing) out << ',' << e.seconds;
    out << '\n';
  }
}

template PretrainResult<float> pretrain_speaker(const SpeakerNetConfig&, const Corpus&,
                                                const MelConfig&, const AugmentPolicy&,
                                                const PretrainConfig&, std::uint64_t);
template PretrainResult<double> pretrain_speaker(const SpeakerNetConfig&, const Corpus&,
                                                 const MelConfig&, const AugmentPolicy&,
                                                 const PretrainConfig&, std::uint64_t);
template double speaker_accuracy(SpeakerNet<float>&, const std::vector<const Utterance*>&,
                                 const MelConfig&);
template double speaker_accuracy(SpeakerNet<double>&, const std::vector<const Utterance*>&,
                                 const MelConfig&);

}  // namespace gradw
