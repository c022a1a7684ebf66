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

#include "gradw/trainer/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <locale>
#include <numeric>
#include <ostream>

#include "gradw/dsp/mixing.hpp"
#include "gradw/io/grid.hpp"

namespace gradw {
namespace {

struct Pair {
  FeatureMap clean, noisy;
  std::size_t speaker = 0;
};

template <typename T>
struct Batch {
  Tensor<T> clean, noisy;
  std::vector<std::size_t> speakers;
};

template <typename T>
Batch<T> stack(const std::vector<Pair>& pairs) {
  std::vector<const FeatureMap*> clean, noisy;
  Batch<T> b;
  for (const auto& p : pairs) {
    clean.push_back(&p.clean);
    noisy.push_back(&p.noisy);
    b.speakers.push_back(p.speaker);
  }
  b.clean = stack_features<T>(clean);
  b.noisy = stack_features<T>(noisy);
  return b;
}

Pair make_pair(const Utterance& u, const Corpus& corpus, const TrainConfig& cfg,
               const MelExtractor& extract, std::uint64_t seed) {
  Rng rng = make_rng(seed, {0xc20});
  const FeatureMap clean = extract(u.audio);
  const FeatureMap noisy = extract(corrupt_for_training(u.audio, corpus, cfg, rng()));
  if (clean.frames < cfg.crop_frames) {
    throw std::invalid_argument("train: utterance " + u.id + " has " + std::to_string(clean.frames) +
                                " frames, shorter than the " + std::to_string(cfg.crop_frames) +
                                "-frame crop");
  }
  const std::size_t start = uniform_index(rng, clean.frames - cfg.crop_frames + 1);
  return {clean.crop(start, cfg.crop_frames), noisy.crop(start, cfg.crop_frames), u.speaker};
}

template <typename T>
void dump_batch(const std::filesystem::path& dir, const Batch<T>& b) {
  std::filesystem::create_directories(dir);
  const std::size_t t = b.clean.extent(2), f = b.clean.extent(3);
  for (std::size_t i = 0; i < b.speakers.size(); ++i) {
    for (const auto& [name, src] : {std::pair{"clean", &b.clean}, std::pair{"noisy", &b.noisy}}) {
      std::vector<double> grid(src->data() + i * t * f, src->data() + (i + 1) * t * f);
      write_grid_csv(dir / (std::string(name) + "_" + std::to_string(i) + ".csv"), t, f, grid);
    }
  }
}

}  // namespace

TrainConfig TrainConfig::desk() {
  TrainConfig c;
  c.epochs = 10;
  c.batch_size = 8;
  c.crop_frames = 128;
  c.learning_rate = 2e-3;
  return c;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0)) throw std::invalid_argument("train: learning_rate must be positive");
  if (epochs == 0 || batch_size == 0 || crop_frames == 0) {
    throw std::invalid_argument("train: epochs, batch_size and crop_frames must be positive");
  }
  if (warmup_epochs > epochs) throw std::invalid_argument("train: warmup_epochs exceeds epochs");
  if (snr_min_db > snr_max_db) throw std::invalid_argument("train: snr range is inverted");
  if (babble_snrs.empty()) throw std::invalid_argument("train: babble SNR list is empty");
  if (babble_min_sources < 3 || babble_max_sources > 8 || babble_min_sources > babble_max_sources) {
    throw std::invalid_argument("train: babble source count must lie within [3, 8]");
  }
}

Waveform corrupt_for_training(const Waveform& clean, const Corpus& corpus, const TrainConfig& cfg,
                              std::uint64_t seed) {
  Rng rng = make_rng(seed, {0xc0e});
  const std::size_t category = uniform_index(rng, 3);
  if (category < 2) {
    const auto pool = corpus.noises_of(category == 0 ? NoiseKind::white : NoiseKind::tonal);
    if (pool.empty()) throw std::invalid_argument("train: corpus lacks noise clips");
    const auto& clip = *pool[uniform_index(rng, pool.size())];
    const double snr = uniform(rng, cfg.snr_min_db, cfg.snr_max_db);
    return mix_at_snr(clean, clip.audio, snr, rng()).mixture;
  }
  const auto pool = corpus.noises_of(NoiseKind::babble_source);
  if (pool.empty()) throw std::invalid_argument("train: corpus lacks babble sources");
  const std::size_t n =
      cfg.babble_min_sources + uniform_index(rng, cfg.babble_max_sources - cfg.babble_min_sources + 1);
  std::vector<Waveform> sources;
  std::vector<double> snrs;
  for (std::size_t k = 0; k < n; ++k) {
    sources.push_back(pool[uniform_index(rng, pool.size())]->audio);
    snrs.push_back(cfg.babble_snrs[uniform_index(rng, cfg.babble_snrs.size())]);
  }
  const Waveform babble = make_babble(sources, snrs, clean, rng());
  Waveform out = clean;
  for (std::size_t i = 0; i < out.samples.size(); ++i) out.samples[i] += babble.samples[i];
  return out;
}

void write_train_log(std::ostream& out, const TrainLog& log, bool with_timing) {
  out.imbue(std::locale::classic());
  out << "epoch,train_loss,val_loss,lr" << (with_timing ? ",seconds" : "") << '\n'
      << std::setprecision(9);
  for (const auto& e : log.epochs) {
    out << e.epoch << ',' << e.train_loss << ',' << e.val_loss << ',' << e.lr;
    if (with_timing) out << ',' << e.seconds;
    out << '\n';
  }
}

template <typename T>
TrainResult<T> train_enhancer(UNet<T>& unet, SpeakerNet<T>& frozen_speaker, const Corpus& corpus,
                              const MelConfig& mel, const TrainConfig& cfg,
                              const EpochCallback<T>& on_epoch,
                              const std::optional<std::filesystem::path>& dump_dir) {
  cfg.validate();
  if (!frozen_speaker.frozen()) throw FrozenError("train: speaker model is not frozen");
  if (corpus.num_speakers > frozen_speaker.config().num_speakers) {
    throw std::invalid_argument("train: corpus has " + std::to_string(corpus.num_speakers) +
                                " speakers but the speaker model knows " +
                                std::to_string(frozen_speaker.config().num_speakers));
  }
  if (cfg.validation_speakers >= corpus.num_speakers) {
    throw std::invalid_argument("train: no speakers left for training after the validation split");
  }
  if (unet.config().mel_bins != mel.bins || frozen_speaker.config().mel_bins != mel.bins) {
    throw std::invalid_argument("train: model mel_bins differ from the feature configuration");
  }

  const std::size_t first_val = corpus.num_speakers - cfg.validation_speakers;
  std::vector<const Utterance*> train_set, val_set;
  for (const auto& u : corpus.utterances) (u.speaker < first_val ? train_set : val_set).push_back(&u);

  MelExtractor extract(mel);
  std::vector<Pair> val_pairs;
  for (std::size_t i = 0; i < val_set.size(); ++i) {
    val_pairs.push_back(make_pair(*val_set[i], corpus, cfg, extract, derive_seed(cfg.seed, {7, i})));
  }

  AdamState<T> adam = AdamState<T>::for_params(unet.params());
  const std::size_t n = train_set.size();
  const std::size_t steps = (n + cfg.batch_size - 1) / cfg.batch_size;
  TrainResult<T> result{unet, {}, 0};
  double best_val = std::numeric_limits<double>::infinity();

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    Rng rng = make_rng(cfg.seed, {8, epoch});
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0, lr = 0;
    for (std::size_t step = 0; step < steps; ++step) {
      std::vector<Pair> pairs;
      for (std::size_t i = step * cfg.batch_size; i < std::min(n, (step + 1) * cfg.batch_size); ++i) {
        pairs.push_back(make_pair(*train_set[order[i]], corpus, cfg, extract, rng()));
      }
      const Batch<T> batch = stack<T>(pairs);
      Tape<T> tape;
      const Var<T> noisy = tape.constant(batch.noisy);
      const Var<T> enh = enhance(noisy, unet.forward(tape, noisy, StatsMode::train));
      const Var<T> loss = compose_loss(frozen_speaker, tape.constant(batch.clean), enh,
                                       std::span<const std::size_t>(batch.speakers), cfg.variant);
      const double value = static_cast<double>(loss.value().item());
      if (!std::isfinite(value)) {
        if (dump_dir) dump_batch(*dump_dir, batch);
        throw NonFiniteLoss("non-finite training loss at epoch " + std::to_string(epoch + 1) +
                            " step " + std::to_string(step + 1));
      }
      unet.params().zero_grad();
      tape.backward(loss);
      lr = lr_schedule(cfg.learning_rate, cfg.warmup_epochs, epoch, step, steps);
      adam_step(unet.params(), adam, lr, cfg.adam);
      loss_sum += value * static_cast<double>(pairs.size());
    }
    unet.params().zero_grad();

    double val_sum = 0;
    for (std::size_t i = 0; i < val_pairs.size(); i += cfg.batch_size) {
      const std::vector<Pair> chunk(val_pairs.begin() + static_cast<std::ptrdiff_t>(i),
                                    val_pairs.begin() + static_cast<std::ptrdiff_t>(
                                                            std::min(val_pairs.size(), i + cfg.batch_size)));
      const Batch<T> batch = stack<T>(chunk);
      Tape<T> tape;
      const Var<T> noisy = tape.constant(batch.noisy);
      const Var<T> enh = enhance(noisy, unet.forward(tape, noisy, StatsMode::eval));
      const Var<T> loss = compose_loss(frozen_speaker, tape.constant(batch.clean), enh,
                                       std::span<const std::size_t>(batch.speakers),
                                       LossVariant::equal_w);
      val_sum += static_cast<double>(loss.value().item()) * static_cast<double>(chunk.size());
    }
    const std::chrono::duration<double> took = std::chrono::steady_clock::now() - start;
    const EpochRecord rec{epoch + 1, loss_sum / static_cast<double>(n),
                          val_pairs.empty() ? 0.0 : val_sum / static_cast<double>(val_pairs.size()),
                          lr, took.count()};
    result.log.epochs.push_back(rec);
    const bool is_best = rec.val_loss < best_val;
    if (is_best) {
      best_val = rec.val_loss;
      result.best = unet;
      result.best_epoch = rec.epoch;
    }
    if (on_epoch) on_epoch(rec, unet, is_best);
  }
  return result;
}

template TrainResult<float> train_enhancer(UNet<float>&, SpeakerNet<float>&, const Corpus&,
                                           const MelConfig&, const TrainConfig&,
                                           const EpochCallback<float>&,
                                           const std::optional<std::filesystem::path>&);
template TrainResult<double> train_enhancer(UNet<double>&, SpeakerNet<double>&, const Corpus&,
                                            const MelConfig&, const TrainConfig&,
                                            const EpochCallback<double>&,
                                            const std::optional<std::filesystem::path>&);

}  // namespace gradw
