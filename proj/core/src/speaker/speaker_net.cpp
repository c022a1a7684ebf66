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

#include "gradw/speaker/speaker_net.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "gradw/common/config_text.hpp"

namespace gradw {

void SpeakerNetConfig::validate() const {
  encoder().validate();
  if (mel_bins == 0) throw std::invalid_argument("speaker: mel_bins must be positive");
  if (embedding_dim == 0) throw std::invalid_argument("speaker: embedding_dim must be positive");
  if (num_speakers < 2) throw std::invalid_argument("speaker: need at least 2 speakers");
}

Extent2 activation_extent(Extent2 input) {
  return Extent2{(input.t + 15) / 16, (input.f + 15) / 16};
}

template <typename T>
SpeakerNet<T>::SpeakerNet(const SpeakerNetConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  build(seed);
}

template <typename T>
void SpeakerNet<T>::build(std::uint64_t seed) {
  Rng rng = make_rng(seed, {0x5be4});
  encoder_ = FrameEncoder<T>(params_, "encoder", cfg_.encoder(), rng);
  embed_ = Linear<T>(params_, "embedding", 2 * cfg_.activation_channels(), cfg_.embedding_dim, rng);
  classify_ = Linear<T>(params_, "classifier", cfg_.embedding_dim, cfg_.num_speakers, rng);
}

template <typename T>
ForwardTrace<T> SpeakerNet<T>::forward(Tape<T>& tape, const Var<T>& features, StatsMode stats,
                                       bool tap, std::optional<std::size_t> target,
                                       T bn_momentum) {
  const Shape& s = features.shape();
  if (s.size() != 4 || s[1] != 1) {
    throw ShapeError("speaker net expects N x 1 x T x F features, got " + to_string(s));
  }
  if (s[3] != cfg_.mel_bins) {
    throw ShapeError("speaker net: feature width " + std::to_string(s[3]) + " does not match " +
                     std::to_string(cfg_.mel_bins) + " mel bins");
  }
  if (target && *target >= cfg_.num_speakers) {
    throw std::out_of_range("speaker net: target index " + std::to_string(*target) +
                            " out of range");
  }
  Context<T> ctx{tape, params_, stats, bn_momentum};
  ForwardTrace<T> trace;
  trace.activation = encoder_(ctx, features).stages[3];
  if (tap) tape.mark_tap(trace.activation);
  const auto pooled = head(tape, trace.activation);
  trace.embedding = pooled.embedding;
  trace.logits = pooled.logits;
  trace.target_logit_index = target;
  return trace;
}

template <typename T>
ForwardTrace<T> SpeakerNet<T>::head(Tape<T>& tape, const Var<T>& activation) {
  const Shape& s = activation.shape();
  if (s.size() != 4 || s[1] != cfg_.activation_channels()) {
    throw ShapeError("speaker head expects N x " + std::to_string(cfg_.activation_channels()) +
                     " x T' x F', got " + to_string(s));
  }
  Context<T> ctx{tape, params_, StatsMode::eval};
  ForwardTrace<T> trace;
  trace.activation = activation;
  trace.embedding = embed_(ctx, reduce(activation, ReduceKind::mean_and_std, {2, 3}));
  trace.logits = classify_(ctx, trace.embedding);
  return trace;
}

template <typename T>
template <typename U>
SpeakerNet<U> SpeakerNet<T>::cast() const {
  SpeakerNet<U> out;
  out.cfg_ = cfg_;
  out.build(0);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    out.params_[i].value = params_[i].value.template cast<U>();
  }
  out.params_.set_frozen(params_.frozen());
  return out;
}

template <typename T>
ForwardTrace<T> speaker_forward(Tape<T>& tape, SpeakerNet<T>& model, const FeatureMap& features,
                                StatsMode stats, bool tap, std::optional<std::size_t> target) {
  const Var<T> x = tape.constant(stack_features<T>(features));
  return model.forward(tape, x, stats, tap, target);
}

template <typename T>
std::vector<T> embed(SpeakerNet<T>& model, const FeatureMap& features) {
  Tape<T> tape;
  const auto trace = speaker_forward(tape, model, features, StatsMode::eval, false);
  const auto v = trace.embedding.value().values();
  return {v.begin(), v.end()};
}

template <typename T>
std::vector<T> normalized(std::vector<T> v) {
  T norm = 0;
  for (T x : v) norm += x * x;
  norm = std::sqrt(norm);
  if (!(norm > T(0))) throw std::domain_error("cannot normalize a zero vector");
  for (T& x : v) x /= norm;
  return v;
}

template <typename T>
Checkpoint speaker_checkpoint(const SpeakerNet<T>& model, std::uint64_t seed) {
  const auto& c = model.config();
  Checkpoint ckpt;
  ckpt.set("kind", "speaker_net");
  ckpt.set("seed", std::to_string(seed));
  ckpt.set("mel_bins", std::to_string(c.mel_bins));
  ckpt.set("first_conv_channels", std::to_string(c.first_conv_channels));
  ckpt.set("block_depths", join_sizes(c.block_depths));
  ckpt.set("embedding_dim", std::to_string(c.embedding_dim));
  ckpt.set("num_speakers", std::to_string(c.num_speakers));
  ckpt.set("frozen", model.frozen() ? "1" : "0");
  store_params(ckpt, model.params());
  return ckpt;
}

template <typename T>
SpeakerNet<T> load_speaker_net(const Checkpoint& ckpt) {
  if (ckpt.get("kind") != "speaker_net") {
    throw CheckpointError("checkpoint kind '" + ckpt.get("kind") + "' is not speaker_net");
  }
  SpeakerNetConfig c;
  c.mel_bins = parse_size(ckpt.get("mel_bins"));
  c.first_conv_channels = parse_size(ckpt.get("first_conv_channels"));
  c.block_depths = parse_size_array<4>(ckpt.get("block_depths"));
  c.embedding_dim = parse_size(ckpt.get("embedding_dim"));
  c.num_speakers = parse_size(ckpt.get("num_speakers"));
  SpeakerNet<T> model(c, 0);
  load_params(ckpt, model.params());
  if (ckpt.get("frozen") == "1") model.freeze();
  return model;
}

template class SpeakerNet<float>;
template class SpeakerNet<double>;
template SpeakerNet<double> SpeakerNet<float>::cast<double>() const;
template SpeakerNet<float> SpeakerNet<double>::cast<float>() const;
template SpeakerNet<float> SpeakerNet<float>::cast<float>() const;
template SpeakerNet<double> SpeakerNet<double>::cast<double>() const;

#define GRADW_INSTANTIATE(T)                                                                   \
  template ForwardTrace<T> speaker_forward(Tape<T>&, SpeakerNet<T>&, const FeatureMap&,       \
                                           StatsMode, bool, std::optional<std::size_t>);      \
  template std::vector<T> embed(SpeakerNet<T>&, const FeatureMap&);                           \
  template std::vector<T> normalized(std::vector<T>);                                         \
  template Checkpoint speaker_checkpoint(const SpeakerNet<T>&, std::uint64_t);                \
  template SpeakerNet<T> load_speaker_net(const Checkpoint&);
GRADW_INSTANTIATE(float)
GRADW_INSTANTIATE(double)
#undef GRADW_INSTANTIATE

}  // namespace gradw
