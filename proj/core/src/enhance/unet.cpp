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

#include "gradw/enhance/unet.hpp"

#include <stdexcept>
#include <string>

#include "gradw/common/config_text.hpp"

namespace gradw {

void UNetConfig::validate() const {
  encoder().validate();
  if (mel_bins == 0) throw std::invalid_argument("unet: mel_bins must be positive");
  for (std::size_t d : decoder_depths) {
    if (d == 0) throw std::invalid_argument("unet: decoder depths must be positive");
  }
}

template <typename T>
UNet<T>::UNet(const UNetConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng = make_rng(seed, {0x0e7});
  const auto enc = cfg_.encoder();
  encoder_ = FrameEncoder<T>(params_, "encoder", enc, rng);
  for (std::size_t j = 0; j < 3; ++j) {
    const std::string name = "decoder" + std::to_string(j);
    const std::size_t in = enc.stage_channels(3 - j), out = enc.stage_channels(2 - j);
    auto& block = decoder_[j];
    for (std::size_t k = 0; k < cfg_.decoder_depths[j]; ++k) {
      const std::string up = name + ".up" + std::to_string(k);
      block.up.emplace_back(params_, up, k == 0 ? in : out, out, 3, k == 0 ? 2 : 1,
                            ConvMode::transposed, true, rng);
      block.up_norm.emplace_back(params_, up + "_norm", out, NormMode::instance);
    }
    block.conv1 = Conv2d<T>(params_, name + ".conv1", 2 * out, out, 3, 1, ConvMode::forward, true, rng);
    block.norm1 = Norm2d<T>(params_, name + ".norm1", out, NormMode::instance);
    block.conv2 = Conv2d<T>(params_, name + ".conv2", out, out, 3, 1, ConvMode::forward, true, rng);
    block.norm2 = Norm2d<T>(params_, name + ".norm2", out, NormMode::instance);
  }
  const std::size_t c0 = cfg_.first_conv_channels;
  final_up_ = Conv2d<T>(params_, "final_up", c0, c0, 3, 2, ConvMode::transposed, true, rng);
  final_norm_ = Norm2d<T>(params_, "final_norm", c0, NormMode::instance);
  head_ = Conv2d<T>(params_, "head", c0, 1, 1, 1, ConvMode::forward, true, rng);
}

template <typename T>
Var<T> UNet<T>::forward(Tape<T>& tape, const Var<T>& noisy, StatsMode stats, T bn_momentum) {
  const Shape& s = noisy.shape();
  if (s.size() != 4 || s[1] != 1) {
    throw ShapeError("unet expects N x 1 x T x F features, got " + to_string(s));
  }
  if (s[3] != cfg_.mel_bins) {
    throw ShapeError("unet: feature width " + std::to_string(s[3]) + " does not match " +
                     std::to_string(cfg_.mel_bins) + " mel bins");
  }
  if (s[2] < kMinFrames) {
    throw ShapeError("unet: need at least " + std::to_string(kMinFrames) + " frames, got " +
                     std::to_string(s[2]));
  }
  Context<T> ctx{tape, params_, stats, bn_momentum};
  const auto enc = encoder_(ctx, noisy);
  Var<T> d = enc.stages[3];
  for (std::size_t j = 0; j < 3; ++j) {
    const auto& block = decoder_[j];
    const Var<T>& skip = enc.stages[2 - j];
    Var<T> u = d;
    for (std::size_t k = 0; k < block.up.size(); ++k) {
      const auto extent = k == 0 ? std::optional<Extent2>(enc.stage_extents[2 - j]) : std::nullopt;
      u = relu(block.up_norm[k](ctx, block.up[k](ctx, u, extent)));
    }
    Var<T> h = relu(block.norm1(ctx, block.conv1(ctx, concat<T>({u, skip}, 1))));
    h = block.norm2(ctx, block.conv2(ctx, h));
    d = relu(add(h, u));
  }
  Var<T> h = relu(final_norm_(ctx, final_up_(ctx, d, enc.input_extent)));
  return sigmoid(head_(ctx, h));
}

template <typename T>
Mask estimate_mask(UNet<T>& unet, const FeatureMap& noisy) {
  Tape<T> tape;
  const Var<T> m = unet.forward(tape, tape.constant(stack_features<T>(noisy)), StatsMode::eval);
  Mask out{noisy.frames, noisy.bins, {}};
  out.values.reserve(m.value().size());
  for (T v : m.value().values()) out.values.push_back(static_cast<float>(v));
  return out;
}

FeatureMap enhance(const FeatureMap& noisy, const Mask& mask) {
  if (noisy.frames != mask.frames || noisy.bins != mask.bins ||
      mask.values.size() != noisy.values.size()) {
    throw ShapeError("enhance: mask " + std::to_string(mask.frames) + "x" +
                     std::to_string(mask.bins) + " does not match features " +
                     std::to_string(noisy.frames) + "x" + std::to_string(noisy.bins));
  }
  FeatureMap out = noisy;
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] *= mask.values[i];
  return out;
}

template <typename T>
Checkpoint unet_checkpoint(const UNet<T>& unet, std::uint64_t seed) {
  const auto& c = unet.config();
  Checkpoint ckpt;
  ckpt.set("kind", "unet");
  ckpt.set("seed", std::to_string(seed));
  ckpt.set("mel_bins", std::to_string(c.mel_bins));
  ckpt.set("first_conv_channels", std::to_string(c.first_conv_channels));
  ckpt.set("encoder_depths", join_sizes(c.encoder_depths));
  ckpt.set("decoder_depths", join_sizes(c.decoder_depths));
  store_params(ckpt, unet.params());
  return ckpt;
}

template <typename T>
UNet<T> load_unet(const Checkpoint& ckpt) {
  if (ckpt.get("kind") != "unet") {
    throw CheckpointError("checkpoint kind '" + ckpt.get("kind") + "' is not unet");
  }
  UNetConfig c;
  c.mel_bins = parse_size(ckpt.get("mel_bins"));
  c.first_conv_channels = parse_size(ckpt.get("first_conv_channels"));
  c.encoder_depths = parse_size_array<4>(ckpt.get("encoder_depths"));
  c.decoder_depths = parse_size_array<3>(ckpt.get("decoder_depths"));
  UNet<T> unet(c, 0);
  load_params(ckpt, unet.params());
  return unet;
}

template class UNet<float>;
template class UNet<double>;
template Mask estimate_mask(UNet<float>&, const FeatureMap&);
template Mask estimate_mask(UNet<double>&, const FeatureMap&);
template Checkpoint unet_checkpoint(const UNet<float>&, std::uint64_t);
template Checkpoint unet_checkpoint(const UNet<double>&, std::uint64_t);
template UNet<float> load_unet(const Checkpoint&);
template UNet<double> load_unet(const Checkpoint&);

}  // namespace gradw
