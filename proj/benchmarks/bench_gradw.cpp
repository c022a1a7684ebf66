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

#include <benchmark/benchmark.h>

#include <vector>

#include "gradw/autodiff/ops.hpp"
#include "gradw/common/random.hpp"
#include "gradw/dsp/mel.hpp"
#include "gradw/dsp/synth.hpp"
#include "gradw/enhance/unet.hpp"
#include "gradw/eval/metrics.hpp"
#include "gradw/loss/gradw_loss.hpp"
#include "gradw/trainer/optim.hpp"

using namespace gradw;

namespace {

Tensor<float> random_tensor(const Shape& s, Rng& rng) {
  Tensor<float> t(s);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<float>(uniform(rng, -1.0, 1.0));
  return t;
}

FeatureMap features(std::size_t frames, std::uint64_t seed) {
  return mel_features(synth_utterance(seed % 8, static_cast<double>(frames) * 0.01 + 0.02, seed), MelConfig{});
}

const std::optional<Var<float>> kNoBias;

}  // namespace

// args: channels, extent
static void BM_ConvForwardBackward(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const auto n = static_cast<std::size_t>(state.range(1));
  Rng rng(1);
  const auto x = random_tensor({8, c, n, n}, rng);
  const auto w = random_tensor({c, c, 3, 3}, rng);
  for (auto _ : state) {
    Tape<float> tape;
    auto xv = tape.variable(x);
    auto y = conv_layer(xv, tape.variable(w), kNoBias, ConvMode::forward, {1, 1}, {1, 1});
    tape.backward(sum_all(y));
    benchmark::DoNotOptimize(tape.grad(xv));
  }
}
BENCHMARK(BM_ConvForwardBackward)->Args({8, 64})->Args({32, 16})->Args({64, 8})->Unit(benchmark::kMillisecond);

static void BM_Mel2s(benchmark::State& state) {
  const auto w = synth_utterance(0, 2.0, 3);
  const MelExtractor mel(MelConfig{});
  for (auto _ : state) benchmark::DoNotOptimize(mel(w));
}
BENCHMARK(BM_Mel2s)->Unit(benchmark::kMillisecond);

static void BM_SynthUtterance2s(benchmark::State& state) {
  std::uint64_t seed = 0;
  for (auto _ : state) {
    ++seed;
    benchmark::DoNotOptimize(synth_utterance(seed % 8, 2.0, seed));
  }
}
BENCHMARK(BM_SynthUtterance2s)->Unit(benchmark::kMillisecond);

static void BM_SpeakerEmbed2s(benchmark::State& state) {
  SpeakerNet<float> net(SpeakerNetConfig{}, 4);
  net.freeze();
  const auto x = features(198, 5);
  for (auto _ : state) benchmark::DoNotOptimize(embed(net, x));
}
BENCHMARK(BM_SpeakerEmbed2s)->Unit(benchmark::kMillisecond);

static void BM_UNetMask2s(benchmark::State& state) {
  UNet<float> unet(UNetConfig{}, 6);
  const auto x = features(198, 7);
  for (auto _ : state) benchmark::DoNotOptimize(estimate_mask(unet, x));
}
BENCHMARK(BM_UNetMask2s)->Unit(benchmark::kMillisecond);

// One desk-size optimizer step: batch 8 of 128-frame crops. arg: variant index.
static void BM_TrainStep(benchmark::State& state) {
  const LossVariant variant = all_loss_variants().at(static_cast<std::size_t>(state.range(0)));
  state.SetLabel(std::string(to_string(variant)));
  SpeakerNet<float> speaker(SpeakerNetConfig{}, 8);
  speaker.freeze();
  UNet<float> unet(UNetConfig{}, 9);
  auto adam = AdamState<float>::for_params(unet.params());
  std::vector<FeatureMap> clean, noisy;
  for (std::uint64_t i = 0; i < 8; ++i) {
    clean.push_back(features(128, 10 + i));
    noisy.push_back(features(128, 20 + i));
  }
  std::vector<const FeatureMap*> cp, np;
  for (std::size_t i = 0; i < 8; ++i) {
    cp.push_back(&clean[i]);
    np.push_back(&noisy[i]);
  }
  const auto c = stack_features<float>(cp);
  const auto x = stack_features<float>(np);
  const std::vector<std::size_t> targets{0, 1, 2, 3, 4, 5, 6, 7};
  for (auto _ : state) {
    Tape<float> tape;
    const auto xv = tape.constant(x);
    const auto enh = enhance(xv, unet.forward(tape, xv, StatsMode::train));
    const auto loss = compose_loss(speaker, tape.constant(c), enh, std::span<const std::size_t>(targets), variant);
    unet.params().zero_grad();
    tape.backward(loss);
    adam_step(unet.params(), adam, 1e-3);
  }
}
BENCHMARK(BM_TrainStep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

static void BM_Eer(benchmark::State& state) {
  Rng rng(11);
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<double> s(n);
  std::vector<int> l(n);
  for (std::size_t i = 0; i < n; ++i) {
    l[i] = static_cast<int>(i % 2);
    s[i] = gaussian(rng, l[i] ? 1.0 : 0.0);
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(compute_eer(s, l));
    benchmark::DoNotOptimize(compute_min_dcf(s, l));
  }
}
BENCHMARK(BM_Eer)->Arg(200)->Arg(20000);

BENCHMARK_MAIN();
