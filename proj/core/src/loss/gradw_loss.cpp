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

#include "gradw/loss/gradw_loss.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace gradw {
namespace {

constexpr std::array<std::string_view, 8> kNames{"grad_w",     "equal_w", "clean_w",  "res_w",
                                                 "no_softmax", "channel", "residual", "both"};

// Batched distance: G tensors N x C x T' x F' to N x T' x F' (or N x C).
template <typename T>
Var<T> distance_op(const Var<T>& g_enh, const Var<T>& g_ref, DistanceMode mode) {
  switch (mode) {
    case DistanceMode::artifact: return reduce(sub(g_enh, g_ref), ReduceKind::sum, {1});
    case DistanceMode::residual: return reduce(sub(g_ref, g_enh), ReduceKind::sum, {1});
    case DistanceMode::both: return reduce(abs(sub(g_enh, g_ref)), ReduceKind::sum, {1});
    case DistanceMode::channel: return reduce(sub(g_enh, g_ref), ReduceKind::sum, {2, 3});
  }
  throw std::logic_error("unknown distance mode");
}

// Per-item min-max scaling of rows of d (N x ...), with its exact derivative
// for fixed argmin/argmax.
template <typename T>
Var<T> minmax_op(const Var<T>& d) {
  const Tensor<T>& x = d.value();
  const std::size_t n = x.extent(0), m = x.size() / n;
  Tensor<T> y(x.shape());
  std::vector<std::size_t> lo(n), hi(n);
  for (std::size_t i = 0; i < n; ++i) {
    const T* row = x.data() + i * m;
    lo[i] = static_cast<std::size_t>(std::min_element(row, row + m) - row);
    hi[i] = static_cast<std::size_t>(std::max_element(row, row + m) - row);
    const T range = row[hi[i]] - row[lo[i]];
    if (!(range > T(0))) {
      throw std::domain_error("min-max normalization of a constant distance map");
    }
    for (std::size_t k = 0; k < m; ++k) y[i * m + k] = (row[k] - row[lo[i]]) / range;
  }
  return d.tape().record(std::move(y), {d}, [n, m, lo, hi](GradSink<T>& s) {
    if (!s.wants(0)) return;
    auto gx = s.grad(0);
    const Tensor<T>& x = s.input(0);
    const Tensor<T>& y = s.output();
    const Tensor<T>& gy = s.output_grad();
    for (std::size_t i = 0; i < n; ++i) {
      const T range = x[i * m + hi[i]] - x[i * m + lo[i]];
      T to_lo = 0, to_hi = 0;
      for (std::size_t k = 0; k < m; ++k) {
        const T g = gy[i * m + k] / range;
        gx[i * m + k] += g;
        to_lo += g * (y[i * m + k] - T(1));
        to_hi -= g * y[i * m + k];
      }
      gx[i * m + lo[i]] += to_lo;
      gx[i * m + hi[i]] += to_hi;
    }
  });
}

template <typename T>
Var<T> weight_op(const Var<T>& d, WeightScheme scheme) {
  std::vector<std::size_t> axes;
  for (std::size_t a = 1; a < d.shape().size(); ++a) axes.push_back(a);
  switch (scheme) {
    case WeightScheme::softmax:
    case WeightScheme::clean_softmax: return softmax_over(d, axes);
    case WeightScheme::softmax_plus_one: {
      const Var<T> p = softmax_over(d, axes);
      return add(p, d.tape().constant(Tensor<T>(p.shape(), T(1))));
    }
    case WeightScheme::minmax: return minmax_op(d);
  }
  throw std::logic_error("unknown weight scheme");
}

Normalization normalization_of(WeightScheme s) {
  switch (s) {
    case WeightScheme::minmax: return Normalization::minmax;
    case WeightScheme::softmax_plus_one: return Normalization::softmax_plus_one;
    default: return Normalization::softmax;
  }
}

template <typename T>
Tensor<T> with_leading_one(const Tensor<T>& t) {
  Shape s{1};
  s.insert(s.end(), t.shape().begin(), t.shape().end());
  return t.reshaped(std::move(s));
}

template <typename T>
Tensor<T> item(const Tensor<T>& batch, std::size_t i) {
  const Shape s(batch.shape().begin() + 1, batch.shape().end());
  const std::size_t m = numel(s);
  Tensor<T> out(s);
  std::copy_n(batch.data() + i * m, m, out.data());
  return out;
}

template <typename T>
std::vector<WeightMap<T>> split_weights(const Tensor<T>& p, WeightScheme scheme,
                                        DistanceDomain domain) {
  std::vector<WeightMap<T>> out;
  for (std::size_t i = 0; i < p.extent(0); ++i) {
    out.push_back({item(p, i), normalization_of(scheme), domain});
  }
  return out;
}

}  // namespace

const std::array<LossVariant, 8>& all_loss_variants() {
  static const std::array<LossVariant, 8> all{
      LossVariant::grad_w,     LossVariant::equal_w, LossVariant::clean_w,  LossVariant::res_w,
      LossVariant::no_softmax, LossVariant::channel, LossVariant::residual, LossVariant::both};
  return all;
}

std::string_view to_string(LossVariant v) { return kNames.at(static_cast<std::size_t>(v)); }

LossVariant parse_loss_variant(std::string_view name) {
  for (LossVariant v : all_loss_variants()) {
    if (to_string(v) == name) return v;
  }
  std::string valid;
  for (auto n : kNames) valid += (valid.empty() ? "" : ",") + std::string(n);
  throw std::invalid_argument("unknown loss variant '" + std::string(name) + "' (valid: " + valid +
                              ")");
}

VariantSpec variant_spec(LossVariant v) {
  switch (v) {
    case LossVariant::grad_w: return {DistanceMode::artifact, WeightScheme::softmax, true};
    case LossVariant::equal_w: return {std::nullopt, WeightScheme::softmax, false};
    case LossVariant::clean_w: return {std::nullopt, WeightScheme::clean_softmax, true};
    case LossVariant::res_w: return {DistanceMode::artifact, WeightScheme::softmax_plus_one, true};
    case LossVariant::no_softmax: return {DistanceMode::artifact, WeightScheme::minmax, true};
    case LossVariant::channel: return {DistanceMode::channel, WeightScheme::softmax, true};
    case LossVariant::residual: return {DistanceMode::residual, WeightScheme::softmax, true};
    case LossVariant::both: return {DistanceMode::both, WeightScheme::softmax, true};
  }
  throw std::logic_error("unknown loss variant");
}

template <typename T>
GradientMap<T> gradient_map(SpeakerNet<T>& model, const FeatureMap& features, std::size_t target) {
  Tape<T> tape;
  const auto trace = speaker_forward(tape, model, features, StatsMode::eval, true, target);
  const std::array<std::size_t, 1> idx{target};
  const Var<T> y = sum_all(pick(trace.logits, std::span<const std::size_t>(idx)));
  const std::array<Var<T>, 1> taps{trace.activation};
  auto g = backward_to(y, std::span<const Var<T>>(taps), BackwardScope::taps_only);
  return {item(g[0].grad, 0), GradSource::ref};
}

template <typename T>
DistanceMap<T> artifact_distance(const GradientMap<T>& g_enh, const GradientMap<T>& g_ref,
                                 DistanceMode mode) {
  if (g_enh.values.shape() != g_ref.values.shape() || g_enh.values.rank() != 3) {
    throw ShapeError("artifact_distance: gradient maps must share a C x T' x F' shape, got " +
                     to_string(g_enh.values.shape()) + " and " + to_string(g_ref.values.shape()));
  }
  Tape<T> tape;
  const Var<T> d = distance_op(tape.constant(with_leading_one(g_enh.values)),
                               tape.constant(with_leading_one(g_ref.values)), mode);
  return {item(d.value(), 0),
          mode == DistanceMode::channel ? DistanceDomain::channel : DistanceDomain::time_freq};
}

template <typename T>
DistanceMap<T> clean_distance(const GradientMap<T>& g_ref) {
  if (g_ref.values.rank() != 3) throw ShapeError("clean_distance: expected C x T' x F'");
  Tape<T> tape;
  const Var<T> d = reduce(tape.constant(with_leading_one(g_ref.values)), ReduceKind::sum, {1});
  return {item(d.value(), 0), DistanceDomain::time_freq};
}

template <typename T>
WeightMap<T> weight_map(const DistanceMap<T>& d, WeightScheme scheme) {
  Tape<T> tape;
  const Var<T> p = weight_op(tape.constant(with_leading_one(d.values)), scheme);
  return {item(p.value(), 0), normalization_of(scheme), d.domain};
}

template <typename T>
Var<T> enhancement_loss(const Var<T>& a_ref, const Var<T>& a_enh,
                        std::span<const WeightMap<T>> p, LossVariant variant) {
  const Shape s = a_enh.shape();
  if (a_ref.shape() != s || (s.size() != 3 && s.size() != 4)) {
    throw ShapeError("enhancement_loss: activations must share a [N x] C x T' x F' shape, got " +
                     to_string(a_ref.shape()) + " and " + to_string(s));
  }
  const bool batched = s.size() == 4;
  const std::size_t n = batched ? s[0] : 1;
  const std::size_t c = s[s.size() - 3], t = s[s.size() - 2], f = s[s.size() - 1];
  const VariantSpec spec = variant_spec(variant);
  const Var<T> diff = abs(sub(detach(a_ref), a_enh));
  if (!spec.weighted) {
    if (!p.empty()) throw std::invalid_argument("enhancement_loss: equal_w takes no weight map");
    return scale(sum_all(diff), T(1) / static_cast<T>(n));
  }
  if (p.size() != n) {
    throw std::invalid_argument("enhancement_loss: expected " + std::to_string(n) +
                                " weight maps, got " + std::to_string(p.size()));
  }
  const bool channel = spec.distance == DistanceMode::channel;
  Tensor<T> w(s);
  for (std::size_t i = 0; i < n; ++i) {
    const WeightMap<T>& m = p[i];
    const Shape want = channel ? Shape{c} : Shape{t, f};
    if (m.domain != (channel ? DistanceDomain::channel : DistanceDomain::time_freq) ||
        m.values.shape() != want) {
      throw ShapeError("enhancement_loss: weight map " + to_string(m.values.shape()) +
                       " does not match variant " + std::string(to_string(variant)) +
                       " (expected " + to_string(want) + ")");
    }
    T* wi = w.data() + i * c * t * f;
    for (std::size_t ci = 0; ci < c; ++ci) {
      for (std::size_t k = 0; k < t * f; ++k) {
        wi[ci * t * f + k] = channel ? m.values[ci] : m.values[k];
      }
    }
  }
  const Var<T> weighted = mul(diff, a_enh.tape().constant(std::move(w)));
  return scale(sum_all(weighted), T(1) / static_cast<T>(n));
}

template <typename T>
Var<T> compose_loss(SpeakerNet<T>& frozen_model, const Var<T>& clean, const Var<T>& enh,
                    std::span<const std::size_t> targets, LossVariant variant,
                    ComposeTrace<T>* trace) {
  if (!frozen_model.frozen()) throw FrozenError("compose_loss: speaker model is not frozen");
  if (&clean.tape() != &enh.tape()) throw std::logic_error("compose_loss: inputs on different tapes");
  if (clean.shape() != enh.shape()) {
    throw ShapeError("compose_loss: clean " + to_string(clean.shape()) + " vs enhanced " +
                     to_string(enh.shape()));
  }
  if (targets.size() != clean.shape()[0]) {
    throw std::invalid_argument("compose_loss: one target per batch item required");
  }
  Tape<T>& tape = enh.tape();
  const VariantSpec spec = variant_spec(variant);
  const bool need_grads = spec.weighted;

  ComposeTrace<T> local;
  ComposeTrace<T>& tr = trace ? *trace : local;
  const auto ref = frozen_model.forward(tape, clean, StatsMode::eval, need_grads);
  const auto enh_pass = frozen_model.forward(tape, enh, StatsMode::eval, need_grads);
  tr.a_ref = ref.activation;
  tr.a_enh = enh_pass.activation;
  if (!need_grads) {
    return enhancement_loss(tr.a_ref, tr.a_enh, std::span<const WeightMap<T>>(), variant);
  }

  auto tap_grad = [&](const ForwardTrace<T>& pass) {
    const Var<T> y = sum_all(pick(pass.logits, targets));
    const std::array<Var<T>, 1> taps{pass.activation};
    return backward_to(y, std::span<const Var<T>>(taps), BackwardScope::taps_only)[0].grad;
  };
  tr.g_ref = tape.variable(tap_grad(ref));
  if (spec.distance) {
    tr.g_enh = tape.variable(tap_grad(enh_pass));
    tr.d = distance_op(tr.g_enh, tr.g_ref, *spec.distance);
  } else {
    tr.d = reduce(tr.g_ref, ReduceKind::sum, {1});
  }
  tr.p = weight_op(tr.d, spec.scheme);
  tr.p_detached = detach(tr.p);
  tr.weights = split_weights(tr.p_detached.value(), spec.scheme,
                             spec.distance == DistanceMode::channel ? DistanceDomain::channel
                                                                    : DistanceDomain::time_freq);
  return enhancement_loss(tr.a_ref, tr.a_enh, std::span<const WeightMap<T>>(tr.weights), variant);
}

#define GRADW_INSTANTIATE(T)                                                                    \
  template GradientMap<T> gradient_map(SpeakerNet<T>&, const FeatureMap&, std::size_t);        \
  template DistanceMap<T> artifact_distance(const GradientMap<T>&, const GradientMap<T>&,      \
                                            DistanceMode);                                     \
  template DistanceMap<T> clean_distance(const GradientMap<T>&);                               \
  template WeightMap<T> weight_map(const DistanceMap<T>&, WeightScheme);                       \
  template Var<T> enhancement_loss(const Var<T>&, const Var<T>&, std::span<const WeightMap<T>>, \
                                   LossVariant);                                               \
  template Var<T> compose_loss(SpeakerNet<T>&, const Var<T>&, const Var<T>&,                   \
                               std::span<const std::size_t>, LossVariant, ComposeTrace<T>*);
GRADW_INSTANTIATE(float)
GRADW_INSTANTIATE(double)
#undef GRADW_INSTANTIATE

}  // namespace gradw
