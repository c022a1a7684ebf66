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

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "gradw/autodiff/params.hpp"
#include "gradw/autodiff/tape.hpp"

namespace gradw {

/// Pair of extents on the (time, frequency) axes.
struct Extent2 {
  std::size_t t = 1;
  std::size_t f = 1;
  friend bool operator==(const Extent2&, const Extent2&) = default;
};

enum class ConvMode { forward, transposed };

/// 2-D convolution over the trailing (time, frequency) axes.
///
/// `input` is C_in x T x F or N x C_in x T x F. Forward kernels are laid out
/// C_out x C_in x kT x kF; transposed kernels C_in x C_out x kT x kF, so a
/// transposed layer is the exact adjoint of the forward layer with the same
/// kernel tensor. Forward output extent is floor((n + 2 pad - k) / stride) + 1
/// per axis; transposed output is (n - 1) stride - 2 pad + k, or
/// `output_extent` when given (which must lie within stride - 1 above that).
template <typename T>
Var<T> conv_layer(const Var<T>& input, const Var<T>& kernel, const std::optional<Var<T>>& bias,
                  ConvMode mode, Extent2 stride, Extent2 padding,
                  std::optional<Extent2> output_extent = std::nullopt);

enum class NormMode { batch, instance };
enum class StatsMode { train, eval };

/// Running statistics updated by batch normalization in train mode:
/// running = (1 - momentum) running + momentum batch. Variance is unbiased.
template <typename T>
struct RunningStats {
  Tensor<T>* mean = nullptr;
  Tensor<T>* var = nullptr;
  T momentum = T(0.1);
};

/// Normalizes N x C x T x F (or C x T x F) per channel. Batch mode pools
/// statistics over (N, T, F), instance mode over (T, F) per sample. In
/// batch + eval mode the running statistics are used and the op is affine.
template <typename T>
Var<T> normalize_2d(const Var<T>& input, NormMode mode, const Var<T>& scale, const Var<T>& shift,
                    StatsMode stats, T epsilon, RunningStats<T>* running = nullptr);

enum class Pointwise { relu, sigmoid };

template <typename T>
Var<T> pointwise(const Var<T>& input, Pointwise kind);
template <typename T>
Var<T> relu(const Var<T>& x) { return pointwise(x, Pointwise::relu); }
template <typename T>
Var<T> sigmoid(const Var<T>& x) { return pointwise(x, Pointwise::sigmoid); }

/// Softmax normalized over `axes` (per index of the remaining axes), with the
/// per-group maximum subtracted before exponentiation.
template <typename T>
Var<T> softmax_over(const Var<T>& input, const std::vector<std::size_t>& axes);

enum class ReduceKind { sum, mean, mean_and_std };

/// Reduces over `axes`, dropping them. mean_and_std returns the mean and the
/// unbiased standard deviation concatenated along the last remaining axis
/// (shape [2] when every axis is reduced) and needs >= 2 reduced elements.
template <typename T>
Var<T> reduce(const Var<T>& input, ReduceKind kind, const std::vector<std::size_t>& axes);

/// weight (m x n) * input + bias (m). Input may be a vector [n] or a batch [N x n].
template <typename T>
Var<T> affine(const Var<T>& input, const Var<T>& weight, const Var<T>& bias);

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> abs(const Var<T>& a);
template <typename T>
Var<T> scale(const Var<T>& a, T factor);
template <typename T>
Var<T> reshape(const Var<T>& a, Shape shape);

/// Concatenates along `axis`; all other extents must agree.
template <typename T>
Var<T> concat(const std::vector<Var<T>>& parts, std::size_t axis);

/// Sum of all elements, as a one-element tensor.
template <typename T>
Var<T> sum_all(const Var<T>& a);

/// For logits N x K, returns [N] with out[n] = logits[n, index[n]].
template <typename T>
Var<T> pick(const Var<T>& logits, std::span<const std::size_t> index);

/// Mean softmax cross-entropy of logits N x K against class labels.
template <typename T>
Var<T> cross_entropy(const Var<T>& logits, std::span<const std::size_t> labels);

/// Copies the value onto the tape as a constant: no gradient path back to `t`.
template <typename T>
Var<T> detach(const Var<T>& t);

}  // namespace gradw
