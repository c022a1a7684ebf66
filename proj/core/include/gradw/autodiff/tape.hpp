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
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "gradw/autodiff/params.hpp"
#include "gradw/autodiff/tensor.hpp"

namespace gradw {

template <typename T>
class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; only valid while the
/// tape that produced it is alive.
template <typename T>
class Var {
 public:
  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

  Var() = default;
  Var(Tape<T>* tape, std::size_t id) : tape_(tape), id_(id) {}

  bool valid() const noexcept { return tape_ != nullptr; }
  std::size_t id() const noexcept { return id_; }
  Tape<T>& tape() const;
  const Tensor<T>& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;

 private:
  Tape<T>* tape_ = nullptr;
  std::size_t id_ = npos;
};

/// View handed to an op's backward closure: the op's output gradient, its
/// input values, and lazily zero-initialized gradient slots for its inputs.
template <typename T>
class GradSink {
 public:
  GradSink(Tape<T>& tape, std::size_t node) : tape_(tape), node_(node) {}

  const Tensor<T>& output() const;
  const Tensor<T>& output_grad() const;
  const Tensor<T>& input(std::size_t k) const;
  bool wants(std::size_t k) const;
  std::span<T> grad(std::size_t k);

 private:
  Tape<T>& tape_;
  std::size_t node_;
};

template <typename T>
using BackwardFn = std::function<void(GradSink<T>&)>;

enum class BackwardScope {
  full,       // every node that requires grad; parameter gradients accumulate
  taps_only,  // only nodes downstream of a flagged tap; parameters untouched
};

template <typename T>
struct TapGradient {
  std::size_t node = 0;
  Tensor<T> grad;
  bool connected = false;  // false: scalar does not depend on this tap
};

class TapError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Reverse-mode differentiation tape. Rebuilt for every forward pass; nodes
/// are stored in creation order, which is a topological order.
template <typename T>
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<T> constant(Tensor<T> value);
  Var<T> variable(Tensor<T> value);
  /// Leaf bound to params[index]. Requires grad iff the entry is trainable and
  /// the set is not frozen; gradients from a full backward pass accumulate into
  /// Parameter::grad.
  Var<T> parameter(ParamSet<T>& params, std::size_t index);
  Var<T> record(Tensor<T> value, std::vector<Var<T>> inputs, BackwardFn<T> backward);

  /// Flags v for gradient capture. Must happen before v feeds any other op.
  void mark_tap(const Var<T>& v);
  bool is_tap(const Var<T>& v) const;

  std::vector<TapGradient<T>> backward(const Var<T>& scalar,
                                       BackwardScope scope = BackwardScope::full);

  /// Gradient reached by the last backward pass; zeros if none.
  Tensor<T> grad(const Var<T>& v) const;

  const Tensor<T>& value(std::size_t id) const { return nodes_.at(id).value; }
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  friend class GradSink<T>;

  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    std::vector<std::size_t> inputs;
    BackwardFn<T> backward;
    Parameter<T>* param = nullptr;
    std::size_t consumers = 0;
    bool requires_grad = false;
    bool tap = false;
  };

  Var<T> push(Node node);
  void check_owned(const Var<T>& v) const;
  bool in_scope(std::size_t id) const { return scope_mask_.empty() || scope_mask_[id]; }

  std::vector<Node> nodes_;
  std::vector<char> scope_mask_;
};

/// Runs a backward pass from `scalar` and returns gradients for exactly the
/// requested taps, in order. Every tap must have been flagged with mark_tap.
template <typename T>
std::vector<TapGradient<T>> backward_to(const Var<T>& scalar, std::span<const Var<T>> taps,
                                        BackwardScope scope = BackwardScope::full);

extern template class Tape<float>;
extern template class Tape<double>;
extern template class GradSink<float>;
extern template class GradSink<double>;
extern template class Var<float>;
extern template class Var<double>;

}  // namespace gradw
