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

#include "gradw/autodiff/tape.hpp"

#include <string>

namespace gradw {

template <typename T>
Tape<T>& Var<T>::tape() const {
  if (!tape_) throw std::logic_error("use of an unbound Var");
  return *tape_;
}

template <typename T>
const Tensor<T>& Var<T>::value() const {
  return tape().value(id_);
}

template <typename T>
bool Var<T>::requires_grad() const {
  return tape().requires_grad(id_);
}

template <typename T>
const Tensor<T>& GradSink<T>::output() const {
  return tape_.nodes_[node_].value;
}

template <typename T>
const Tensor<T>& GradSink<T>::output_grad() const {
  return tape_.nodes_[node_].grad;
}

template <typename T>
const Tensor<T>& GradSink<T>::input(std::size_t k) const {
  return tape_.nodes_[tape_.nodes_[node_].inputs.at(k)].value;
}

template <typename T>
bool GradSink<T>::wants(std::size_t k) const {
  const std::size_t id = tape_.nodes_[node_].inputs.at(k);
  return tape_.nodes_[id].requires_grad && tape_.in_scope(id);
}

template <typename T>
std::span<T> GradSink<T>::grad(std::size_t k) {
  auto& n = tape_.nodes_[tape_.nodes_[node_].inputs.at(k)];
  if (n.grad.empty()) n.grad = Tensor<T>(n.value.shape());
  return n.grad.values();
}

template <typename T>
Var<T> Tape<T>::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
void Tape<T>::check_owned(const Var<T>& v) const {
  if (!v.valid() || &v.tape() != this || v.id() >= nodes_.size()) {
    throw std::logic_error("Var does not belong to this tape");
  }
}

template <typename T>
Var<T> Tape<T>::constant(Tensor<T> value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

template <typename T>
Var<T> Tape<T>::variable(Tensor<T> value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  return push(std::move(n));
}

template <typename T>
Var<T> Tape<T>::parameter(ParamSet<T>& params, std::size_t index) {
  Parameter<T>& p = params[index];
  Node n;
  n.value = p.value;
  n.requires_grad = p.trainable && !params.frozen();
  if (n.requires_grad) n.param = &p;
  return push(std::move(n));
}

template <typename T>
Var<T> Tape<T>::record(Tensor<T> value, std::vector<Var<T>> inputs, BackwardFn<T> backward) {
  Node n;
  n.value = std::move(value);
  n.inputs.reserve(inputs.size());
  for (const auto& v : inputs) {
    check_owned(v);
    n.inputs.push_back(v.id());
    n.requires_grad = n.requires_grad || nodes_[v.id()].requires_grad;
    ++nodes_[v.id()].consumers;
  }
  if (n.requires_grad) n.backward = std::move(backward);
  return push(std::move(n));
}

template <typename T>
void Tape<T>::mark_tap(const Var<T>& v) {
  check_owned(v);
  auto& n = nodes_[v.id()];
  if (n.consumers != 0) {
    throw TapError("tap on node " + std::to_string(v.id()) +
                   " flagged after it was already consumed");
  }
  n.tap = true;
  n.requires_grad = true;
}

template <typename T>
bool Tape<T>::is_tap(const Var<T>& v) const {
  check_owned(v);
  return nodes_[v.id()].tap;
}

template <typename T>
std::vector<TapGradient<T>> Tape<T>::backward(const Var<T>& scalar, BackwardScope scope) {
  check_owned(scalar);
  if (nodes_[scalar.id()].value.size() != 1) {
    throw ShapeError("backward needs a scalar, got shape " +
                     to_string(nodes_[scalar.id()].value.shape()));
  }
  for (auto& n : nodes_) n.grad = Tensor<T>();

  scope_mask_.clear();
  if (scope == BackwardScope::taps_only) {
    scope_mask_.assign(nodes_.size(), 0);
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      bool dep = nodes_[i].tap;
      for (std::size_t in : nodes_[i].inputs) dep = dep || scope_mask_[in];
      scope_mask_[i] = dep ? 1 : 0;
    }
  }

  const std::size_t root = scalar.id();
  if (nodes_[root].requires_grad && in_scope(root)) {
    nodes_[root].grad = Tensor<T>(nodes_[root].value.shape(), T(1));
    for (std::size_t i = root + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.requires_grad || n.grad.empty() || !in_scope(i)) continue;
      if (n.param != nullptr && scope == BackwardScope::full) {
        if (n.param->grad.empty()) n.param->grad = Tensor<T>(n.param->value.shape());
        auto dst = n.param->grad.values();
        auto src = n.grad.values();
        for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
      }
      if (n.backward) {
        GradSink<T> sink(*this, i);
        n.backward(sink);
      }
    }
  }
  scope_mask_.clear();

  std::vector<TapGradient<T>> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (!nodes_[i].tap) continue;
    TapGradient<T> g;
    g.node = i;
    g.connected = !nodes_[i].grad.empty();
    g.grad = g.connected ? nodes_[i].grad : Tensor<T>(nodes_[i].value.shape());
    out.push_back(std::move(g));
  }
  return out;
}

template <typename T>
Tensor<T> Tape<T>::grad(const Var<T>& v) const {
  check_owned(v);
  const auto& n = nodes_[v.id()];
  return n.grad.empty() ? Tensor<T>(n.value.shape()) : n.grad;
}

template <typename T>
std::vector<TapGradient<T>> backward_to(const Var<T>& scalar, std::span<const Var<T>> taps,
                                        BackwardScope scope) {
  Tape<T>& tape = scalar.tape();
  for (const auto& t : taps) {
    if (!tape.is_tap(t)) {
      throw TapError("node " + std::to_string(t.id()) + " is not a registered tap");
    }
  }
  auto all = tape.backward(scalar, scope);
  std::vector<TapGradient<T>> out;
  out.reserve(taps.size());
  for (const auto& t : taps) {
    for (auto& g : all) {
      if (g.node == t.id()) {
        out.push_back(g);
        break;
      }
    }
  }
  return out;
}

template class Var<float>;
template class Var<double>;
template class GradSink<float>;
template class GradSink<double>;
template class Tape<float>;
template class Tape<double>;
template std::vector<TapGradient<float>> backward_to(const Var<float>&,
                                                     std::span<const Var<float>>, BackwardScope);
template std::vector<TapGradient<double>> backward_to(const Var<double>&,
                                                      std::span<const Var<double>>,
                                                      BackwardScope);

}  // namespace gradw
