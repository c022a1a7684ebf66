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
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "gradw/autodiff/tensor.hpp"

namespace gradw {

/// A named tensor owned by a model. Non-trainable entries hold buffers such as
/// normalization running statistics; they are saved with the model but never
/// receive gradients.
template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
  bool trainable = true;
};

class FrozenError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

template <typename T>
class ParamSet {
 public:
  std::size_t add(std::string name, Tensor<T> value, bool trainable = true) {
    if (find(name) != nullptr) {
      throw std::invalid_argument("duplicate parameter name: " + name);
    }
    items_.push_back(Parameter<T>{std::move(name), std::move(value), {}, trainable});
    return items_.size() - 1;
  }

  std::size_t size() const noexcept { return items_.size(); }
  Parameter<T>& operator[](std::size_t i) { return items_.at(i); }
  const Parameter<T>& operator[](std::size_t i) const { return items_.at(i); }

  Parameter<T>* find(std::string_view name) {
    for (auto& p : items_) {
      if (p.name == name) return &p;
    }
    return nullptr;
  }
  const Parameter<T>* find(std::string_view name) const {
    return const_cast<ParamSet*>(this)->find(name);
  }

  auto begin() noexcept { return items_.begin(); }
  auto end() noexcept { return items_.end(); }
  auto begin() const noexcept { return items_.begin(); }
  auto end() const noexcept { return items_.end(); }

  bool frozen() const noexcept { return frozen_; }
  void set_frozen(bool frozen) noexcept { frozen_ = frozen; }

  void zero_grad() {
    for (auto& p : items_) p.grad = Tensor<T>();
  }

  std::size_t trainable_count() const {
    std::size_t n = 0;
    for (const auto& p : items_) {
      if (p.trainable) n += p.value.size();
    }
    return n;
  }

  /// Copies values into another precision. Gradients are not carried over.
  template <typename U>
  ParamSet<U> cast() const {
    ParamSet<U> out;
    for (const auto& p : items_) out.add(p.name, p.value.template cast<U>(), p.trainable);
    out.set_frozen(frozen_);
    return out;
  }

  /// Bitwise equality of all values (gradients ignored).
  bool same_values(const ParamSet& other) const {
    if (items_.size() != other.items_.size()) return false;
    for (std::size_t i = 0; i < items_.size(); ++i) {
      if (items_[i].name != other.items_[i].name) return false;
      if (!(items_[i].value == other.items_[i].value)) return false;
    }
    return true;
  }

 private:
  std::vector<Parameter<T>> items_;
  bool frozen_ = false;
};

}  // namespace gradw
