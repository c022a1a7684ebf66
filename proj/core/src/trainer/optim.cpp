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

#include "gradw/trainer/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace gradw {

template <typename T>
AdamState<T> AdamState<T>::for_params(const ParamSet<T>& params) {
  AdamState s;
  for (const auto& p : params) {
    s.m.push_back(p.trainable ? Tensor<T>(p.value.shape()) : Tensor<T>());
    s.v.push_back(p.trainable ? Tensor<T>(p.value.shape()) : Tensor<T>());
  }
  return s;
}

template <typename T>
void adam_step(ParamSet<T>& params, AdamState<T>& state, double lr, const AdamConfig& cfg) {
  if (params.frozen()) throw FrozenError("adam_step on a frozen parameter set");
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw std::invalid_argument("adam_step: optimizer state does not match parameters");
  }
  ++state.step;
  const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
  const T c1 = static_cast<T>(1.0 - std::pow(cfg.beta1, static_cast<double>(state.step)));
  const T c2 = static_cast<T>(1.0 - std::pow(cfg.beta2, static_cast<double>(state.step)));
  const T eps = static_cast<T>(cfg.epsilon), rate = static_cast<T>(lr);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    if (!p.trainable) continue;
    auto& m = state.m[i];
    auto& v = state.v[i];
    if (m.shape() != p.value.shape() || v.shape() != p.value.shape()) {
      throw std::invalid_argument("adam_step: state shape mismatch for " + p.name);
    }
    const bool has_grad = !p.grad.empty();
    if (has_grad && p.grad.shape() != p.value.shape()) {
      throw std::invalid_argument("adam_step: gradient shape mismatch for " + p.name);
    }
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      const T g = has_grad ? p.grad[k] : T(0);
      m[k] = b1 * m[k] + (T(1) - b1) * g;
      v[k] = b2 * v[k] + (T(1) - b2) * g * g;
      p.value[k] -= rate * (m[k] / c1) / (std::sqrt(v[k] / c2) + eps);
    }
  }
}

double lr_schedule(double lr, std::size_t warmup_epochs, std::size_t epoch,
                   std::size_t step_in_epoch, std::size_t steps_per_epoch) {
  if (epoch >= warmup_epochs || steps_per_epoch == 0) return lr;
  const double total = static_cast<double>(warmup_epochs * steps_per_epoch);
  const double step = static_cast<double>(epoch * steps_per_epoch + step_in_epoch);
  return lr * (step + 1.0) / total;
}

template struct AdamState<float>;
template struct AdamState<double>;
template void adam_step(ParamSet<float>&, AdamState<float>&, double, const AdamConfig&);
template void adam_step(ParamSet<double>&, AdamState<double>&, double, const AdamConfig&);

}  // namespace gradw
