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
#include <vector>

#include "gradw/autodiff/params.hpp"

namespace gradw {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  bool operator==(const AdamConfig&) const = default;
};

template <typename T>
struct AdamState {
  std::vector<Tensor<T>> m, v;  // one slot per parameter entry; empty for buffers
  std::size_t step = 0;

  static AdamState for_params(const ParamSet<T>& params);
};

/// One Adam update with bias correction, reading gradients from
/// Parameter::grad (an empty grad counts as zero). Buffers are skipped.
template <typename T>
void adam_step(ParamSet<T>& params, AdamState<T>& state, double lr, const AdamConfig& cfg = {});

/// Linear per-step warmup from lr/(warmup_epochs*steps_per_epoch) up to lr,
/// then constant.
double lr_schedule(double lr, std::size_t warmup_epochs, std::size_t epoch,
                   std::size_t step_in_epoch, std::size_t steps_per_epoch);

extern template struct AdamState<float>;
extern template struct AdamState<double>;

}  // namespace gradw
