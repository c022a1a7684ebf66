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

#include <functional>
#include <vector>

#include "gradw/autodiff/ops.hpp"
#include "gradw/common/random.hpp"

namespace gradw::testing {

Tensor<double> random_tensor(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0);

/// Same as random_tensor but keeps every entry at least `gap` away from zero,
/// so kinks (relu, abs) stay out of reach of a finite-difference step.
Tensor<double> random_away_from_zero(const Shape& shape, Rng& rng, double gap = 1e-2);

using Builder = std::function<Var<double>(Tape<double>&, const std::vector<Var<double>>&)>;

struct GradCheckResult {
  double max_rel_error = 0;  // over all inputs, inf-norm relative to the numeric gradient
  bool connected = true;
};

/// Projects the builder's output on a fixed random direction R, then compares
/// reverse-mode gradients of sum(out * R) for every input against central
/// differences with step h.
GradCheckResult check_gradients(const Builder& build, const std::vector<Tensor<double>>& inputs,
                                Rng& rng, double h = 1e-5);

/// inf-norm of (a - b) over inf-norm of b (floored at 1e-12).
double relative_error(const Tensor<double>& a, const Tensor<double>& b);

}  // namespace gradw::testing
