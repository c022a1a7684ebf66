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
#include <span>

namespace gradw {

/// dot(a, b) / (|a| |b|). Throws on a zero-norm input or a length mismatch.
double cosine_score(std::span<const double> a, std::span<const double> b);
double cosine_score(std::span<const float> a, std::span<const float> b);

struct EerResult {
  double eer = 0;
  double threshold = 0;  // lower end of the interpolated crossing
};

/// A trial is accepted when score >= threshold. Every distinct score and +inf
/// serve as thresholds; EER interpolates linearly between the two adjacent
/// thresholds where FRR - FAR changes sign. labels: 1 target, 0 nontarget.
EerResult compute_eer(std::span<const double> scores, std::span<const int> labels);

/// Minimum over the same threshold sweep (accept-all and reject-all included)
/// of c_miss p P_miss + c_fa (1 - p) P_fa, divided by min(c_miss p, c_fa (1 - p)).
double compute_min_dcf(std::span<const double> scores, std::span<const int> labels,
                       double p_target = 0.01, double c_miss = 1.0, double c_fa = 1.0);

}  // namespace gradw
