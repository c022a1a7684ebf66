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

#include "gradw/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace gradw {
namespace {

template <typename T>
double cosine(std::span<const T> a, std::span<const T> b) {
  if (a.size() != b.size() || a.empty()) {
    throw std::invalid_argument("cosine_score: vectors of length " + std::to_string(a.size()) +
                                " and " + std::to_string(b.size()));
  }
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (!(na > 0) || !(nb > 0)) throw std::invalid_argument("cosine_score: zero-norm input");
  return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

struct Point {
  double threshold, far, frr;
};

// Operating points for thresholds at each distinct score (ascending) and +inf.
std::vector<Point> sweep(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw std::invalid_argument("metrics: scores and labels differ in length");
  }
  std::size_t nt = 0;
  for (int l : labels) {
    if (l != 0 && l != 1) throw std::invalid_argument("metrics: labels must be 0 or 1");
    nt += static_cast<std::size_t>(l);
  }
  const std::size_t nn = labels.size() - nt;
  if (nt == 0 || nn == 0) {
    throw std::invalid_argument("metrics: need at least one target and one nontarget trial");
  }
  for (double s : scores) {
    if (std::isnan(s)) throw std::invalid_argument("metrics: NaN score");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  std::vector<Point> pts;
  std::size_t rejected_t = 0, rejected_n = 0;  // trials with score < threshold
  for (std::size_t i = 0; i < order.size();) {
    const double th = scores[order[i]];
    pts.push_back({th, static_cast<double>(nn - rejected_n) / static_cast<double>(nn),
                   static_cast<double>(rejected_t) / static_cast<double>(nt)});
    for (; i < order.size() && scores[order[i]] == th; ++i) {
      (labels[order[i]] ? rejected_t : rejected_n)++;
    }
  }
  pts.push_back({std::numeric_limits<double>::infinity(), 0.0, 1.0});
  return pts;
}

}  // namespace

double cosine_score(std::span<const double> a, std::span<const double> b) { return cosine(a, b); }
double cosine_score(std::span<const float> a, std::span<const float> b) { return cosine(a, b); }

EerResult compute_eer(std::span<const double> scores, std::span<const int> labels) {
  const auto pts = sweep(scores, labels);
  // FRR - FAR strictly increases along the sweep, from <= 0 to 1.
  std::size_t i = 0;
  while (i + 1 < pts.size() && pts[i + 1].frr - pts[i + 1].far <= 0) ++i;
  const Point& a = pts[i];
  const double da = a.frr - a.far;
  if (da == 0 || i + 1 == pts.size()) return {a.far, a.threshold};
  const Point& b = pts[i + 1];
  const double t = da / (da - (b.frr - b.far));
  return {a.far + t * (b.far - a.far), a.threshold};
}

double compute_min_dcf(std::span<const double> scores, std::span<const int> labels,
                       double p_target, double c_miss, double c_fa) {
  if (!(p_target > 0 && p_target < 1)) throw std::invalid_argument("minDCF: p_target outside (0, 1)");
  if (!(c_miss > 0 && c_fa > 0)) throw std::invalid_argument("minDCF: costs must be positive");
  const double w_miss = c_miss * p_target, w_fa = c_fa * (1 - p_target);
  double best = std::numeric_limits<double>::infinity();
  for (const Point& p : sweep(scores, labels)) best = std::min(best, w_miss * p.frr + w_fa * p.far);
  return best / std::min(w_miss, w_fa);
}

}  // namespace gradw
