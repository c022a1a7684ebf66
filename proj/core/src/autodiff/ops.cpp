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

#include "gradw/autodiff/ops.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <string>

namespace gradw {
namespace {

std::string axis_name(std::size_t axis) {
  switch (axis) {
    case 0: return "channel";
    case 1: return "time";
    case 2: return "frequency";
    default: return "axis " + std::to_string(axis);
  }
}

// Geometry of a plain correlation x[N,Ci,H,W] * w[Co,Ci,kh,kw] -> y[N,Co,Ho,Wo].
struct ConvGeom {
  std::size_t n, ci, h, w, co, kh, kw, ho, wo;
  Extent2 stride, pad;
};

// Valid [lo, hi) output columns for kernel column j.
inline void col_range(const ConvGeom& g, std::size_t j, std::size_t& lo, std::size_t& hi) {
  const long s = static_cast<long>(g.stride.f);
  const long off = static_cast<long>(j) - static_cast<long>(g.pad.f);
  long a = off >= 0 ? 0 : (-off + s - 1) / s;
  long b = (static_cast<long>(g.w) - 1 - off) / s + 1;
  if (static_cast<long>(g.w) - 1 - off < 0) b = 0;
  a = std::min<long>(a, static_cast<long>(g.wo));
  b = std::clamp<long>(b, a, static_cast<long>(g.wo));
  lo = static_cast<std::size_t>(a);
  hi = static_cast<std::size_t>(b);
}

inline bool row_of(const ConvGeom& g, std::size_t oh, std::size_t i, std::size_t& ih) {
  const long r = static_cast<long>(oh * g.stride.t + i) - static_cast<long>(g.pad.t);
  if (r < 0 || r >= static_cast<long>(g.h)) return false;
  ih = static_cast<std::size_t>(r);
  return true;
}

// Unrolls one item into col[(ci * kh + i) * kw + j][oh * wo + ow], zero where
// the kernel tap falls into padding.
template <typename T>
void im2col(const ConvGeom& g, const std::vector<std::size_t>& lo,
            const std::vector<std::size_t>& hi, const T* x, T* col) {
  const std::size_t plane = g.ho * g.wo;
  for (std::size_t ci = 0; ci < g.ci; ++ci) {
    const T* xp = x + ci * g.h * g.w;
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j) {
        T* c = col + ((ci * g.kh + i) * g.kw + j) * plane;
        const std::size_t shift = j - g.pad.f;  // modular; valid inside [lo, hi)
        for (std::size_t oh = 0; oh < g.ho; ++oh) {
          T* cr = c + oh * g.wo;
          std::size_t ih;
          if (!row_of(g, oh, i, ih)) {
            std::fill(cr, cr + g.wo, T(0));
            continue;
          }
          const T* xr = xp + ih * g.w;
          std::fill(cr, cr + lo[j], T(0));
          for (std::size_t ow = lo[j]; ow < hi[j]; ++ow) cr[ow] = xr[ow * g.stride.f + shift];
          std::fill(cr + hi[j], cr + g.wo, T(0));
        }
      }
    }
  }
}

// Adjoint of im2col: x += fold(col).
template <typename T>
void col2im(const ConvGeom& g, const std::vector<std::size_t>& lo,
            const std::vector<std::size_t>& hi, const T* col, T* x) {
  const std::size_t plane = g.ho * g.wo;
  for (std::size_t ci = 0; ci < g.ci; ++ci) {
    T* xp = x + ci * g.h * g.w;
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j) {
        const T* c = col + ((ci * g.kh + i) * g.kw + j) * plane;
        const std::size_t shift = j - g.pad.f;
        for (std::size_t oh = 0; oh < g.ho; ++oh) {
          std::size_t ih;
          if (!row_of(g, oh, i, ih)) continue;
          T* xr = xp + ih * g.w;
          const T* cr = c + oh * g.wo;
          for (std::size_t ow = lo[j]; ow < hi[j]; ++ow) xr[ow * g.stride.f + shift] += cr[ow];
        }
      }
    }
  }
}

template <typename T>
struct ColumnBuffer {
  std::vector<std::size_t> lo, hi;
  std::vector<T> col;
  std::size_t taps = 0, plane = 0;

  explicit ColumnBuffer(const ConvGeom& g)
      : lo(g.kw), hi(g.kw), taps(g.ci * g.kh * g.kw), plane(g.ho * g.wo) {
    for (std::size_t j = 0; j < g.kw; ++j) col_range(g, j, lo[j], hi[j]);
    col.resize(taps * plane);
  }
};

// Fixed 8-lane partial sums: vectorizable and independent of run or thread.
template <typename T>
T dot(const T* a, const T* b, std::size_t n) {
  std::array<T, 8> lane{};
  std::size_t p = 0;
  for (; p + 8 <= n; p += 8) {
    for (std::size_t l = 0; l < 8; ++l) lane[l] += a[p + l] * b[p + l];
  }
  T acc = 0;
  for (; p < n; ++p) acc += a[p] * b[p];
  for (T v : lane) acc += v;
  return acc;
}

// y += corr(x, w)
template <typename T>
void corr_forward(const ConvGeom& g, const T* x, const T* w, T* y) {
  ColumnBuffer<T> buf(g);
  for (std::size_t n = 0; n < g.n; ++n) {
    im2col(g, buf.lo, buf.hi, x + n * g.ci * g.h * g.w, buf.col.data());
    for (std::size_t co = 0; co < g.co; ++co) {
      T* yr = y + (n * g.co + co) * buf.plane;
      const T* wr = w + co * buf.taps;
      for (std::size_t k = 0; k < buf.taps; ++k) {
        const T wv = wr[k];
        const T* c = buf.col.data() + k * buf.plane;
        for (std::size_t p = 0; p < buf.plane; ++p) yr[p] += wv * c[p];
      }
    }
  }
}

// gx += corr^T(gy, w)
template <typename T>
void corr_backward_data(const ConvGeom& g, const T* gy, const T* w, T* gx) {
  ColumnBuffer<T> buf(g);
  for (std::size_t n = 0; n < g.n; ++n) {
    std::fill(buf.col.begin(), buf.col.end(), T(0));
    for (std::size_t k = 0; k < buf.taps; ++k) {
      T* c = buf.col.data() + k * buf.plane;
      for (std::size_t co = 0; co < g.co; ++co) {
        const T wv = w[co * buf.taps + k];
        const T* yr = gy + (n * g.co + co) * buf.plane;
        for (std::size_t p = 0; p < buf.plane; ++p) c[p] += wv * yr[p];
      }
    }
    col2im(g, buf.lo, buf.hi, buf.col.data(), gx + n * g.ci * g.h * g.w);
  }
}

// gw += sum over batch and positions of x * gy
template <typename T>
void corr_backward_weight(const ConvGeom& g, const T* x, const T* gy, T* gw) {
  ColumnBuffer<T> buf(g);
  for (std::size_t n = 0; n < g.n; ++n) {
    im2col(g, buf.lo, buf.hi, x + n * g.ci * g.h * g.w, buf.col.data());
    for (std::size_t co = 0; co < g.co; ++co) {
      const T* yr = gy + (n * g.co + co) * buf.plane;
      for (std::size_t k = 0; k < buf.taps; ++k) {
        const T* c = buf.col.data() + k * buf.plane;
        gw[co * buf.taps + k] += dot(c, yr, buf.plane);
      }
    }
  }
}

std::size_t conv_out(std::size_t n, std::size_t k, std::size_t s, std::size_t p,
                     std::size_t axis) {
  if (n + 2 * p < k) {
    throw ShapeError("convolution produces zero-extent output on " + axis_name(axis) +
                     " axis (extent " + std::to_string(n) + ", kernel " + std::to_string(k) +
                     ", padding " + std::to_string(p) + ")");
  }
  return (n + 2 * p - k) / s + 1;
}

std::size_t transposed_out(std::size_t n, std::size_t k, std::size_t s, std::size_t p,
                           std::optional<std::size_t> want, std::size_t axis) {
  const long base = static_cast<long>((n - 1) * s + k) - 2 * static_cast<long>(p);
  if (base <= 0 && !want) {
    throw ShapeError("transposed convolution produces zero-extent output on " + axis_name(axis) +
                     " axis");
  }
  if (!want) return static_cast<std::size_t>(base);
  const long w = static_cast<long>(*want);
  if (w < base || w - base >= static_cast<long>(s) || w <= 0) {
    throw ShapeError("requested transposed output extent " + std::to_string(*want) + " on " +
                     axis_name(axis) + " axis is not reachable from input extent " +
                     std::to_string(n));
  }
  return *want;
}

// Index bookkeeping for reductions over an axis subset.
struct Grouping {
  std::vector<std::size_t> group_of;
  std::size_t groups = 1;
  std::size_t group_size = 1;
  Shape kept;
};

Grouping make_grouping(const Shape& shape, const std::vector<std::size_t>& axes) {
  if (axes.empty()) throw std::invalid_argument("reduction needs at least one axis");
  std::vector<char> reduced(shape.size(), 0);
  for (std::size_t a : axes) {
    if (a >= shape.size()) {
      throw std::invalid_argument("axis " + std::to_string(a) + " out of range for shape " +
                                  to_string(shape));
    }
    if (reduced[a]) throw std::invalid_argument("duplicate reduction axis");
    reduced[a] = 1;
  }
  Grouping g;
  for (std::size_t a = 0; a < shape.size(); ++a) {
    if (reduced[a]) {
      g.group_size *= shape[a];
    } else {
      g.kept.push_back(shape[a]);
      g.groups *= shape[a];
    }
  }
  const std::size_t total = numel(shape);
  g.group_of.resize(total);
  std::vector<std::size_t> idx(shape.size(), 0);
  for (std::size_t flat = 0; flat < total; ++flat) {
    std::size_t gi = 0;
    for (std::size_t a = 0; a < shape.size(); ++a) {
      if (!reduced[a]) gi = gi * shape[a] + idx[a];
    }
    g.group_of[flat] = gi;
    for (std::size_t a = shape.size(); a-- > 0;) {
      if (++idx[a] < shape[a]) break;
      idx[a] = 0;
    }
  }
  return g;
}

void require_same_shape(const Shape& a, const Shape& b, const char* op) {
  if (a != b) {
    throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a) + " vs " + to_string(b));
  }
}

}  // namespace

template <typename T>
Var<T> conv_layer(const Var<T>& input, const Var<T>& kernel, const std::optional<Var<T>>& bias,
                  ConvMode mode, Extent2 stride, Extent2 padding,
                  std::optional<Extent2> output_extent) {
  const Shape& xs = input.shape();
  const Shape& ks = kernel.shape();
  if (xs.size() != 3 && xs.size() != 4) {
    throw ShapeError("conv_layer input must be C x T x F or N x C x T x F, got " + to_string(xs));
  }
  if (ks.size() != 4) throw ShapeError("conv_layer kernel must be rank 4, got " + to_string(ks));
  if (stride.t == 0 || stride.f == 0) throw std::invalid_argument("conv_layer stride must be >= 1");
  const bool batched = xs.size() == 4;
  const std::size_t n = batched ? xs[0] : 1;
  const std::size_t c_in = xs[batched ? 1 : 0];
  const std::size_t h = xs[batched ? 2 : 1];
  const std::size_t w = xs[batched ? 3 : 2];
  if (ks[1 - (mode == ConvMode::transposed ? 1 : 0)] != c_in) {
    throw ShapeError("conv_layer channel axis mismatch: input has " + std::to_string(c_in) +
                     " channels, kernel " + to_string(ks));
  }
  const std::size_t c_out = mode == ConvMode::forward ? ks[0] : ks[1];
  if (bias && (bias->shape().size() != 1 || bias->shape()[0] != c_out)) {
    throw ShapeError("conv_layer bias must have " + std::to_string(c_out) + " entries");
  }

  ConvGeom g{};
  std::size_t ho, wo;
  if (mode == ConvMode::forward) {
    ho = conv_out(h, ks[2], stride.t, padding.t, 1);
    wo = conv_out(w, ks[3], stride.f, padding.f, 2);
    g = ConvGeom{n, c_in, h, w, c_out, ks[2], ks[3], ho, wo, stride, padding};
  } else {
    ho = transposed_out(h, ks[2], stride.t, padding.t,
                        output_extent ? std::optional<std::size_t>(output_extent->t) : std::nullopt,
                        1);
    wo = transposed_out(w, ks[3], stride.f, padding.f,
                        output_extent ? std::optional<std::size_t>(output_extent->f) : std::nullopt,
                        2);
    // Adjoint geometry: the "input" of the underlying correlation is our output.
    g = ConvGeom{n, c_out, ho, wo, c_in, ks[2], ks[3], h, w, stride, padding};
  }

  Shape out_shape = batched ? Shape{n, c_out, ho, wo} : Shape{c_out, ho, wo};
  Tensor<T> out(out_shape);
  if (mode == ConvMode::forward) {
    corr_forward(g, input.value().data(), kernel.value().data(), out.data());
  } else {
    corr_backward_data(g, input.value().data(), kernel.value().data(), out.data());
  }
  if (bias) {
    const T* b = bias->value().data();
    const std::size_t plane = ho * wo;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < c_out; ++c) {
        T* p = out.data() + (i * c_out + c) * plane;
        for (std::size_t k = 0; k < plane; ++k) p[k] += b[c];
      }
    }
  }

  std::vector<Var<T>> inputs{input, kernel};
  if (bias) inputs.push_back(*bias);
  const bool has_bias = bias.has_value();
  return input.tape().record(
      std::move(out), std::move(inputs),
      [g, mode, has_bias, n, c_out, ho, wo](GradSink<T>& s) {
        const T* gout = s.output_grad().data();
        const T* x = s.input(0).data();
        const T* k = s.input(1).data();
        if (mode == ConvMode::forward) {
          if (s.wants(0)) corr_backward_data(g, gout, k, s.grad(0).data());
          if (s.wants(1)) corr_backward_weight(g, x, gout, s.grad(1).data());
        } else {
          if (s.wants(0)) corr_forward(g, gout, k, s.grad(0).data());
          if (s.wants(1)) corr_backward_weight(g, gout, x, s.grad(1).data());
        }
        if (has_bias && s.wants(2)) {
          auto gb = s.grad(2);
          const std::size_t plane = ho * wo;
          for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t c = 0; c < c_out; ++c) {
              const T* p = gout + (i * c_out + c) * plane;
              T acc = 0;
              for (std::size_t q = 0; q < plane; ++q) acc += p[q];
              gb[c] += acc;
            }
          }
        }
      });
}

template <typename T>
Var<T> normalize_2d(const Var<T>& input, NormMode mode, const Var<T>& scale, const Var<T>& shift,
                    StatsMode stats, T epsilon, RunningStats<T>* running) {
  if (!(epsilon > T(0))) throw std::invalid_argument("normalize_2d epsilon must be > 0");
  const Shape& xs = input.shape();
  if (xs.size() != 3 && xs.size() != 4) {
    throw ShapeError("normalize_2d input must be C x T x F or N x C x T x F, got " + to_string(xs));
  }
  const bool batched = xs.size() == 4;
  const std::size_t n = batched ? xs[0] : 1;
  const std::size_t c = xs[batched ? 1 : 0];
  const std::size_t plane = xs[batched ? 2 : 1] * xs[batched ? 3 : 2];
  if (scale.shape() != Shape{c} || shift.shape() != Shape{c}) {
    throw ShapeError("normalize_2d scale/shift must have " + std::to_string(c) + " entries");
  }
  const bool use_running = mode == NormMode::batch && stats == StatsMode::eval;
  if (use_running && (running == nullptr || running->mean == nullptr || running->var == nullptr ||
                      running->mean->empty() || running->var->empty())) {
    throw std::logic_error("normalize_2d: batch mode in eval needs running statistics");
  }

  // Statistics groups: one per channel (batch) or per (sample, channel) (instance).
  const std::size_t groups = mode == NormMode::batch ? c : n * c;
  auto group_of = [&](std::size_t i, std::size_t ch) {
    return mode == NormMode::batch ? ch : i * c + ch;
  };
  const std::size_t m = mode == NormMode::batch ? n * plane : plane;

  auto inv_std = std::make_shared<std::vector<T>>(groups);
  std::vector<T> mean(groups, T(0));
  const T* x = input.value().data();
  if (use_running) {
    for (std::size_t gidx = 0; gidx < groups; ++gidx) {
      mean[gidx] = (*running->mean)[gidx];
      (*inv_std)[gidx] = T(1) / std::sqrt((*running->var)[gidx] + epsilon);
    }
  } else {
    std::vector<T> var(groups, T(0));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        const T* p = x + (i * c + ch) * plane;
        T acc = 0;
        for (std::size_t q = 0; q < plane; ++q) acc += p[q];
        mean[group_of(i, ch)] += acc;
      }
    }
    for (auto& v : mean) v /= static_cast<T>(m);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        const T* p = x + (i * c + ch) * plane;
        const T mu = mean[group_of(i, ch)];
        T acc = 0;
        for (std::size_t q = 0; q < plane; ++q) acc += (p[q] - mu) * (p[q] - mu);
        var[group_of(i, ch)] += acc;
      }
    }
    for (auto& v : var) v /= static_cast<T>(m);
    for (std::size_t gidx = 0; gidx < groups; ++gidx) {
      (*inv_std)[gidx] = T(1) / std::sqrt(var[gidx] + epsilon);
    }
    if (mode == NormMode::batch && stats == StatsMode::train && running != nullptr &&
        running->mean != nullptr && running->var != nullptr) {
      if (running->mean->empty()) *running->mean = Tensor<T>(Shape{c}, T(0));
      if (running->var->empty()) *running->var = Tensor<T>(Shape{c}, T(1));
      const T mom = running->momentum;
      const T unbias = m > 1 ? static_cast<T>(m) / static_cast<T>(m - 1) : T(1);
      for (std::size_t ch = 0; ch < c; ++ch) {
        (*running->mean)[ch] = (T(1) - mom) * (*running->mean)[ch] + mom * mean[ch];
        (*running->var)[ch] = (T(1) - mom) * (*running->var)[ch] + mom * var[ch] * unbias;
      }
    }
  }

  auto xhat = std::make_shared<std::vector<T>>(input.value().size());
  Tensor<T> out(xs);
  const T* gamma = scale.value().data();
  const T* beta = shift.value().data();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t gidx = group_of(i, ch);
      const std::size_t off = (i * c + ch) * plane;
      for (std::size_t q = 0; q < plane; ++q) {
        const T h = (x[off + q] - mean[gidx]) * (*inv_std)[gidx];
        (*xhat)[off + q] = h;
        out[off + q] = gamma[ch] * h + beta[ch];
      }
    }
  }

  return input.tape().record(
      std::move(out), {input, scale, shift},
      [xhat, inv_std, n, c, plane, m, mode, use_running](GradSink<T>& s) {
        const T* gy = s.output_grad().data();
        const T* gamma = s.input(1).data();
        auto gidx_of = [&](std::size_t i, std::size_t ch) {
          return mode == NormMode::batch ? ch : i * c + ch;
        };
        if (s.wants(1) || s.wants(2)) {
          std::vector<T> gg(c, T(0)), gb(c, T(0));
          for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t ch = 0; ch < c; ++ch) {
              const std::size_t off = (i * c + ch) * plane;
              for (std::size_t q = 0; q < plane; ++q) {
                gg[ch] += gy[off + q] * (*xhat)[off + q];
                gb[ch] += gy[off + q];
              }
            }
          }
          if (s.wants(1)) {
            auto g = s.grad(1);
            for (std::size_t ch = 0; ch < c; ++ch) g[ch] += gg[ch];
          }
          if (s.wants(2)) {
            auto g = s.grad(2);
            for (std::size_t ch = 0; ch < c; ++ch) g[ch] += gb[ch];
          }
        }
        if (!s.wants(0)) return;
        auto gx = s.grad(0);
        if (use_running) {
          for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t ch = 0; ch < c; ++ch) {
              const std::size_t off = (i * c + ch) * plane;
              const T k = gamma[ch] * (*inv_std)[ch];
              for (std::size_t q = 0; q < plane; ++q) gx[off + q] += gy[off + q] * k;
            }
          }
          return;
        }
        const std::size_t groups = mode == NormMode::batch ? c : n * c;
        std::vector<T> sum_g(groups, T(0)), sum_gh(groups, T(0));
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t ch = 0; ch < c; ++ch) {
            const std::size_t off = (i * c + ch) * plane;
            const std::size_t gidx = gidx_of(i, ch);
            for (std::size_t q = 0; q < plane; ++q) {
              const T gh = gy[off + q] * gamma[ch];
              sum_g[gidx] += gh;
              sum_gh[gidx] += gh * (*xhat)[off + q];
            }
          }
        }
        const T mm = static_cast<T>(m);
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t ch = 0; ch < c; ++ch) {
            const std::size_t off = (i * c + ch) * plane;
            const std::size_t gidx = gidx_of(i, ch);
            const T k = (*inv_std)[gidx] / mm;
            for (std::size_t q = 0; q < plane; ++q) {
              const T gh = gy[off + q] * gamma[ch];
              gx[off + q] += k * (mm * gh - sum_g[gidx] - (*xhat)[off + q] * sum_gh[gidx]);
            }
          }
        }
      });
}

template <typename T>
Var<T> pointwise(const Var<T>& input, Pointwise kind) {
  const Tensor<T>& x = input.value();
  Tensor<T> out(x.shape());
  if (kind == Pointwise::relu) {
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > T(0) ? x[i] : T(0);
    return input.tape().record(std::move(out), {input}, [](GradSink<T>& s) {
      if (!s.wants(0)) return;
      const auto& xv = s.input(0);
      const auto& gy = s.output_grad();
      auto gx = s.grad(0);
      for (std::size_t i = 0; i < gx.size(); ++i) {
        if (xv[i] > T(0)) gx[i] += gy[i];
      }
    });
  }
  // Saturated outputs are clamped to the open interval (0, 1).
  const T lo = std::numeric_limits<T>::min();
  const T hi = std::nextafter(T(1), T(0));
  for (std::size_t i = 0; i < x.size(); ++i) {
    T v;
    if (x[i] >= T(0)) {
      v = T(1) / (T(1) + std::exp(-x[i]));
    } else {
      const T e = std::exp(x[i]);
      v = e / (T(1) + e);
    }
    out[i] = std::clamp(v, lo, hi);
  }
  return input.tape().record(std::move(out), {input}, [](GradSink<T>& s) {
    if (!s.wants(0)) return;
    const auto& y = s.output();
    const auto& gy = s.output_grad();
    auto gx = s.grad(0);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i] * y[i] * (T(1) - y[i]);
  });
}

template <typename T>
Var<T> softmax_over(const Var<T>& input, const std::vector<std::size_t>& axes) {
  auto grouping = std::make_shared<Grouping>(make_grouping(input.shape(), axes));
  const Tensor<T>& x = input.value();
  std::vector<T> mx(grouping->groups, -std::numeric_limits<T>::infinity());
  for (std::size_t i = 0; i < x.size(); ++i) {
    auto& m = mx[grouping->group_of[i]];
    m = std::max(m, x[i]);
  }
  Tensor<T> out(x.shape());
  std::vector<T> denom(grouping->groups, T(0));
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = std::exp(x[i] - mx[grouping->group_of[i]]);
    denom[grouping->group_of[i]] += out[i];
  }
  for (std::size_t i = 0; i < x.size(); ++i) out[i] /= denom[grouping->group_of[i]];
  return input.tape().record(std::move(out), {input}, [grouping](GradSink<T>& s) {
    if (!s.wants(0)) return;
    const auto& y = s.output();
    const auto& gy = s.output_grad();
    std::vector<T> dot(grouping->groups, T(0));
    for (std::size_t i = 0; i < y.size(); ++i) dot[grouping->group_of[i]] += gy[i] * y[i];
    auto gx = s.grad(0);
    for (std::size_t i = 0; i < y.size(); ++i) {
      gx[i] += y[i] * (gy[i] - dot[grouping->group_of[i]]);
    }
  });
}

template <typename T>
Var<T> reduce(const Var<T>& input, ReduceKind kind, const std::vector<std::size_t>& axes) {
  auto grouping = std::make_shared<Grouping>(make_grouping(input.shape(), axes));
  const Tensor<T>& x = input.value();
  const std::size_t groups = grouping->groups;
  const std::size_t gsize = grouping->group_size;
  Shape kept = grouping->kept;

  std::vector<T> sums(groups, T(0));
  for (std::size_t i = 0; i < x.size(); ++i) sums[grouping->group_of[i]] += x[i];

  if (kind == ReduceKind::sum || kind == ReduceKind::mean) {
    const T k = kind == ReduceKind::mean ? T(1) / static_cast<T>(gsize) : T(1);
    Tensor<T> out(kept.empty() ? Shape{1} : kept);
    for (std::size_t gi = 0; gi < groups; ++gi) out[gi] = sums[gi] * k;
    return input.tape().record(std::move(out), {input}, [grouping, k](GradSink<T>& s) {
      if (!s.wants(0)) return;
      const auto& gy = s.output_grad();
      auto gx = s.grad(0);
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[grouping->group_of[i]] * k;
    });
  }

  if (gsize < 2) {
    throw std::invalid_argument("mean_and_std needs a reduced extent of at least 2, got " +
                                std::to_string(gsize));
  }
  auto mean = std::make_shared<std::vector<T>>(groups);
  auto stdv = std::make_shared<std::vector<T>>(groups, T(0));
  for (std::size_t gi = 0; gi < groups; ++gi) (*mean)[gi] = sums[gi] / static_cast<T>(gsize);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const T d = x[i] - (*mean)[grouping->group_of[i]];
    (*stdv)[grouping->group_of[i]] += d * d;
  }
  for (auto& v : *stdv) v = std::sqrt(v / static_cast<T>(gsize - 1));

  const std::size_t last = kept.empty() ? 1 : kept.back();
  Shape out_shape = kept.empty() ? Shape{2} : kept;
  if (!kept.empty()) out_shape.back() *= 2;
  Tensor<T> out(out_shape);
  auto mean_slot = [last](std::size_t gi) { return (gi / last) * 2 * last + gi % last; };
  for (std::size_t gi = 0; gi < groups; ++gi) {
    out[mean_slot(gi)] = (*mean)[gi];
    out[mean_slot(gi) + last] = (*stdv)[gi];
  }
  return input.tape().record(
      std::move(out), {input}, [grouping, mean, stdv, last, gsize, mean_slot](GradSink<T>& s) {
        if (!s.wants(0)) return;
        const auto& x = s.input(0);
        const auto& gy = s.output_grad();
        auto gx = s.grad(0);
        const T inv_n = T(1) / static_cast<T>(gsize);
        const T inv_n1 = T(1) / static_cast<T>(gsize - 1);
        for (std::size_t i = 0; i < gx.size(); ++i) {
          const std::size_t gi = grouping->group_of[i];
          const std::size_t slot = mean_slot(gi);
          T g = gy[slot] * inv_n;
          const T sd = (*stdv)[gi];
          if (sd > T(0)) g += gy[slot + last] * (x[i] - (*mean)[gi]) * inv_n1 / sd;
          gx[i] += g;
        }
      });
}

template <typename T>
Var<T> affine(const Var<T>& input, const Var<T>& weight, const Var<T>& bias) {
  const Shape& xs = input.shape();
  const Shape& ws = weight.shape();
  if (ws.size() != 2) throw ShapeError("affine weight must be m x n, got " + to_string(ws));
  const std::size_t m = ws[0], k = ws[1];
  if (bias.shape() != Shape{m}) {
    throw ShapeError("affine bias must have " + std::to_string(m) + " entries, got " +
                     to_string(bias.shape()));
  }
  std::size_t batch;
  Shape out_shape;
  if (xs.size() == 1 && xs[0] == k) {
    batch = 1;
    out_shape = {m};
  } else if (xs.size() == 2 && xs[1] == k) {
    batch = xs[0];
    out_shape = {batch, m};
  } else {
    throw ShapeError("affine dimension mismatch: input " + to_string(xs) + ", weight " +
                     to_string(ws));
  }
  const T* x = input.value().data();
  const T* w = weight.value().data();
  const T* b = bias.value().data();
  Tensor<T> out(out_shape);
  for (std::size_t i = 0; i < batch; ++i) {
    for (std::size_t r = 0; r < m; ++r) {
      T acc = b[r];
      for (std::size_t q = 0; q < k; ++q) acc += w[r * k + q] * x[i * k + q];
      out[i * m + r] = acc;
    }
  }
  return input.tape().record(
      std::move(out), {input, weight, bias}, [batch, m, k](GradSink<T>& s) {
        const T* gy = s.output_grad().data();
        if (s.wants(0)) {
          auto gx = s.grad(0);
          const T* w = s.input(1).data();
          for (std::size_t i = 0; i < batch; ++i) {
            for (std::size_t r = 0; r < m; ++r) {
              const T g = gy[i * m + r];
              for (std::size_t q = 0; q < k; ++q) gx[i * k + q] += g * w[r * k + q];
            }
          }
        }
        if (s.wants(1)) {
          auto gw = s.grad(1);
          const T* x = s.input(0).data();
          for (std::size_t i = 0; i < batch; ++i) {
            for (std::size_t r = 0; r < m; ++r) {
              const T g = gy[i * m + r];
              for (std::size_t q = 0; q < k; ++q) gw[r * k + q] += g * x[i * k + q];
            }
          }
        }
        if (s.wants(2)) {
          auto gb = s.grad(2);
          for (std::size_t i = 0; i < batch; ++i) {
            for (std::size_t r = 0; r < m; ++r) gb[r] += gy[i * m + r];
          }
        }
      });
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a.shape(), b.shape(), "add");
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] + b.value()[i];
  return a.tape().record(std::move(out), {a, b}, [](GradSink<T>& s) {
    const auto& gy = s.output_grad();
    for (std::size_t k = 0; k < 2; ++k) {
      if (!s.wants(k)) continue;
      auto g = s.grad(k);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += gy[i];
    }
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a.shape(), b.shape(), "sub");
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] - b.value()[i];
  return a.tape().record(std::move(out), {a, b}, [](GradSink<T>& s) {
    const auto& gy = s.output_grad();
    if (s.wants(0)) {
      auto g = s.grad(0);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += gy[i];
    }
    if (s.wants(1)) {
      auto g = s.grad(1);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= gy[i];
    }
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a.shape(), b.shape(), "mul");
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * b.value()[i];
  return a.tape().record(std::move(out), {a, b}, [](GradSink<T>& s) {
    const auto& gy = s.output_grad();
    if (s.wants(0)) {
      const auto& bv = s.input(1);
      auto g = s.grad(0);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += gy[i] * bv[i];
    }
    if (s.wants(1)) {
      const auto& av = s.input(0);
      auto g = s.grad(1);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += gy[i] * av[i];
    }
  });
}

template <typename T>
Var<T> abs(const Var<T>& a) {
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::abs(a.value()[i]);
  return a.tape().record(std::move(out), {a}, [](GradSink<T>& s) {
    if (!s.wants(0)) return;
    const auto& x = s.input(0);
    const auto& gy = s.output_grad();
    auto g = s.grad(0);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (x[i] > T(0)) {
        g[i] += gy[i];
      } else if (x[i] < T(0)) {
        g[i] -= gy[i];
      }
    }
  });
}

template <typename T>
Var<T> scale(const Var<T>& a, T factor) {
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * factor;
  return a.tape().record(std::move(out), {a}, [factor](GradSink<T>& s) {
    if (!s.wants(0)) return;
    const auto& gy = s.output_grad();
    auto g = s.grad(0);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += gy[i] * factor;
  });
}

template <typename T>
Var<T> reshape(const Var<T>& a, Shape shape) {
  Tensor<T> out = a.value().reshaped(std::move(shape));
  return a.tape().record(std::move(out), {a}, [](GradSink<T>& s) {
    if (!s.wants(0)) return;
    const auto& gy = s.output_grad();
    auto g = s.grad(0);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += gy[i];
  });
}

template <typename T>
Var<T> concat(const std::vector<Var<T>>& parts, std::size_t axis) {
  if (parts.empty()) throw std::invalid_argument("concat of zero tensors");
  Shape shape = parts[0].shape();
  if (axis >= shape.size()) throw std::invalid_argument("concat axis out of range");
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    const Shape& ps = p.shape();
    if (ps.size() != shape.size()) throw ShapeError("concat rank mismatch");
    for (std::size_t a = 0; a < ps.size(); ++a) {
      if (a != axis && ps[a] != shape[a]) {
        throw ShapeError("concat mismatch on " + axis_name(a) + ": " + to_string(ps) + " vs " +
                         to_string(shape));
      }
    }
    widths.push_back(ps[axis]);
    total += ps[axis];
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t a = 0; a < axis; ++a) outer *= shape[a];
  for (std::size_t a = axis + 1; a < shape.size(); ++a) inner *= shape[a];
  shape[axis] = total;
  Tensor<T> out(shape);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const T* src = parts[k].value().data();
    const std::size_t block = widths[k] * inner;
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy(src + o * block, src + (o + 1) * block, out.data() + o * total * inner + offset);
    }
    offset += block;
  }
  return parts[0].tape().record(
      std::move(out), parts, [widths, outer, inner, total](GradSink<T>& s) {
        const T* gy = s.output_grad().data();
        std::size_t offset = 0;
        for (std::size_t k = 0; k < widths.size(); ++k) {
          const std::size_t block = widths[k] * inner;
          if (s.wants(k)) {
            auto g = s.grad(k);
            for (std::size_t o = 0; o < outer; ++o) {
              const T* src = gy + o * total * inner + offset;
              for (std::size_t q = 0; q < block; ++q) g[o * block + q] += src[q];
            }
          }
          offset += block;
        }
      });
}

template <typename T>
Var<T> sum_all(const Var<T>& a) {
  T acc = 0;
  for (T v : a.value().values()) acc += v;
  return a.tape().record(Tensor<T>::scalar(acc), {a}, [](GradSink<T>& s) {
    if (!s.wants(0)) return;
    const T gy = s.output_grad()[0];
    auto g = s.grad(0);
    for (auto& v : g) v += gy;
  });
}

template <typename T>
Var<T> pick(const Var<T>& logits, std::span<const std::size_t> index) {
  const Shape& ls = logits.shape();
  if (ls.size() != 2 || ls[0] != index.size()) {
    throw ShapeError("pick needs N x K logits with N indices, got " + to_string(ls));
  }
  const std::size_t k = ls[1];
  std::vector<std::size_t> idx(index.begin(), index.end());
  Tensor<T> out(Shape{idx.size()});
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= k) throw std::out_of_range("pick index " + std::to_string(idx[i]) + " >= " + std::to_string(k));
    out[i] = logits.value()[i * k + idx[i]];
  }
  return logits.tape().record(std::move(out), {logits}, [idx, k](GradSink<T>& s) {
    if (!s.wants(0)) return;
    const auto& gy = s.output_grad();
    auto g = s.grad(0);
    for (std::size_t i = 0; i < idx.size(); ++i) g[i * k + idx[i]] += gy[i];
  });
}

template <typename T>
Var<T> cross_entropy(const Var<T>& logits, std::span<const std::size_t> labels) {
  const Shape& ls = logits.shape();
  if (ls.size() != 2 || ls[0] != labels.size()) {
    throw ShapeError("cross_entropy needs N x K logits with N labels, got " + to_string(ls));
  }
  const std::size_t n = ls[0], k = ls[1];
  auto probs = std::make_shared<std::vector<T>>(n * k);
  std::vector<std::size_t> lab(labels.begin(), labels.end());
  const T* z = logits.value().data();
  T loss = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (lab[i] >= k) throw std::out_of_range("label out of range");
    T mx = z[i * k];
    for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, z[i * k + j]);
    T denom = 0;
    for (std::size_t j = 0; j < k; ++j) {
      (*probs)[i * k + j] = std::exp(z[i * k + j] - mx);
      denom += (*probs)[i * k + j];
    }
    for (std::size_t j = 0; j < k; ++j) (*probs)[i * k + j] /= denom;
    loss += std::log(denom) + mx - z[i * k + lab[i]];
  }
  loss /= static_cast<T>(n);
  return logits.tape().record(Tensor<T>::scalar(loss), {logits}, [probs, lab, n, k](GradSink<T>& s) {
    if (!s.wants(0)) return;
    const T gy = s.output_grad()[0] / static_cast<T>(n);
    auto g = s.grad(0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < k; ++j) {
        const T target = j == lab[i] ? T(1) : T(0);
        g[i * k + j] += gy * ((*probs)[i * k + j] - target);
      }
    }
  });
}

template <typename T>
Var<T> detach(const Var<T>& t) {
  return t.tape().constant(t.value());
}

#define GRADW_INSTANTIATE_OPS(T)                                                                  \
  template Var<T> conv_layer(const Var<T>&, const Var<T>&, const std::optional<Var<T>>&,          \
                             ConvMode, Extent2, Extent2, std::optional<Extent2>);                 \
  template Var<T> normalize_2d(const Var<T>&, NormMode, const Var<T>&, const Var<T>&, StatsMode,  \
                               T, RunningStats<T>*);                                              \
  template Var<T> pointwise(const Var<T>&, Pointwise);                                            \
  template Var<T> softmax_over(const Var<T>&, const std::vector<std::size_t>&);                   \
  template Var<T> reduce(const Var<T>&, ReduceKind, const std::vector<std::size_t>&);             \
  template Var<T> affine(const Var<T>&, const Var<T>&, const Var<T>&);                            \
  template Var<T> add(const Var<T>&, const Var<T>&);                                              \
  template Var<T> sub(const Var<T>&, const Var<T>&);                                              \
  template Var<T> mul(const Var<T>&, const Var<T>&);                                              \
  template Var<T> abs(const Var<T>&);                                                             \
  template Var<T> scale(const Var<T>&, T);                                                        \
  template Var<T> reshape(const Var<T>&, Shape);                                                  \
  template Var<T> concat(const std::vector<Var<T>>&, std::size_t);                                \
  template Var<T> sum_all(const Var<T>&);                                                         \
  template Var<T> pick(const Var<T>&, std::span<const std::size_t>);                              \
  template Var<T> cross_entropy(const Var<T>&, std::span<const std::size_t>);                     \
  template Var<T> detach(const Var<T>&);

GRADW_INSTANTIATE_OPS(float)
GRADW_INSTANTIATE_OPS(double)

#undef GRADW_INSTANTIATE_OPS

}  // namespace gradw
