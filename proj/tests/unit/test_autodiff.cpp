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

#include <cmath>
#include <limits>

#include "doctest.h"
#include "gradcheck.hpp"
#include "primitive_cases.hpp"
#include "gradw/autodiff/ops.hpp"

using namespace gradw;
using gradw::testing::check_gradients;
using gradw::testing::random_away_from_zero;
using gradw::testing::random_tensor;

namespace {

Tensor<double> tensor(Shape s, std::vector<double> v) { return Tensor<double>(std::move(s), std::move(v)); }

void check_close(const Tensor<double>& t, const std::vector<double>& want, double tol = 1e-12) {
  REQUIRE(t.size() == want.size());
  for (std::size_t i = 0; i < want.size(); ++i) CHECK(t[i] == doctest::Approx(want[i]).epsilon(tol));
}

const std::optional<Var<double>> kNoBias;
const std::optional<Var<float>> kNoBiasF;

constexpr int kInstances = 20;
constexpr double kTol = 1e-6;

}  // namespace

TEST_CASE("tensor shape invariants") {
  CHECK_THROWS_AS(Tensor<float>(Shape{2, 0}), ShapeError);
  CHECK_THROWS_AS(Tensor<float>(Shape{2, 2}, std::vector<float>{1, 2, 3}), ShapeError);
  Tensor<float> t(Shape{2, 3}, 1.5f);
  CHECK(t.size() == 6);
  CHECK(t.reshaped({3, 2}).extent(0) == 3);
  CHECK_THROWS_AS(t.reshaped({4, 2}), ShapeError);
  CHECK(t.cast<double>()[5] == 1.5);
}

TEST_CASE("conv_layer examples") {
  Tape<double> tape;
  SUBCASE("1x1 kernel scales") {
    auto y = conv_layer(tape.constant(tensor({1, 2, 2}, {1, 2, 3, 4})),
                        tape.constant(tensor({1, 1, 1, 1}, {2})), kNoBias, ConvMode::forward,
                        {1, 1}, {0, 0});
    CHECK(y.shape() == Shape{1, 2, 2});
    check_close(y.value(), {2, 4, 6, 8});
  }
  SUBCASE("transposed spreads a single element") {
    auto y = conv_layer(tape.constant(tensor({1, 1, 1}, {3})),
                        tape.constant(Tensor<double>({1, 1, 2, 2}, 1.0)), kNoBias,
                        ConvMode::transposed, {1, 1}, {0, 0});
    CHECK(y.shape() == Shape{1, 2, 2});
    check_close(y.value(), {3, 3, 3, 3});
  }
  SUBCASE("stride 2 pad 1 shape rule") {
    Rng rng(1);
    auto y = conv_layer(tape.constant(random_tensor({1, 8, 8}, rng)),
                        tape.constant(random_tensor({1, 1, 3, 3}, rng)), kNoBias,
                        ConvMode::forward, {2, 2}, {1, 1});
    CHECK(y.shape() == Shape{1, 4, 4});
  }
  SUBCASE("transposed output extent restores odd sizes") {
    for (std::size_t n : {7u, 8u, 9u, 13u}) {
      Rng rng(n);
      auto x = tape.constant(random_tensor({2, n, n + 1}, rng));
      auto k = tape.constant(random_tensor({3, 2, 3, 3}, rng));
      auto down = conv_layer(x, k, kNoBias, ConvMode::forward, {2, 2}, {1, 1});
      auto up = conv_layer(down, k, kNoBias, ConvMode::transposed, {2, 2}, {1, 1},
                           Extent2{n, n + 1});
      CHECK(up.shape() == Shape{2, n, n + 1});
    }
  }
  SUBCASE("errors name the axis") {
    auto x = tape.constant(Tensor<double>({2, 4, 4}));
    try {
      conv_layer(x, tape.constant(Tensor<double>({1, 3, 3, 3})), kNoBias, ConvMode::forward,
                 {1, 1}, {0, 0});
      FAIL("expected a channel mismatch");
    } catch (const ShapeError& e) {
      CHECK(std::string(e.what()).find("channel") != std::string::npos);
    }
    try {
      conv_layer(x, tape.constant(Tensor<double>({1, 2, 5, 3})), kNoBias, ConvMode::forward,
                 {1, 1}, {0, 0});
      FAIL("expected a zero-extent error");
    } catch (const ShapeError& e) {
      CHECK(std::string(e.what()).find("time") != std::string::npos);
    }
  }
}

TEST_CASE("transposed conv is the adjoint of forward conv") {
  // <conv(x), y> == <x, conv^T(y)> for the same kernel tensor.
  Rng rng(3);
  for (int rep = 0; rep < 5; ++rep) {
    Tape<double> tape;
    auto x = random_tensor({2, 3, 9, 7}, rng);
    auto k = random_tensor({4, 3, 3, 3}, rng);
    auto cx = conv_layer(tape.constant(x), tape.constant(k), kNoBias, ConvMode::forward,
                         {2, 2}, {1, 1});
    auto y = random_tensor(cx.shape(), rng);
    auto cty = conv_layer(tape.constant(y), tape.constant(k), kNoBias, ConvMode::transposed,
                          {2, 2}, {1, 1}, Extent2{9, 7});
    double lhs = 0, rhs = 0;
    for (std::size_t i = 0; i < y.size(); ++i) lhs += cx.value()[i] * y[i];
    for (std::size_t i = 0; i < x.size(); ++i) rhs += x[i] * cty.value()[i];
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
  }
}

TEST_CASE("normalize_2d examples") {
  Tape<double> tape;
  auto one = tape.constant(Tensor<double>({1}, 1.0));
  auto zero = tape.constant(Tensor<double>({1}, 0.0));
  SUBCASE("constant input, instance mode") {
    auto y = normalize_2d(tape.constant(Tensor<double>({1, 1, 2, 3}, 4.0)), NormMode::instance,
                          one, zero, StatsMode::train, 1e-5);
    check_close(y.value(), {0, 0, 0, 0, 0, 0});
  }
  SUBCASE("[1,3] instance mode") {
    auto y = normalize_2d(tape.constant(tensor({1, 1, 1, 2}, {1, 3})), NormMode::instance, one,
                          zero, StatsMode::train, 1e-12);
    check_close(y.value(), {-1, 1}, 1e-9);
  }
  SUBCASE("batch eval with unit statistics is identity") {
    Tensor<double> mean({1}, 0.0), var({1}, 1.0);
    RunningStats<double> rs{&mean, &var};
    auto x = tensor({2, 1, 1, 2}, {0.5, -2, 3, 7});
    auto y = normalize_2d(tape.constant(x), NormMode::batch, one, zero, StatsMode::eval, 1e-10, &rs);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(y.value()[i] == doctest::Approx(x[i]).epsilon(1e-9));
  }
  SUBCASE("errors") {
    auto x = tape.constant(Tensor<double>({2, 1, 2, 2}));
    CHECK_THROWS(normalize_2d(x, NormMode::batch, one, zero, StatsMode::eval, 1e-5));
    CHECK_THROWS(normalize_2d(x, NormMode::instance, one, zero, StatsMode::train, 0.0));
  }
  SUBCASE("running statistics update with unbiased variance") {
    Tensor<double> mean({1}, 0.0), var({1}, 1.0);
    RunningStats<double> rs{&mean, &var, 0.5};
    normalize_2d(tape.constant(tensor({1, 1, 1, 4}, {1, 2, 3, 4})), NormMode::batch, one, zero,
                 StatsMode::train, 1e-5, &rs);
    CHECK(mean[0] == doctest::Approx(1.25));
    CHECK(var[0] == doctest::Approx(0.5 + 0.5 * (5.0 / 3.0)));
  }
}

TEST_CASE("pointwise examples") {
  Tape<double> tape;
  check_close(relu(tape.constant(tensor({3}, {-1, 0, 2}))).value(), {0, 0, 2});
  check_close(sigmoid(tape.constant(tensor({1}, {0}))).value(), {0.5});
  Tape<float> tf;
  const float lo = sigmoid(tf.constant(Tensor<float>({2}, std::vector<float>{-1e4f, 1e4f}))).value()[0];
  const float hi = sigmoid(tf.constant(Tensor<float>({2}, std::vector<float>{-1e4f, 1e4f}))).value()[1];
  CHECK(lo > 0.0f);
  CHECK(lo <= 1e-6f);
  CHECK(hi < 1.0f);
}

TEST_CASE("softmax_over examples and invariants") {
  Tape<double> tape;
  check_close(softmax_over(tape.constant(Tensor<double>({2, 2})), {0, 1}).value(),
              {0.25, 0.25, 0.25, 0.25});
  check_close(softmax_over(tape.constant(tensor({2}, {0, std::log(3.0)})), {0}).value(),
              {0.25, 0.75}, 1e-12);
  Rng rng(5);
  for (int rep = 0; rep < 20; ++rep) {
    auto x = random_tensor({3, 4, 5}, rng, -5, 5);
    auto shifted = x;
    for (auto& v : shifted.values()) v += 17.0;
    auto a = softmax_over(tape.constant(x), {1, 2}).value();
    auto b = softmax_over(tape.constant(shifted), {1, 2}).value();
    for (std::size_t g = 0; g < 3; ++g) {
      double s = 0;
      for (std::size_t k = 0; k < 20; ++k) s += a[g * 20 + k];
      CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-6);
  }
}

TEST_CASE("reduce examples") {
  Tape<double> tape;
  check_close(reduce(tape.constant(tensor({3}, {1, 2, 3})), ReduceKind::sum, {0}).value(), {6});
  check_close(reduce(tape.constant(tensor({3}, {1, 1, 1})), ReduceKind::mean_and_std, {0}).value(),
              {1, 0});
  CHECK(reduce(tape.constant(Tensor<double>({4, 3, 5})), ReduceKind::sum, {1, 2}).shape() == Shape{4});
  CHECK(reduce(tape.constant(Tensor<double>({2, 4, 3, 5})), ReduceKind::mean_and_std, {2, 3}).shape() ==
        Shape{2, 8});
  CHECK_THROWS(reduce(tape.constant(Tensor<double>({3, 1})), ReduceKind::mean_and_std, {1}));
  // Unbiased std of {1, 2, 3, 4}.
  check_close(reduce(tape.constant(tensor({4}, {1, 2, 3, 4})), ReduceKind::mean_and_std, {0}).value(),
              {2.5, std::sqrt(5.0 / 3.0)});
}

TEST_CASE("affine examples") {
  Tape<double> tape;
  check_close(affine(tape.constant(tensor({2}, {2, 3})), tape.constant(tensor({1, 2}, {1, 1})),
                     tape.constant(tensor({1}, {0})))
                  .value(),
              {5});
  auto x = tensor({3}, {0.3, -1, 4});
  check_close(affine(tape.constant(x), tape.constant(tensor({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1})),
                     tape.constant(Tensor<double>({3})))
                  .value(),
              {0.3, -1, 4});
  CHECK_THROWS(affine(tape.constant(x), tape.constant(Tensor<double>({2, 2})),
                      tape.constant(Tensor<double>({2}))));
  // d out[k] / d input = row k of the weight.
  Tape<double> t2;
  auto in = t2.variable(x);
  auto w = tensor({2, 3}, {1, 2, 3, -4, 5, -6});
  auto out = affine(in, t2.constant(w), t2.constant(Tensor<double>({2})));
  const std::array<std::size_t, 1> k{1};
  t2.backward(pick(reshape(out, {1, 2}), std::span<const std::size_t>(k)));
  check_close(t2.grad(in), {-4, 5, -6});
}

TEST_CASE("backward_to examples") {
  SUBCASE("sum of squares") {
    Tape<double> tape;
    auto x = tape.variable(tensor({2}, {1, -2}));
    tape.mark_tap(x);
    const std::array<Var<double>, 1> taps{x};
    auto g = backward_to(sum_all(mul(x, x)), std::span<const Var<double>>(taps));
    check_close(g[0].grad, {2, -4});
    CHECK(g[0].connected);
  }
  SUBCASE("relu sum") {
    Tape<double> tape;
    auto x = tape.variable(tensor({2}, {-1, 2}));
    tape.mark_tap(x);
    const std::array<Var<double>, 1> taps{x};
    check_close(backward_to(sum_all(relu(x)), std::span<const Var<double>>(taps))[0].grad, {0, 1});
  }
  SUBCASE("disconnected tap returns zeros, flagged") {
    Tape<double> tape;
    auto x = tape.variable(tensor({2}, {1, 2}));
    auto y = tape.variable(tensor({2}, {3, 4}));
    tape.mark_tap(y);
    const std::array<Var<double>, 1> taps{y};
    auto g = backward_to(sum_all(x), std::span<const Var<double>>(taps));
    CHECK_FALSE(g[0].connected);
    check_close(g[0].grad, {0, 0});
  }
  SUBCASE("unregistered tap and late registration are errors") {
    Tape<double> tape;
    auto x = tape.variable(tensor({2}, {1, 2}));
    auto s = sum_all(x);
    const std::array<Var<double>, 1> taps{x};
    CHECK_THROWS_AS(backward_to(s, std::span<const Var<double>>(taps)), TapError);
    CHECK_THROWS_AS(tape.mark_tap(x), TapError);
  }
  SUBCASE("repeated backward passes agree") {
    Tape<double> tape;
    Rng rng(2);
    auto x = tape.variable(random_tensor({3, 4}, rng));
    tape.mark_tap(x);
    auto s = sum_all(mul(softmax_over(x, {1}), x));
    const std::array<Var<double>, 1> taps{x};
    auto a = backward_to(s, std::span<const Var<double>>(taps));
    auto b = backward_to(s, std::span<const Var<double>>(taps));
    CHECK(a[0].grad == b[0].grad);
  }
}

TEST_CASE("detach") {
  Tape<double> tape;
  auto x = tape.variable(tensor({3}, {1, -2, 0.5}));
  auto d = detach(x);
  CHECK(d.value() == x.value());
  CHECK_FALSE(d.requires_grad());
  tape.backward(sum_all(mul(d, x)));
  check_close(tape.grad(x), {1, -2, 0.5});  // not 2x
  Tape<double> t2;
  auto y = t2.variable(tensor({2}, {1, 2}));
  auto z = t2.variable(tensor({2}, {3, 4}));
  t2.backward(sum_all(mul(detach(y), z)));
  check_close(t2.grad(y), {0, 0});
}

TEST_CASE("frozen parameters are untouched by backward passes") {
  ParamSet<double> params;
  params.add("w", tensor({2}, {0.5, -1}));
  params.set_frozen(true);
  const auto before = params;
  for (int i = 0; i < 3; ++i) {
    Tape<double> tape;
    auto w = tape.parameter(params, 0);
    auto x = tape.variable(tensor({2}, {2, 3}));
    tape.backward(sum_all(mul(w, x)));
    CHECK(tape.grad(x)[0] == 0.5);
  }
  CHECK(params.same_values(before));
  CHECK(params[0].grad.empty());
}

// Finite-difference oracle, 64-bit, step 1e-5, 20 random instances per primitive.
TEST_CASE("gradients match central differences for every primitive") {
  Rng rng(2024);
  for (const auto& c : testing::primitive_cases()) {
    double worst = 0;
    for (int i = 0; i < kInstances; ++i) {
      worst = std::max(worst, check_gradients(c.build, c.inputs(rng), rng).max_rel_error);
    }
    INFO(c.name << " worst relative error " << worst);
    CHECK(worst < kTol);
  }
}

TEST_CASE("float gradients agree with finite differences to 1e-3") {
  Rng rng(9);
  for (int i = 0; i < kInstances; ++i) {
    auto x = random_tensor({2, 2, 5, 4}, rng);
    auto k = random_tensor({3, 2, 3, 3}, rng);
    auto r = random_tensor({2, 3, 5, 4}, rng);
    Tape<float> tape;
    auto xv = tape.variable(x.cast<float>());
    auto kv = tape.constant(k.cast<float>());
    auto y = sigmoid(conv_layer(xv, kv, kNoBiasF, ConvMode::forward, {1, 1}, {1, 1}));
    tape.backward(sum_all(mul(y, tape.constant(r.cast<float>()))));
    const auto g = tape.grad(xv).cast<double>();
    auto f = [&](const Tensor<double>& xx) {
      Tape<double> t;
      auto yy = sigmoid(conv_layer(t.constant(xx), t.constant(k), kNoBias, ConvMode::forward, {1, 1}, {1, 1}));
      double s = 0;
      for (std::size_t j = 0; j < r.size(); ++j) s += yy.value()[j] * r[j];
      return s;
    };
    Tensor<double> num(x.shape());
    for (std::size_t j = 0; j < x.size(); ++j) {
      auto up = x, dn = x;
      up[j] += 1e-5;
      dn[j] -= 1e-5;
      num[j] = (f(up) - f(dn)) / 2e-5;
    }
    CHECK(testing::relative_error(g, num) < 1e-3);
  }
}
