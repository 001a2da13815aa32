// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "seqdesc/gradcheck.hpp"
#include "seqdesc/ops.hpp"

using namespace seqdesc;

namespace {

Tensor<double> random_tensor(std::vector<std::size_t> shape, RngStream& rng,
                             double scale = 1.0) {
  Tensor<double> t(std::move(shape));
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = scale * rng.normal();
  return t;
}

constexpr double kStep = 1e-4;
constexpr double kTol = 1e-4;
constexpr int kSeeds = 20;

}  // namespace

TEST_CASE("backward: sum gives all-ones gradient") {
  Tape<double> tape;
  auto x = tape.leaf(Tensor<double>({2, 3}, {1, 2, 3, 4, 5, 6}), true);
  auto loss = sum_all(x);
  tape.backward(loss);
  Tensor<double> g = tape.grad(x);
  for (std::size_t i = 0; i < 6; ++i) CHECK(g[i] == 1.0);
}

TEST_CASE("backward: disconnected leaf gets a zero gradient") {
  Tape<double> tape;
  auto x = tape.leaf(Tensor<double>({3}, {1, 2, 3}), true);
  auto unused = tape.leaf(Tensor<double>({2}, {5, 6}), true);
  auto loss = sum_all(x);
  tape.backward(loss);
  Tensor<double> g = tape.grad(unused);
  CHECK(g.shape() == std::vector<std::size_t>{2});
  CHECK(g[0] == 0.0);
  CHECK(g[1] == 0.0);
}

TEST_CASE("backward: single-use tape contract") {
  Tape<double> tape;
  auto x = tape.leaf(Tensor<double>({2}, {1, 2}), true);
  auto loss = sum_all(x);
  tape.backward(loss);
  CHECK_THROWS_AS(tape.backward(loss), ContractError);
}

TEST_CASE("backward: non-scalar loss rejected") {
  Tape<double> tape;
  auto x = tape.leaf(Tensor<double>({2}, {1, 2}), true);
  CHECK_THROWS_AS(tape.backward(x), ContractError);
}

TEST_CASE("backward: sum(mish(Wx)) matches finite differences") {
  RngStream rng(derive_key(2019, "wx"));
  Tensor<double> w = random_tensor({4, 3}, rng, 0.5);
  Tensor<double> x = random_tensor({3, 2}, rng, 0.5);
  auto f = [](Tape<double>& t, const std::vector<Value<double>>& in) {
    return sum_all(elementwise(matmul(in[0], in[1]), ActivationKind::Mish));
  };
  auto report = grad_check(f, {w, x}, kStep, kTol);
  CHECK(report.ok());
  CHECK(report.coordinates_checked == 18);
}

TEST_CASE("grad_check: quadratic is exact to machine-precision scale") {
  RngStream rng(derive_key(2019, "quadratic"));
  Tensor<double> x = random_tensor({5}, rng);
  auto f = [](Tape<double>& t, const std::vector<Value<double>>& in) {
    return scale(sum_all(mul(in[0], in[0])), 0.5);
  };
  auto report = grad_check(f, {x}, kStep, kTol);
  CHECK(report.ok());
  CHECK(report.max_rel_err < 1e-7);
}

TEST_CASE("grad_check: zero-sized input yields an empty report") {
  auto f = [](Tape<double>& t, const std::vector<Value<double>>& in) {
    return sum_all(in[0]);
  };
  auto report = grad_check(f, {Tensor<double>({0})}, kStep, kTol);
  CHECK(report.coordinates_checked == 0);
  CHECK(report.failures.empty());
}

// every differentiable primitive, randomized small inputs, >= 20 seeds each

TEST_CASE("primitive grad checks across seeds") {
  for (int seed = 0; seed < kSeeds; ++seed) {
    RngStream rng(derive_key(2019, "prim", static_cast<std::uint64_t>(seed)));
    {
      // add / add_broadcast / mul / scale
      Tensor<double> a = random_tensor({3, 4}, rng);
      Tensor<double> b = random_tensor({3, 4}, rng);
      Tensor<double> bias = random_tensor({4}, rng);
      auto f1 = [](Tape<double>& t, const std::vector<Value<double>>& in) {
        return sum_all(mul(add(in[0], in[1]), in[0]));
      };
      CHECK(grad_check(f1, {a, b}, kStep, kTol).ok());
      auto f2 = [](Tape<double>& t, const std::vector<Value<double>>& in) {
        return sum_all(scale(add_broadcast(in[0], in[1]), 1.7));
      };
      CHECK(grad_check(f2, {a, bias}, kStep, kTol).ok());
    }
    {
      // matmul (batched) + transpose
      Tensor<double> a = random_tensor({2, 3, 4}, rng, 0.5);
      Tensor<double> b = random_tensor({2, 4, 2}, rng, 0.5);
      auto f = [](Tape<double>& t, const std::vector<Value<double>>& in) {
        return sum_all(mul(matmul(in[0], in[1]), matmul(in[0], in[1])));
      };
      CHECK(grad_check(f, {a, b}, kStep, kTol).ok());
      auto ft = [](Tape<double>& t, const std::vector<Value<double>>& in) {
        return sum_all(matmul(in[0], transpose_last2(in[0])));
      };
      CHECK(grad_check(ft, {a}, kStep, kTol).ok());
    }
    {
      // reshape / permute / slice / concat
      Tensor<double> a = random_tensor({2, 3, 4}, rng);
      auto f = [](Tape<double>& t, const std::vector<Value<double>>& in) {
        auto p = permute(in[0], {2, 0, 1});          // [4,2,3]
        auto r = reshape(p, {4, 6});
        auto s1 = slice(r, 1, 0, 2);
        auto s2 = slice(r, 1, 2, 4);
        auto c = concat<double>({s2, s1}, 1);
        return sum_all(mul(c, c));
      };
      CHECK(grad_check(f, {a}, kStep, kTol).ok());
    }
    {
      // elementwise activations
      Tensor<double> a = random_tensor({11}, rng, 2.0);
      for (auto kind : {ActivationKind::Mish, ActivationKind::GELU}) {
        auto f = [kind](Tape<double>& t, const std::vector<Value<double>>& in) {
          return sum_all(elementwise(in[0], kind));
        };
        CHECK(grad_check(f, {a}, kStep, kTol).ok());
      }
      // keep relu away from its kink
      Tensor<double> shifted = a;
      for (std::size_t i = 0; i < shifted.numel(); ++i)
        if (std::abs(shifted[i]) < 1e-2) shifted[i] = 0.5;
      auto fr = [](Tape<double>& t, const std::vector<Value<double>>& in) {
        return sum_all(elementwise(in[0], ActivationKind::ReLU));
      };
      CHECK(grad_check(fr, {shifted}, kStep, kTol).ok());
    }
    {
      // softmax + layer_norm
      Tensor<double> a = random_tensor({3, 5}, rng, 2.0);
      Tensor<double> gain = random_tensor({5}, rng, 0.5);
      Tensor<double> bias = random_tensor({5}, rng, 0.5);
      Tensor<double> mixer = random_tensor({3, 5}, rng);
      auto f = [mixer](Tape<double>& t, const std::vector<Value<double>>& in) {
        return sum_all(mul(softmax_last(in[0]), t.constant(mixer)));
      };
      CHECK(grad_check(f, {a}, kStep, kTol).ok());
      auto fl = [mixer](Tape<double>& t, const std::vector<Value<double>>& in) {
        return sum_all(
            mul(layer_norm(in[0], in[1], in[2], 1e-5), t.constant(mixer)));
      };
      CHECK(grad_check(fl, {a, gain, bias}, kStep, kTol).ok());
    }
    {
      // embed
      Tensor<double> table = random_tensor({6, 3}, rng);
      std::vector<std::int32_t> ids = {0, 5, 2, 2};
      auto f = [ids](Tape<double>& t, const std::vector<Value<double>>& in) {
        auto e = embed(in[0], ids, {4});
        return sum_all(mul(e, e));
      };
      CHECK(grad_check(f, {table}, kStep, kTol).ok());
    }
    {
      // cross entropy with label smoothing and a pad row
      Tensor<double> logits = random_tensor({3, 5}, rng, 2.0);
      std::vector<std::int32_t> targets = {1, 2, 4};
      auto f = [targets](Tape<double>& t, const std::vector<Value<double>>& in) {
        return cross_entropy_smoothed(in[0], targets, 0.1, 2);
      };
      CHECK(grad_check(f, {logits}, kStep, kTol).ok());
    }
    {
      // stochastic layers with per-evaluation rebuilt streams
      Tensor<double> a = random_tensor({4, 4}, rng);
      std::uint64_t nk = derive_key(77, "gc-noise", static_cast<std::uint64_t>(seed));
      std::uint64_t dk = derive_key(77, "gc-drop", static_cast<std::uint64_t>(seed));
      auto f = [nk, dk](Tape<double>& t, const std::vector<Value<double>>& in) {
        RngStream noise_rng(nk), drop_rng(dk);
        auto noisy = gaussian_noise(in[0], 0.3, noise_rng);
        auto kept = dropout(noisy, 0.25, true, drop_rng);
        return sum_all(mul(kept, kept));
      };
      CHECK(grad_check(f, {a}, kStep, kTol).ok());
    }
    {
      // mean reduction
      Tensor<double> a = random_tensor({7}, rng);
      auto f = [](Tape<double>& t, const std::vector<Value<double>>& in) {
        return mean_all(mul(in[0], in[0]));
      };
      CHECK(grad_check(f, {a}, kStep, kTol).ok());
    }
  }
}

TEST_CASE("gradient accumulates when a value is used twice") {
  Tape<double> tape;
  auto x = tape.leaf(Tensor<double>({2}, {3.0, -1.0}), true);
  auto loss = sum_all(add(x, x));
  tape.backward(loss);
  Tensor<double> g = tape.grad(x);
  CHECK(g[0] == 2.0);
  CHECK(g[1] == 2.0);
}

TEST_CASE("dropout mask capture: masks identical with noise on vs off") {
  Tensor<double> a({16});
  for (std::size_t i = 0; i < a.numel(); ++i) a[i] = static_cast<double>(i);

  auto run = [&](double sigma) {
    Tape<double> tape;
    tape.capture_stochastic = true;
    RngStream noise_rng(derive_key(5, "noise", 0));
    RngStream drop_rng(derive_key(5, "dropout", 0));
    auto x = tape.constant(a);
    auto noisy = gaussian_noise(x, sigma, noise_rng);
    auto out = dropout(noisy, 0.5, true, drop_rng);
    (void)out;
    return tape.dropout_masks;
  };
  auto masks_with_noise = run(0.3);
  auto masks_without = run(0.0);
  REQUIRE(masks_with_noise.size() == 1);
  REQUIRE(masks_without.size() == 1);
  for (std::size_t i = 0; i < 16; ++i)
    CHECK(masks_with_noise[0][i] == masks_without[0][i]);
}
