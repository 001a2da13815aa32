// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "seqdesc/activation.hpp"
#include "seqdesc/ops.hpp"
#include "seqdesc/rng.hpp"
#include "seqdesc/tape.hpp"

using namespace seqdesc;

namespace {

Tensor<double> t2(std::size_t r, std::size_t c, std::vector<double> v) {
  return Tensor<double>({r, c}, std::move(v));
}

}  // namespace

TEST_CASE("tensor invariant: data size must match shape") {
  CHECK_THROWS_AS(Tensor<double>({2, 3}, {1.0, 2.0}), ShapeError);
  CHECK(Tensor<double>({2, 3}).numel() == 6);
  CHECK(Tensor<double>::scalar(4.0).rank() == 0);
  CHECK(Tensor<double>::scalar(4.0).numel() == 1);
  CHECK(Tensor<double>({0}).numel() == 0);
}

TEST_CASE("matmul: identity, hand product, zeros") {
  Tape<double> tape;
  tape.check_finite = true;

  auto eye = tape.constant(t2(2, 2, {1, 0, 0, 1}));
  auto x = tape.constant(t2(2, 3, {1, 2, 3, 4, 5, 6}));
  auto out = matmul(eye, x);
  for (std::size_t i = 0; i < 6; ++i) CHECK(out.tensor()[i] == x.tensor()[i]);

  auto a = tape.constant(t2(2, 2, {1, 2, 3, 4}));
  auto b = tape.constant(t2(2, 1, {5, 6}));
  auto ab = matmul(a, b);
  CHECK(ab.tensor()[0] == 17.0);
  CHECK(ab.tensor()[1] == 39.0);

  auto z = tape.constant(Tensor<double>({3, 2}));
  auto anything = tape.constant(t2(2, 4, {1, 2, 3, 4, 5, 6, 7, 8}));
  auto zz = matmul(z, anything);
  CHECK(zz.shape() == std::vector<std::size_t>{3, 4});
  for (std::size_t i = 0; i < zz.tensor().numel(); ++i) CHECK(zz.tensor()[i] == 0.0);
}

TEST_CASE("matmul: shape mismatch names both shapes") {
  Tape<double> tape;
  auto a = tape.constant(t2(2, 3, {1, 2, 3, 4, 5, 6}));
  auto b = tape.constant(t2(2, 2, {1, 2, 3, 4}));
  try {
    matmul(a, b);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    std::string msg = e.what();
    CHECK(msg.find("[2x3]") != std::string::npos);
    CHECK(msg.find("[2x2]") != std::string::npos);
  }
}

TEST_CASE("elementwise: mish values per element, empty tensor, relu") {
  Tape<double> tape;
  auto x = tape.constant(Tensor<double>({3}, {0.0, 1.0, -10.0}));
  auto y = elementwise(x, ActivationKind::Mish);
  CHECK(y.tensor()[0] == 0.0);
  CHECK(std::abs(y.tensor()[1] - 0.865098) <= 1e-6);
  CHECK(std::abs(y.tensor()[2] - (-4.5398e-4)) <= 1e-7);

  auto empty = tape.constant(Tensor<double>({0}));
  auto ey = elementwise(empty, ActivationKind::Mish);
  CHECK(ey.tensor().numel() == 0);
  CHECK(ey.shape() == std::vector<std::size_t>{0});

  auto r = elementwise(tape.constant(Tensor<double>({2}, {-1.0, 2.0})), ActivationKind::ReLU);
  CHECK(r.tensor()[0] == 0.0);
  CHECK(r.tensor()[1] == 2.0);
}

TEST_CASE("softmax: symmetry, stability, simplex rows") {
  Tape<double> tape;
  tape.check_finite = true;
  auto s = softmax_last(tape.constant(Tensor<double>({3}, {0.0, 0.0, 0.0})));
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(s.tensor()[i] == doctest::Approx(1.0 / 3).epsilon(1e-12));

  auto big = softmax_last(tape.constant(Tensor<double>({2}, {1000.0, 0.0})));
  CHECK(std::abs(big.tensor()[0] - 1.0) < 1e-12);
  CHECK(std::abs(big.tensor()[1]) < 1e-12);

  RngStream rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor<double> x({4, 5});
    for (std::size_t i = 0; i < x.numel(); ++i) x[i] = 10.0 * (rng.uniform() - 0.5);
    auto y = softmax_last(tape.constant(x));
    for (std::size_t r = 0; r < 4; ++r) {
      double sum = 0.0;
      for (std::size_t c = 0; c < 5; ++c) {
        double p = y.tensor()[r * 5 + c];
        CHECK(p >= 0.0);
        sum += p;
      }
      CHECK(std::abs(sum - 1.0) <= 1e-6);
    }
  }
}

TEST_CASE("layer_norm: constant rows collapse to bias; unit stats") {
  Tape<double> tape;
  auto gain = tape.constant(Tensor<double>::full({4}, 1.0));
  auto bias = tape.constant(Tensor<double>({4}));
  auto c = layer_norm(tape.constant(Tensor<double>::full({2, 4}, 3.5)), gain, bias, 1e-5);
  for (std::size_t i = 0; i < 8; ++i) CHECK(std::abs(c.tensor()[i]) < 1e-12);

  RngStream rng(11);
  Tensor<double> x({3, 16});
  for (std::size_t i = 0; i < x.numel(); ++i) x[i] = rng.normal() * 2.0 + 1.0;
  auto y = layer_norm(tape.constant(x), gain.tape->constant(Tensor<double>::full({16}, 1.0)),
                      tape.constant(Tensor<double>({16})), 1e-5);
  for (std::size_t r = 0; r < 3; ++r) {
    double mean = 0.0, var = 0.0;
    for (std::size_t j = 0; j < 16; ++j) mean += y.tensor()[r * 16 + j];
    mean /= 16.0;
    for (std::size_t j = 0; j < 16; ++j) {
      double d = y.tensor()[r * 16 + j] - mean;
      var += d * d;
    }
    var /= 16.0;
    CHECK(std::abs(mean) <= 1e-6);
    CHECK(std::abs(var - 1.0) <= 1e-4);
  }
  CHECK_THROWS_AS(
      layer_norm(tape.constant(Tensor<double>({2, 4})), gain, bias, 0.0), ConfigError);
}

TEST_CASE("cross_entropy_smoothed: limits and hand-computed value") {
  Tape<double> tape;
  // near-one-hot prediction, eps = 0: loss -> 0
  auto sharp = tape.constant(t2(1, 3, {50.0, 0.0, 0.0}));
  auto l0 = cross_entropy_smoothed(sharp, {0}, 0.0, 2);
  CHECK(l0.tensor()[0] < 1e-6);

  // uniform logits make smoothing irrelevant: loss = ln V
  auto uniform = tape.constant(t2(1, 2, {0.0, 0.0}));
  auto l1 = cross_entropy_smoothed(uniform, {1}, 0.1, -1);
  CHECK(l1.tensor()[0] == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  // independent scalar evaluation of the smoothed formula
  auto logits = tape.constant(t2(1, 4, {2.0, 0.0, 0.0, 0.0}));
  auto l2 = cross_entropy_smoothed(logits, {0}, 0.1, -1);
  double z = std::exp(2.0) + 3.0;
  double expected = 0.0;
  for (int v = 0; v < 4; ++v) {
    double logit = v == 0 ? 2.0 : 0.0;
    double q = 0.1 / 4.0 + (v == 0 ? 0.9 : 0.0);
    expected -= q * (logit - std::log(z));
  }
  CHECK(l2.tensor()[0] == doctest::Approx(expected).epsilon(1e-12));

  // pad rows are excluded from the mean
  auto two = tape.constant(t2(2, 4, {2.0, 0.0, 0.0, 0.0, 9.0, 9.0, 9.0, 9.0}));
  auto l3 = cross_entropy_smoothed(two, {0, 2}, 0.1, 2);
  CHECK(l3.tensor()[0] == doctest::Approx(expected).epsilon(1e-12));

  CHECK_THROWS_AS(cross_entropy_smoothed(logits, {0}, 1.0, -1), ConfigError);
  CHECK_THROWS_AS(cross_entropy_smoothed(logits, {7}, 0.1, -1), IndexError);
}

TEST_CASE("gaussian_noise: identity at sigma 0, stats at 0.3, determinism") {
  Tape<double> tape;
  Tensor<double> base({8}, {1, 2, 3, 4, 5, 6, 7, 8});
  auto x = tape.constant(base);
  RngStream rng(derive_key(2019, "noise-test"));
  auto same = gaussian_noise(x, 0.0, rng);
  CHECK(same.id == x.id);  // bit-identical: same node

  const std::size_t n = 1'000'000;
  auto zeros = tape.constant(Tensor<double>({n}));
  RngStream s1(derive_key(2019, "noise-stats"));
  auto noisy = gaussian_noise(zeros, 0.3, s1);
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += noisy.tensor()[i];
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double d = noisy.tensor()[i] - mean;
    var += d * d;
  }
  var /= static_cast<double>(n);
  double sd = std::sqrt(var);
  CHECK(std::abs(mean) <= 3.0 * 0.3 / 1000.0);
  CHECK(std::abs(sd - 0.3) <= 0.003);

  RngStream s2(derive_key(2019, "noise-stats"));
  auto noisy2 = gaussian_noise(zeros, 0.3, s2);
  for (std::size_t i = 0; i < 1000; ++i) CHECK(noisy.tensor()[i] == noisy2.tensor()[i]);

  CHECK_THROWS_AS(gaussian_noise(x, -0.1, rng), ConfigError);
}

TEST_CASE("dropout: identities, config domain, statistics") {
  Tape<double> tape;
  auto x = tape.constant(Tensor<double>({4}, {1, 2, 3, 4}));
  RngStream rng(1);
  CHECK(dropout(x, 0.0, true, rng).id == x.id);
  CHECK(dropout(x, 0.7, false, rng).id == x.id);
  CHECK_THROWS_AS(dropout(x, 1.0, true, rng), ConfigError);
  CHECK_THROWS_AS(dropout(x, -0.2, true, rng), ConfigError);

  const std::size_t n = 1'000'000;
  auto ones = tape.constant(Tensor<double>::full({n}, 1.0));
  RngStream s(derive_key(2019, "dropout-stats"));
  auto dropped = dropout(ones, 0.25, true, s);
  std::size_t zeroed = 0;
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (dropped.tensor()[i] == 0.0) ++zeroed;
    mean += dropped.tensor()[i];
  }
  mean /= static_cast<double>(n);
  double frac = static_cast<double>(zeroed) / static_cast<double>(n);
  CHECK(std::abs(frac - 0.25) <= 0.002);
  CHECK(std::abs(mean - 1.0) <= 0.005);
  // 5-sigma expectation bound: masked scalar std is sqrt(delta/(1-delta))
  double bound = 5.0 * std::sqrt(0.25 / 0.75) / std::sqrt(static_cast<double>(n));
  CHECK(std::abs(mean - 1.0) <= bound);
}

TEST_CASE("embed rejects out-of-range ids naming the offender") {
  Tape<double> tape;
  auto table = tape.constant(t2(4, 2, {0, 1, 2, 3, 4, 5, 6, 7}));
  auto ok = embed(table, {3, 0}, {2});
  CHECK(ok.tensor()[0] == 6.0);
  CHECK(ok.tensor()[1] == 7.0);
  try {
    embed(table, {4}, {1});
    FAIL("expected IndexError");
  } catch (const IndexError& e) {
    CHECK(std::string(e.what()).find("4") != std::string::npos);
  }
}

TEST_CASE("slice and concat round-trip") {
  Tape<double> tape;
  auto x = tape.constant(t2(3, 2, {1, 2, 3, 4, 5, 6}));
  auto top = slice(x, 0, 0, 1);
  auto rest = slice(x, 0, 1, 2);
  auto back = concat<double>({top, rest}, 0);
  for (std::size_t i = 0; i < 6; ++i) CHECK(back.tensor()[i] == x.tensor()[i]);
  CHECK_THROWS_AS(slice(x, 0, 2, 2), IndexError);
  CHECK_THROWS_AS(slice(x, 5, 0, 1), IndexError);
}

TEST_CASE("finite check flags NaN-producing ops in test mode") {
  Tape<double> tape;
  tape.check_finite = true;
  auto x = tape.constant(Tensor<double>({1}, {1e308}));
  CHECK_THROWS_AS(add(x, x), NumericError);
}

TEST_CASE("same seed twice gives bit-identical tensors") {
  auto draw = [](std::uint64_t key) {
    RngStream r(key);
    Tensor<double> t({64});
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] = r.normal();
    return t;
  };
  Tensor<double> a = draw(42), b = draw(42), c = draw(43);
  bool all_equal = true, any_diff = false;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    all_equal = all_equal && a[i] == b[i];
    any_diff = any_diff || a[i] != c[i];
  }
  CHECK(all_equal);
  CHECK(any_diff);
}
