// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "seqdesc/ops.hpp"
#include "seqdesc/rng.hpp"
#include "seqdesc/tape.hpp"

namespace seqdesc {

struct GradCheckFailure {
  std::size_t input_index = 0;
  std::size_t coordinate = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_err = 0.0;
};

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::size_t coordinates_checked = 0;
  std::vector<GradCheckFailure> failures;

  bool ok() const { return failures.empty(); }
};

/// Builds a scalar loss from leaf values placed on the provided tape.
using ScalarFn =
    std::function<Value<double>(Tape<double>&, const std::vector<Value<double>>&)>;

/// Compares tape gradients against central finite differences, coordinate by
/// coordinate. Relative error uses max(|analytic|, |numeric|, 1) as the
/// denominator. If an input has more than `max_coords_per_input`
/// coordinates, a random subset of that size is checked (seeded by
/// `sample_seed`). Empty inputs contribute no coordinates.
inline GradCheckReport grad_check(const ScalarFn& f,
                                  const std::vector<Tensor<double>>& point,
                                  double step, double tolerance,
                                  std::size_t max_coords_per_input = SIZE_MAX,
                                  std::uint64_t sample_seed = 0) {
  auto eval = [&](const std::vector<Tensor<double>>& at) {
    Tape<double> tape;
    std::vector<Value<double>> leaves;
    leaves.reserve(at.size());
    for (const auto& t : at) leaves.push_back(tape.leaf(t, true));
    Value<double> loss = f(tape, leaves);
    if (loss.tensor().numel() != 1)
      throw ContractError("grad_check: function must be scalar-valued");
    return loss.tensor()[0];
  };

  // analytic gradients
  std::vector<Tensor<double>> analytic;
  {
    Tape<double> tape;
    std::vector<Value<double>> leaves;
    for (const auto& t : point) leaves.push_back(tape.leaf(t, true));
    Value<double> loss = f(tape, leaves);
    if (loss.tensor().numel() != 1)
      throw ContractError("grad_check: function must be scalar-valued");
    tape.backward(loss);
    for (const auto& l : leaves) analytic.push_back(tape.grad(l));
  }

  GradCheckReport report;
  std::vector<Tensor<double>> work = point;
  for (std::size_t ti = 0; ti < point.size(); ++ti) {
    std::size_t n = point[ti].numel();
    std::vector<std::size_t> coords;
    if (n <= max_coords_per_input) {
      coords.resize(n);
      for (std::size_t i = 0; i < n; ++i) coords[i] = i;
    } else {
      RngStream pick(derive_key(sample_seed, "gradcheck-sample", ti));
      std::vector<std::size_t> all(n);
      for (std::size_t i = 0; i < n; ++i) all[i] = i;
      shuffle(all, pick);
      coords.assign(all.begin(), all.begin() + max_coords_per_input);
    }
    for (std::size_t c : coords) {
      double keep = work[ti][c];
      work[ti][c] = keep + step;
      double up = eval(work);
      work[ti][c] = keep - step;
      double down = eval(work);
      work[ti][c] = keep;
      double numeric = (up - down) / (2.0 * step);
      double a = analytic[ti][c];
      double denom = std::max({std::abs(a), std::abs(numeric), 1.0});
      double rel = std::abs(a - numeric) / denom;
      report.coordinates_checked += 1;
      report.max_rel_err = std::max(report.max_rel_err, rel);
      if (rel > tolerance)
        report.failures.push_back({ti, c, a, numeric, rel});
    }
  }
  return report;
}

}  // namespace seqdesc
