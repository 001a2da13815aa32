// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <iosfwd>
#include <utility>
#include <vector>

namespace seqdesc {

/// Linear ramp for the Gaussian-noise standard deviation: 0 at epoch 0,
/// sigma_max first reached at epoch e_max, clamped there afterwards.
struct NoiseSchedule {
  double sigma_max = 0.3;
  std::size_t e_max = 25;

  NoiseSchedule() = default;
  NoiseSchedule(double sigma_max, std::size_t e_max);
};

/// Square-root ramp for the dropout rate: 0 at epoch 0, delta_max first
/// reached at epoch e_max, clamped there afterwards.
struct DropoutSchedule {
  double delta_max = 0.25;
  std::size_t e_max = 25;

  DropoutSchedule() = default;
  DropoutSchedule(double delta_max, std::size_t e_max);
};

/// min(sigma_max, sigma_max * E / e_max)
double sigma_at(const NoiseSchedule& s, std::size_t epoch);

/// min(delta_max, delta_max * sqrt(E / e_max))
double delta_at(const DropoutSchedule& s, std::size_t epoch);

/// One (epoch, value) row per epoch in [0, total_epochs], inclusive.
std::vector<std::pair<std::size_t, double>> schedule_table(
    const NoiseSchedule& s, std::size_t total_epochs);
std::vector<std::pair<std::size_t, double>> schedule_table(
    const DropoutSchedule& s, std::size_t total_epochs);

/// CSV with header "epoch,value"; values round-trip the exact doubles.
void write_schedule_csv(std::ostream& out,
                        const std::vector<std::pair<std::size_t, double>>& table);

}  // namespace seqdesc
