// SPDX-License-Identifier: Apache-2.0
#include "seqdesc/schedules.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "seqdesc/errors.hpp"
#include "seqdesc/textio.hpp"

namespace seqdesc {

NoiseSchedule::NoiseSchedule(double sigma_max_in, std::size_t e_max_in)
    : sigma_max(sigma_max_in), e_max(e_max_in) {
  if (!(sigma_max >= 0.0) || !std::isfinite(sigma_max))
    throw ConfigError("NoiseSchedule: sigma_max must be finite and >= 0");
  if (e_max < 1) throw ConfigError("NoiseSchedule: e_max must be >= 1");
}

DropoutSchedule::DropoutSchedule(double delta_max_in, std::size_t e_max_in)
    : delta_max(delta_max_in), e_max(e_max_in) {
  if (!(delta_max >= 0.0 && delta_max < 1.0))
    throw ConfigError("DropoutSchedule: delta_max must be in [0, 1)");
  if (e_max < 1) throw ConfigError("DropoutSchedule: e_max must be >= 1");
}

double sigma_at(const NoiseSchedule& s, std::size_t epoch) {
  double ratio = static_cast<double>(epoch) / static_cast<double>(s.e_max);
  return std::min(s.sigma_max, s.sigma_max * ratio);
}

double delta_at(const DropoutSchedule& s, std::size_t epoch) {
  double ratio = static_cast<double>(epoch) / static_cast<double>(s.e_max);
  return std::min(s.delta_max, s.delta_max * std::sqrt(ratio));
}

namespace {

template <typename Schedule, typename Fn>
std::vector<std::pair<std::size_t, double>> make_table(const Schedule& s,
                                                       std::size_t total_epochs,
                                                       Fn at) {
  std::vector<std::pair<std::size_t, double>> rows;
  rows.reserve(total_epochs + 1);
  for (std::size_t e = 0; e <= total_epochs; ++e) rows.emplace_back(e, at(s, e));
  return rows;
}

}  // namespace

std::vector<std::pair<std::size_t, double>> schedule_table(
    const NoiseSchedule& s, std::size_t total_epochs) {
  return make_table(s, total_epochs,
                    [](const NoiseSchedule& n, std::size_t e) { return sigma_at(n, e); });
}

std::vector<std::pair<std::size_t, double>> schedule_table(
    const DropoutSchedule& s, std::size_t total_epochs) {
  return make_table(s, total_epochs,
                    [](const DropoutSchedule& d, std::size_t e) { return delta_at(d, e); });
}

void write_schedule_csv(std::ostream& out,
                        const std::vector<std::pair<std::size_t, double>>& table) {
  out << "epoch,value\n";
  for (const auto& [epoch, value] : table)
    out << epoch << ',' << format_double(value) << '\n';
}

}  // namespace seqdesc
