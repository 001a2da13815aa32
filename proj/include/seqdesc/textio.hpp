// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <charconv>
#include <string>

namespace seqdesc {

/// Shortest decimal form that round-trips the exact double ('.' separator,
/// never locale-dependent). Used for every CSV number the toolkit emits so
/// files are byte-stable and parse back bit-identically.
inline std::string format_double(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace seqdesc
