// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace seqdesc {

/// Configuration value outside its documented domain (bad rate, bad shape
/// parameter, inconsistent config sections).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shape mismatch between operands.
class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Index (vocabulary id, axis, coordinate) out of range.
class IndexError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// API misuse: non-scalar loss, tape reused after backward, state mismatch.
class ContractError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// User-supplied data is unusable (empty corpus, overlong sequence,
/// malformed input file).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Filesystem write/serialization failure.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical breakdown at runtime (NaN loss, non-finite op output).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace seqdesc
