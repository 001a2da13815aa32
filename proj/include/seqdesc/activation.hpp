// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <string>
#include <string_view>

#include "seqdesc/errors.hpp"

namespace seqdesc {

enum class ActivationKind { Mish, ReLU, GELU };

ActivationKind activation_from_name(std::string_view name);
std::string_view activation_name(ActivationKind kind);

/// log(1 + e^x) without overflow for large |x|. Always >= 0 and >= x;
/// underflows to 0 for very negative x.
template <typename T>
inline T softplus_stable(T x) {
  if (x > T(0)) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

template <typename T>
inline T logistic(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  T e = std::exp(x);
  return e / (T(1) + e);
}

/// x * tanh(softplus(x)): smooth, non-monotonic, bounded below
/// (minimum ~ -0.30884 near x ~ -1.19245).
template <typename T>
inline T mish(T x) {
  return x * std::tanh(softplus_stable(x));
}

/// Closed-form derivative: with s = softplus(x) and t = tanh(s),
/// mish'(x) = t + x * (1 - t^2) * logistic(x).
template <typename T>
inline T mish_prime(T x) {
  T t = std::tanh(softplus_stable(x));
  return t + x * (T(1) - t * t) * logistic(x);
}

template <typename T>
inline T relu(T x) {
  return x > T(0) ? x : T(0);
}

// Subgradient at 0 fixed to 0 for test determinism.
template <typename T>
inline T relu_prime(T x) {
  return x > T(0) ? T(1) : T(0);
}

/// tanh-approximation GELU: 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3))).
template <typename T>
inline T gelu(T x) {
  constexpr T kSqrt2OverPi = T(0.7978845608028654);
  constexpr T kCubic = T(0.044715);
  T u = kSqrt2OverPi * (x + kCubic * x * x * x);
  return T(0.5) * x * (T(1) + std::tanh(u));
}

template <typename T>
inline T gelu_prime(T x) {
  constexpr T kSqrt2OverPi = T(0.7978845608028654);
  constexpr T kCubic = T(0.044715);
  T u = kSqrt2OverPi * (x + kCubic * x * x * x);
  T t = std::tanh(u);
  T du = kSqrt2OverPi * (T(1) + T(3) * kCubic * x * x);
  return T(0.5) * (T(1) + t) + T(0.5) * x * (T(1) - t * t) * du;
}

template <typename T>
inline T activation_value(ActivationKind kind, T x) {
  switch (kind) {
    case ActivationKind::Mish: return mish(x);
    case ActivationKind::ReLU: return relu(x);
    case ActivationKind::GELU: return gelu(x);
  }
  throw ContractError("activation_value: unknown kind");
}

template <typename T>
inline T activation_derivative(ActivationKind kind, T x) {
  switch (kind) {
    case ActivationKind::Mish: return mish_prime(x);
    case ActivationKind::ReLU: return relu_prime(x);
    case ActivationKind::GELU: return gelu_prime(x);
  }
  throw ContractError("activation_derivative: unknown kind");
}

}  // namespace seqdesc
