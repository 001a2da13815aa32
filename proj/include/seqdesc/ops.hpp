// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "seqdesc/activation.hpp"
#include "seqdesc/rng.hpp"
#include "seqdesc/tape.hpp"

namespace seqdesc {

namespace detail {

template <typename T>
Tape<T>& same_tape(const Value<T>& a, const Value<T>& b, const char* op) {
  if (a.tape == nullptr || a.tape != b.tape)
    throw ContractError(std::string(op) + ": operands live on different tapes");
  return *a.tape;
}

inline void axpy_sizes(std::size_t) {}

// C[m,n] += A[m,k] * B[k,n]
template <typename T>
void gemm_acc(const T* a, const T* b, T* c, std::size_t m, std::size_t k,
              std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      T av = a[i * k + p];
      const T* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// dA[m,k] += dC[m,n] * B[k,n]^T  (rows of both operands are contiguous)
template <typename T>
void gemm_acc_nt(const T* dc, const T* b, T* da, std::size_t m, std::size_t k,
                 std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const T* crow = dc + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T* brow = b + p * n;
      T s = T(0);
      for (std::size_t j = 0; j < n; ++j) s += crow[j] * brow[j];
      da[i * k + p] += s;
    }
  }
}

// dB[k,n] += A[m,k]^T * dC[m,n]
template <typename T>
void gemm_acc_tn(const T* a, const T* dc, T* db, std::size_t m, std::size_t k,
                 std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const T* crow = dc + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      T av = a[i * k + p];
      T* brow = db + p * n;
      for (std::size_t j = 0; j < n; ++j) brow[j] += av * crow[j];
    }
  }
}

inline std::vector<std::size_t> strides_of(const std::vector<std::size_t>& shape) {
  std::vector<std::size_t> st(shape.size(), 1);
  for (std::size_t i = shape.size(); i-- > 1;) st[i - 1] = st[i] * shape[i];
  return st;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// elementwise arithmetic
// ---------------------------------------------------------------------------

template <typename T>
Value<T> add(const Value<T>& a, const Value<T>& b) {
  Tape<T>& tape = detail::same_tape(a, b, "add");
  const Tensor<T>& av = a.tensor();
  const Tensor<T>& bv = b.tensor();
  if (!av.same_shape(bv))
    throw ShapeError("add: shape mismatch " + shape_to_string(av.shape()) + " vs " +
                     shape_to_string(bv.shape()));
  Tensor<T> out(av.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = av[i] + bv[i];
  bool rg = tape.requires_grad(a) || tape.requires_grad(b);
  std::size_t ia = a.id, ib = b.id;
  return tape.push(std::move(out), rg,
                   [ia, ib](Tape<T>& t, std::size_t self) {
                     const Tensor<T>& g = t.out_grad(self);
                     if (t.requires_grad({&t, ia})) {
                       Tensor<T>& ga = t.grad_buffer(ia);
                       for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i];
                     }
                     if (t.requires_grad({&t, ib})) {
                       Tensor<T>& gb = t.grad_buffer(ib);
                       for (std::size_t i = 0; i < g.numel(); ++i) gb[i] += g[i];
                     }
                   },
                   "add");
}

/// a + b where b's shape is a suffix of a's shape (b is tiled over the
/// leading dimensions). Backward sums the broadcast dimensions into b.
template <typename T>
Value<T> add_broadcast(const Value<T>& a, const Value<T>& b) {
  Tape<T>& tape = detail::same_tape(a, b, "add_broadcast");
  const Tensor<T>& av = a.tensor();
  const Tensor<T>& bv = b.tensor();
  const auto& ash = av.shape();
  const auto& bsh = bv.shape();
  if (bsh.size() > ash.size() ||
      !std::equal(bsh.begin(), bsh.end(), ash.end() - bsh.size()))
    throw ShapeError("add_broadcast: " + shape_to_string(bsh) +
                     " is not a suffix of " + shape_to_string(ash));
  std::size_t inner = bv.numel();
  std::size_t outer = inner == 0 ? 0 : av.numel() / inner;
  Tensor<T> out(ash);
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t j = 0; j < inner; ++j)
      out[o * inner + j] = av[o * inner + j] + bv[j];
  bool rg = tape.requires_grad(a) || tape.requires_grad(b);
  std::size_t ia = a.id, ib = b.id;
  return tape.push(std::move(out), rg,
                   [ia, ib, outer, inner](Tape<T>& t, std::size_t self) {
                     const Tensor<T>& g = t.out_grad(self);
                     if (t.requires_grad({&t, ia})) {
                       Tensor<T>& ga = t.grad_buffer(ia);
                       for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i];
                     }
                     if (t.requires_grad({&t, ib})) {
                       Tensor<T>& gb = t.grad_buffer(ib);
                       for (std::size_t o = 0; o < outer; ++o)
                         for (std::size_t j = 0; j < inner; ++j)
                           gb[j] += g[o * inner + j];
                     }
                   },
                   "add_broadcast");
}

template <typename T>
Value<T> mul(const Value<T>& a, const Value<T>& b) {
  Tape<T>& tape = detail::same_tape(a, b, "mul");
  const Tensor<T>& av = a.tensor();
  const Tensor<T>& bv = b.tensor();
  if (!av.same_shape(bv))
    throw ShapeError("mul: shape mismatch " + shape_to_string(av.shape()) + " vs " +
                     shape_to_string(bv.shape()));
  Tensor<T> out(av.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = av[i] * bv[i];
  bool rg = tape.requires_grad(a) || tape.requires_grad(b);
  std::size_t ia = a.id, ib = b.id;
  return tape.push(std::move(out), rg,
                   [ia, ib](Tape<T>& t, std::size_t self) {
                     const Tensor<T>& g = t.out_grad(self);
                     const Tensor<T>& av2 = t.value({&t, ia});
                     const Tensor<T>& bv2 = t.value({&t, ib});
                     if (t.requires_grad({&t, ia})) {
                       Tensor<T>& ga = t.grad_buffer(ia);
                       for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * bv2[i];
                     }
                     if (t.requires_grad({&t, ib})) {
                       Tensor<T>& gb = t.grad_buffer(ib);
                       for (std::size_t i = 0; i < g.numel(); ++i) gb[i] += g[i] * av2[i];
                     }
                   },
                   "mul");
}

template <typename T>
Value<T> scale(const Value<T>& a, T factor) {
  Tape<T>& tape = *a.tape;
  const Tensor<T>& av = a.tensor();
  Tensor<T> out(av.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = av[i] * factor;
  std::size_t ia = a.id;
  return tape.push(std::move(out), tape.requires_grad(a),
                   [ia, factor](Tape<T>& t, std::size_t self) {
                     const Tensor<T>& g = t.out_grad(self);
                     Tensor<T>& ga = t.grad_buffer(ia);
                     for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * factor;
                   },
                   "scale");
}

// ---------------------------------------------------------------------------
// linear algebra / data movement
// ---------------------------------------------------------------------------

/// Matrix product on the trailing two axes; leading (batch) dimensions must
/// match exactly. Backward distributes via transposed products.
template <typename T>
Value<T> matmul(const Value<T>& a, const Value<T>& b) {
  Tape<T>& tape = detail::same_tape(a, b, "matmul");
  const Tensor<T>& av = a.tensor();
  const Tensor<T>& bv = b.tensor();
  const auto& ash = av.shape();
  const auto& bsh = bv.shape();
  bool ok = ash.size() >= 2 && bsh.size() == ash.size() &&
            std::equal(ash.begin(), ash.end() - 2, bsh.begin()) &&
            ash[ash.size() - 1] == bsh[bsh.size() - 2];
  if (!ok)
    throw ShapeError("matmul: incompatible shapes " + shape_to_string(ash) + " and " +
                     shape_to_string(bsh));
  std::size_t m = ash[ash.size() - 2];
  std::size_t k = ash[ash.size() - 1];
  std::size_t n = bsh[bsh.size() - 1];
  std::size_t batch = 1;
  for (std::size_t i = 0; i + 2 < ash.size(); ++i) batch *= ash[i];
  std::vector<std::size_t> osh(ash.begin(), ash.end() - 1);
  osh.push_back(n);
  Tensor<T> out(osh);
  for (std::size_t s = 0; s < batch; ++s)
    detail::gemm_acc(av.data() + s * m * k, bv.data() + s * k * n,
                     out.data() + s * m * n, m, k, n);
  bool rg = tape.requires_grad(a) || tape.requires_grad(b);
  std::size_t ia = a.id, ib = b.id;
  return tape.push(std::move(out), rg,
                   [ia, ib, m, k, n, batch](Tape<T>& t, std::size_t self) {
                     const Tensor<T>& g = t.out_grad(self);
                     const Tensor<T>& av2 = t.value({&t, ia});
                     const Tensor<T>& bv2 = t.value({&t, ib});
                     if (t.requires_grad({&t, ia})) {
                       Tensor<T>& ga = t.grad_buffer(ia);
                       for (std::size_t s = 0; s < batch; ++s)
                         detail::gemm_acc_nt(g.data() + s * m * n, bv2.data() + s * k * n,
                                             ga.data() + s * m * k, m, k, n);
                     }
                     if (t.requires_grad({&t, ib})) {
                       Tensor<T>& gb = t.grad_buffer(ib);
                       for (std::size_t s = 0; s < batch; ++s)
                         detail::gemm_acc_tn(av2.data() + s * m * k, g.data() + s * m * n,
                                             gb.data() + s * k * n, m, k, n);
                     }
                   },
                   "matmul");
}

template <typename T>
Value<T> transpose_last2(const Value<T>& a) {
  Tape<T>& tape = *a.tape;
  const Tensor<T>& av = a.tensor();
  const auto& ash = av.shape();
  if (ash.size() < 2) throw ShapeError("transpose_last2: needs rank >= 2");
  std::size_t m = ash[ash.size() - 2];
  std::size_t n = ash[ash.size() - 1];
  std::size_t batch = av.numel() / std::max<std::size_t>(m * n, 1);
  std::vector<std::size_t> osh(ash);
  std::swap(osh[osh.size() - 2], osh[osh.size() - 1]);
  Tensor<T> out(osh);
  for (std::size_t s = 0; s < batch; ++s) {
    const T* src = av.data() + s * m * n;
    T* dst = out.data() + s * m * n;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) dst[j * m + i] = src[i * n + j];
  }
  std::size_t ia = a.id;
  return tape.push(std::move(out), tape.requires_grad(a),
                   [ia, m, n, batch](Tape<T>& t, std::size_t self) {
                     const Tensor<T>& g = t.out_grad(self);
                     Tensor<T>& ga = t.grad_buffer(ia);
                     for (std::size_t s = 0; s < batch; ++s) {
                       const T* src = g.data() + s * m * n;
                       T* dst = ga.data() + s * m * n;
                       for (std::size_t j = 0; j < n; ++j)
                         for (std::size_t i = 0; i < m; ++i)
                           dst[i * n + j] += src[j * m + i];
                     }
                   },
                   "transpose_last2");
}

template <typename T>
Value<T> reshape(const Value<T>& a, std::vector<std::size_t> shape) {
  Tape<T>& tape = *a.tape;
  const Tensor<T>& av = a.tensor();
  if (Tensor<T>::product(shape) != av.numel())
    throw ShapeError("reshape: cannot view " + shape_to_string(av.shape()) + " as " +
                     shape_to_string(shape));
  std::vector<T> data(av.data(), av.data() + av.numel());
  Tensor<T> out(std::move(shape), std::move(data));
  std::size_t ia = a.id;
  return tape.push(std::move(out), tape.requires_grad(a),
                   [ia](Tape<T>& t, std::size_t self) {
                     const Tensor<T>& g = t.out_grad(self);
                     Tensor<T>& ga = t.grad_buffer(ia);
                     for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i];
                   },
                   "reshape");
}

/// Axis permutation (materialized copy). Backward applies the inverse
/// permutation to the incoming gradient.
template <typename T>
Value<T> permute(const Value<T>& a, const std::vector<std::size_t>& axes) {
  Tape<T>& tape = *a.tape;
  const Tensor<T>& av = a.tensor();
  const auto& ash = av.shape();
  std::size_t r = ash.size();
  if (axes.size() != r) throw ShapeError("permute: axes rank mismatch");
  std::vector<bool> seen(r, false);
  for (std::size_t ax : axes) {
    if (ax >= r || seen[ax]) throw ShapeError("permute: invalid axis list");
    seen[ax] = true;
  }
  std::vector<std::size_t> osh(r);
  for (std::size_t i = 0; i < r; ++i) osh[i] = ash[axes[i]];
  auto in_strides = detail::strides_of(ash);
  auto out_strides = detail::strides_of(osh);
  Tensor<T> out(osh);
  std::size_t total = av.numel();
  std::vector<std::size_t> coord(r, 0);
  for (std::size_t idx = 0; idx < total; ++idx) {
    std::size_t rem = idx;
    std::size_t src = 0;
    for (std::size_t i = 0; i < r; ++i) {
      std::size_t c = rem / out_strides[i];
      rem %= out_strides[i];
      src += c * in_strides[axes[i]];
    }
    out[idx] = av[src];
  }
  std::size_t ia = a.id;
  std::vector<std::size_t> axes_copy = axes;
  return tape.push(std::move(out), tape.requires_grad(a),
                   [ia, axes_copy, in_strides, out_strides](Tape<T>& t, std::size_t self) {
                     const Tensor<T>& g = t.out_grad(self);
                     Tensor<T>& ga = t.grad_buffer(ia);
                     std::size_t r = axes_copy.size();
                     for (std::size_t idx = 0; idx < g.numel(); ++idx) {
                       std::size_t rem = idx;
                       std::size_t src = 0;
                       for (std::size_t i = 0; i < r; ++i) {
                         std::size_t c = rem / out_strides[i];
                         rem %= out_strides[i];
                         src += c * in_strides[axes_copy[i]];
                       }
                       ga[src] += g[idx];
                     }
                   },
                   "permute");
}

template <typename T>
Value<T> slice(const Value<T>& a, std::size_t axis, std::size_t start, std::size_t len) {
  Tape<T>& tape = *a.tape;
  const Tensor<T>& av = a.tensor();
  const auto& ash = av.shape();
  if (axis >= ash.size()) throw IndexError("slice: axis out of range");
  if (start + len > ash[axis])
    throw IndexError("slice: range [" + std::to_string(start) + ", " +
                     std::to_string(start + len) + ") exceeds dim " +
                     std::to_string(ash[axis]));
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= ash[i];
  for (std::size_t i = axis + 1; i < ash.size(); ++i) inner *= ash[i];
  std::vector<std::size_t> osh(ash);
  osh[axis] = len;
  Tensor<T> out(osh);
  std::size_t d = ash[axis];
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t s = 0; s < len; ++s)
      std::copy_n(av.data() + (o * d + start + s) * inner, inner,
                  out.data() + (o * len + s) * inner);
  std::size_t ia = a.id;
  return tape.push(std::move(out), tape.requires_grad(a),
                   [ia, axis, start, len, outer, inner, d](Tape<T>& t, std::size_t self) {
                     (void)axis;
                     const Tensor<T>& g = t.out_grad(self);
                     Tensor<T>& ga = t.grad_buffer(ia);
                     for (std::size_t o = 0; o < outer; ++o)
                       for (std::size_t s = 0; s < len; ++s) {
                         const T* src = g.data() + (o * len + s) * inner;
                         T* dst = ga.data() + (o * d + start + s) * inner;
                         for (std::size_t j = 0; j < inner; ++j) dst[j] += src[j];
                       }
                   },
                   "slice");
}

template <typename T>
Value<T> concat(const std::vector<Value<T>>& parts, std::size_t axis) {
  if (parts.empty()) throw ContractError("concat: no operands");
  Tape<T>& tape = *parts[0].tape;
  const auto& ref = parts[0].tensor().shape();
  if (axis >= ref.size()) throw IndexError("concat: axis out of range");
  std::size_t total_axis = 0;
  bool rg = false;
  for (const auto& p : parts) {
    detail::same_tape(parts[0], p, "concat");
    const auto& sh = p.tensor().shape();
    if (sh.size() != ref.size())
      throw ShapeError("concat: rank mismatch");
    for (std::size_t i = 0; i < sh.size(); ++i)
      if (i != axis && sh[i] != ref[i])
        throw ShapeError("concat: shape mismatch " + shape_to_string(sh) + " vs " +
                         shape_to_string(ref));
    total_axis += sh[axis];
    rg = rg || tape.requires_grad(p);
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= ref[i];
  for (std::size_t i = axis + 1; i < ref.size(); ++i) inner *= ref[i];
  std::vector<std::size_t> osh(ref);
  osh[axis] = total_axis;
  Tensor<T> out(osh);
  std::size_t offset = 0;
  std::vector<std::size_t> ids, lens;
  for (const auto& p : parts) {
    const Tensor<T>& pv = p.tensor();
    std::size_t d = pv.shape()[axis];
    for (std::size_t o = 0; o < outer; ++o)
      std::copy_n(pv.data() + o * d * inner, d * inner,
                  out.data() + (o * total_axis + offset) * inner);
    ids.push_back(p.id);
    lens.push_back(d);
    offset += d;
  }
  return tape.push(std::move(out), rg,
                   [ids, lens, outer, inner, total_axis](Tape<T>& t, std::size_t self) {
                     const Tensor<T>& g = t.out_grad(self);
                     std::size_t offset = 0;
                     for (std::size_t pi = 0; pi < ids.size(); ++pi) {
                       std::size_t d = lens[pi];
                       if (t.requires_grad({&t, ids[pi]})) {
                         Tensor<T>& ga = t.grad_buffer(ids[pi]);
                         for (std::size_t o = 0; o < outer; ++o) {
                           const T* src = g.data() + (o * total_axis + offset) * inner;
                           T* dst = ga.data() + o * d * inner;
                           for (std::size_t j = 0; j < d * inner; ++j) dst[j] += src[j];
                         }
                       }
                       offset += d;
                     }
                   },
                   "concat");
}

/// Row gather from an embedding table [V, d]; `ids` are laid out in
/// `id_shape` and the result has shape id_shape + [d].
template <typename T>
Value<T> embed(const Value<T>& table, const std::vector<std::int32_t>& ids,
               std::vector<std::size_t> id_shape) {
  Tape<T>& tape = *table.tape;
  const Tensor<T>& tv = table.tensor();
  if (tv.rank() != 2) throw ShapeError("embed: table must be rank 2");
  if (Tensor<T>::product(id_shape) != ids.size())
    throw ShapeError("embed: id count does not match id_shape");
  std::size_t v = tv.dim(0), d = tv.dim(1);
  for (std::int32_t id : ids)
    if (id < 0 || static_cast<std::size_t>(id) >= v)
      throw IndexError("embed: token id " + std::to_string(id) +
                       " outside vocabulary of size " + std::to_string(v));
  std::vector<std::size_t> osh(id_shape);
  osh.push_back(d);
  Tensor<T> out(osh);
  for (std::size_t i = 0; i < ids.size(); ++i)
    std::copy_n(tv.data() + static_cast<std::size_t>(ids[i]) * d, d, out.data() + i * d);
  std::size_t it = table.id;
  std::vector<std::int32_t> ids_copy = ids;
  return tape.push(std::move(out), tape.requires_grad(table),
                   [it, ids_copy, d](Tape<T>& t, std::size_t self) {
                     const Tensor<T>& g = t.out_grad(self);
                     Tensor<T>& gt = t.grad_buffer(it);
                     for (std::size_t i = 0; i < ids_copy.size(); ++i) {
                       const T* src = g.data() + i * d;
                       T* dst = gt.data() + static_cast<std::size_t>(ids_copy[i]) * d;
                       for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
                     }
                   },
                   "embed");
}

// ---------------------------------------------------------------------------
// nonlinearities and normalization
// ---------------------------------------------------------------------------

/// Applies the scalar activation per element; backward uses the scalar
/// derivative at the saved inputs.
template <typename T>
Value<T> elementwise(const Value<T>& a, ActivationKind kind) {
  Tape<T>& tape = *a.tape;
  const Tensor<T>& av = a.tensor();
  Tensor<T> out(av.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = activation_value(kind, av[i]);
  std::size_t ia = a.id;
  return tape.push(std::move(out), tape.requires_grad(a),
                   [ia, kind](Tape<T>& t, std::size_t self) {
                     const Tensor<T>& g = t.out_grad(self);
                     const Tensor<T>& x = t.value({&t, ia});
                     Tensor<T>& ga = t.grad_buffer(ia);
                     for (std::size_t i = 0; i < g.numel(); ++i)
                       ga[i] += g[i] * activation_derivative(kind, x[i]);
                   },
                   "elementwise");
}

/// Softmax over the last axis, stabilized by max subtraction.
template <typename T>
Value<T> softmax_last(const Value<T>& a) {
  Tape<T>& tape = *a.tape;
  const Tensor<T>& av = a.tensor();
  if (av.rank() == 0) throw ShapeError("softmax_last: needs rank >= 1");
  std::size_t d = av.shape().back();
  std::size_t rows = d == 0 ? 0 : av.numel() / d;
  Tensor<T> out(av.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* x = av.data() + r * d;
    T* y = out.data() + r * d;
    T mx = x[0];
    for (std::size_t j = 1; j < d; ++j) mx = std::max(mx, x[j]);
    T sum = T(0);
    for (std::size_t j = 0; j < d; ++j) {
      y[j] = std::exp(x[j] - mx);
      sum += y[j];
    }
    for (std::size_t j = 0; j < d; ++j) y[j] /= sum;
  }
  std::size_t ia = a.id;
  return tape.push(std::move(out), tape.requires_grad(a),
                   [ia, d](Tape<T>& t, std::size_t self) {
                     const Tensor<T>& g = t.out_grad(self);
                     const Tensor<T>& y = t.value({&t, self});
                     Tensor<T>& ga = t.grad_buffer(ia);
                     std::size_t rows = d == 0 ? 0 : g.numel() / d;
                     for (std::size_t r = 0; r < rows; ++r) {
                       const T* gr = g.data() + r * d;
                       const T* yr = y.data() + r * d;
                       T* gar = ga.data() + r * d;
                       T dot = T(0);
                       for (std::size_t j = 0; j < d; ++j) dot += gr[j] * yr[j];
                       for (std::size_t j = 0; j < d; ++j)
                         gar[j] += yr[j] * (gr[j] - dot);
                     }
                   },
                   "softmax_last");
}

/// Layer normalization over the last axis with learned gain/bias vectors.
template <typename T>
Value<T> layer_norm(const Value<T>& a, const Value<T>& gain, const Value<T>& bias,
                    T eps) {
  Tape<T>& tape = detail::same_tape(a, gain, "layer_norm");
  detail::same_tape(a, bias, "layer_norm");
  if (!(eps > T(0))) throw ConfigError("layer_norm: eps must be > 0");
  const Tensor<T>& av = a.tensor();
  const Tensor<T>& gv = gain.tensor();
  const Tensor<T>& bv = bias.tensor();
  if (av.rank() == 0) throw ShapeError("layer_norm: needs rank >= 1");
  std::size_t d = av.shape().back();
  if (gv.rank() != 1 || bv.rank() != 1 || gv.dim(0) != d || bv.dim(0) != d)
    throw ShapeError("layer_norm: gain/bias must be rank-1 of size " + std::to_string(d));
  std::size_t rows = d == 0 ? 0 : av.numel() / d;
  Tensor<T> out(av.shape());
  Tensor<T> xhat(av.shape());
  Tensor<T> inv_std({rows});
  for (std::size_t r = 0; r < rows; ++r) {
    const T* x = av.data() + r * d;
    T mean = T(0);
    for (std::size_t j = 0; j < d; ++j) mean += x[j];
    mean /= static_cast<T>(d);
    T var = T(0);
    for (std::size_t j = 0; j < d; ++j) {
      T c = x[j] - mean;
      var += c * c;
    }
    var /= static_cast<T>(d);
    T inv = T(1) / std::sqrt(var + eps);
    inv_std[r] = inv;
    for (std::size_t j = 0; j < d; ++j) {
      T xh = (x[j] - mean) * inv;
      xhat[r * d + j] = xh;
      out[r * d + j] = gv[j] * xh + bv[j];
    }
  }
  bool rg = tape.requires_grad(a) || tape.requires_grad(gain) || tape.requires_grad(bias);
  std::size_t ia = a.id, ig = gain.id, ib = bias.id;
  return tape.push(
      std::move(out), rg,
      [ia, ig, ib, d, xhat, inv_std](Tape<T>& t, std::size_t self) {
        const Tensor<T>& g = t.out_grad(self);
        const Tensor<T>& gv2 = t.value({&t, ig});
        std::size_t rows = d == 0 ? 0 : g.numel() / d;
        if (t.requires_grad({&t, ig})) {
          Tensor<T>& gg = t.grad_buffer(ig);
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < d; ++j)
              gg[j] += g[r * d + j] * xhat[r * d + j];
        }
        if (t.requires_grad({&t, ib})) {
          Tensor<T>& gb = t.grad_buffer(ib);
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < d; ++j) gb[j] += g[r * d + j];
        }
        if (t.requires_grad({&t, ia})) {
          Tensor<T>& ga = t.grad_buffer(ia);
          for (std::size_t r = 0; r < rows; ++r) {
            T mean_dx = T(0), mean_dxx = T(0);
            for (std::size_t j = 0; j < d; ++j) {
              T dxh = g[r * d + j] * gv2[j];
              mean_dx += dxh;
              mean_dxx += dxh * xhat[r * d + j];
            }
            mean_dx /= static_cast<T>(d);
            mean_dxx /= static_cast<T>(d);
            for (std::size_t j = 0; j < d; ++j) {
              T dxh = g[r * d + j] * gv2[j];
              ga[r * d + j] +=
                  inv_std[r] * (dxh - mean_dx - xhat[r * d + j] * mean_dxx);
            }
          }
        }
      },
      "layer_norm");
}

// ---------------------------------------------------------------------------
// reductions and loss
// ---------------------------------------------------------------------------

template <typename T>
Value<T> sum_all(const Value<T>& a) {
  Tape<T>& tape = *a.tape;
  const Tensor<T>& av = a.tensor();
  T s = T(0);
  for (std::size_t i = 0; i < av.numel(); ++i) s += av[i];
  std::size_t ia = a.id;
  return tape.push(Tensor<T>::scalar(s), tape.requires_grad(a),
                   [ia](Tape<T>& t, std::size_t self) {
                     T g0 = t.out_grad(self)[0];
                     Tensor<T>& ga = t.grad_buffer(ia);
                     for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] += g0;
                   },
                   "sum_all");
}

template <typename T>
Value<T> mean_all(const Value<T>& a) {
  Tape<T>& tape = *a.tape;
  const Tensor<T>& av = a.tensor();
  std::size_t n = av.numel();
  if (n == 0) throw ShapeError("mean_all: empty tensor");
  T s = T(0);
  for (std::size_t i = 0; i < n; ++i) s += av[i];
  s /= static_cast<T>(n);
  std::size_t ia = a.id;
  return tape.push(Tensor<T>::scalar(s), tape.requires_grad(a),
                   [ia, n](Tape<T>& t, std::size_t self) {
                     T g0 = t.out_grad(self)[0] / static_cast<T>(n);
                     Tensor<T>& ga = t.grad_buffer(ia);
                     for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] += g0;
                   },
                   "mean_all");
}

/// Label-smoothed cross entropy over logits [N, V] against integer targets.
/// Target distribution per row: (1 - eps) * onehot + eps / V. Rows whose
/// target equals pad_id are excluded from the mean; if every row is padding
/// the loss is 0.
template <typename T>
Value<T> cross_entropy_smoothed(const Value<T>& logits,
                                const std::vector<std::int32_t>& targets,
                                double epsilon, std::int32_t pad_id) {
  Tape<T>& tape = *logits.tape;
  const Tensor<T>& lv = logits.tensor();
  if (lv.rank() != 2) throw ShapeError("cross_entropy_smoothed: logits must be [N, V]");
  if (!(epsilon >= 0.0 && epsilon < 1.0))
    throw ConfigError("cross_entropy_smoothed: epsilon must be in [0, 1)");
  std::size_t n = lv.dim(0), v = lv.dim(1);
  if (targets.size() != n)
    throw ShapeError("cross_entropy_smoothed: " + std::to_string(targets.size()) +
                     " targets for " + std::to_string(n) + " rows");
  for (std::int32_t tgt : targets)
    if (tgt != pad_id && (tgt < 0 || static_cast<std::size_t>(tgt) >= v))
      throw IndexError("cross_entropy_smoothed: target id " + std::to_string(tgt) +
                       " outside [0, " + std::to_string(v) + ")");
  Tensor<T> probs({n, v});
  std::size_t n_active = 0;
  double total = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const T* x = lv.data() + r * v;
    T* p = probs.data() + r * v;
    T mx = x[0];
    for (std::size_t j = 1; j < v; ++j) mx = std::max(mx, x[j]);
    T sum = T(0);
    for (std::size_t j = 0; j < v; ++j) {
      p[j] = std::exp(x[j] - mx);
      sum += p[j];
    }
    for (std::size_t j = 0; j < v; ++j) p[j] /= sum;
    if (targets[r] == pad_id) continue;
    ++n_active;
    double lse = static_cast<double>(mx) + std::log(static_cast<double>(sum));
    double sum_x = 0.0;
    for (std::size_t j = 0; j < v; ++j) sum_x += static_cast<double>(x[j]);
    double xt = static_cast<double>(x[static_cast<std::size_t>(targets[r])]);
    total += lse - (1.0 - epsilon) * xt - (epsilon / static_cast<double>(v)) * sum_x;
  }
  T loss = n_active == 0 ? T(0) : static_cast<T>(total / static_cast<double>(n_active));
  std::size_t il = logits.id;
  std::vector<std::int32_t> tgt_copy = targets;
  return tape.push(
      Tensor<T>::scalar(loss), tape.requires_grad(logits),
      [il, tgt_copy, epsilon, pad_id, probs, n_active, v](Tape<T>& t, std::size_t self) {
        if (n_active == 0) return;
        T g0 = t.out_grad(self)[0];
        Tensor<T>& gl = t.grad_buffer(il);
        T inv = g0 / static_cast<T>(n_active);
        T eps_v = static_cast<T>(epsilon / static_cast<double>(v));
        T one_m = static_cast<T>(1.0 - epsilon);
        for (std::size_t r = 0; r < tgt_copy.size(); ++r) {
          if (tgt_copy[r] == pad_id) continue;
          const T* p = probs.data() + r * v;
          T* g = gl.data() + r * v;
          for (std::size_t j = 0; j < v; ++j) g[j] += inv * (p[j] - eps_v);
          g[static_cast<std::size_t>(tgt_copy[r])] -= inv * one_m;
        }
      },
      "cross_entropy_smoothed");
}

// ---------------------------------------------------------------------------
// stochastic layers
// ---------------------------------------------------------------------------

/// Adds i.i.d. N(0, sigma^2) noise from the given stream. sigma = 0 returns
/// the input value unchanged (bit-identical, no node recorded, no draws
/// consumed). The noise is a constant in backward.
template <typename T>
Value<T> gaussian_noise(const Value<T>& a, double sigma, RngStream& rng) {
  if (sigma < 0.0) throw ConfigError("gaussian_noise: sigma must be >= 0");
  if (sigma == 0.0) return a;
  Tape<T>& tape = *a.tape;
  const Tensor<T>& av = a.tensor();
  Tensor<T> out(av.shape());
  Tensor<T> drawn(av.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) {
    T z = static_cast<T>(sigma * rng.normal());
    drawn[i] = z;
    out[i] = av[i] + z;
  }
  if (tape.capture_stochastic) tape.noise_draws.push_back(drawn);
  std::size_t ia = a.id;
  return tape.push(std::move(out), tape.requires_grad(a),
                   [ia](Tape<T>& t, std::size_t self) {
                     const Tensor<T>& g = t.out_grad(self);
                     Tensor<T>& ga = t.grad_buffer(ia);
                     for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i];
                   },
                   "gaussian_noise");
}

/// Inverted dropout: in training mode each element is zeroed with
/// probability delta and survivors are scaled by 1/(1-delta). Eval mode or
/// delta = 0 is a bit-exact identity (no node, no draws). Backward applies
/// the same mask and scale.
template <typename T>
Value<T> dropout(const Value<T>& a, double delta, bool training, RngStream& rng) {
  if (!(delta >= 0.0 && delta < 1.0))
    throw ConfigError("dropout: delta must be in [0, 1), got " + std::to_string(delta));
  if (!training || delta == 0.0) return a;
  Tape<T>& tape = *a.tape;
  const Tensor<T>& av = a.tensor();
  T keep_scale = static_cast<T>(1.0 / (1.0 - delta));
  Tensor<T> mask(av.shape());
  Tensor<T> out(av.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) {
    mask[i] = rng.uniform() < delta ? T(0) : keep_scale;
    out[i] = av[i] * mask[i];
  }
  if (tape.capture_stochastic) tape.dropout_masks.push_back(mask);
  std::size_t ia = a.id;
  return tape.push(std::move(out), tape.requires_grad(a),
                   [ia, mask](Tape<T>& t, std::size_t self) {
                     const Tensor<T>& g = t.out_grad(self);
                     Tensor<T>& ga = t.grad_buffer(ia);
                     for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * mask[i];
                   },
                   "dropout");
}

}  // namespace seqdesc
