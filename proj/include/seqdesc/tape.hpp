// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "seqdesc/errors.hpp"
#include "seqdesc/tensor.hpp"

namespace seqdesc {

template <typename T>
class Tape;

/// Handle to a node on a tape. Cheap to copy; valid as long as the tape lives.
template <typename T>
struct Value {
  Tape<T>* tape = nullptr;
  std::size_t id = static_cast<std::size_t>(-1);

  bool valid() const { return tape != nullptr; }
  const Tensor<T>& tensor() const;
  const std::vector<std::size_t>& shape() const { return tensor().shape(); }
};

/// Reverse-mode differentiation tape. Records one node per primitive
/// application in topological order; backward() may run exactly once.
template <typename T>
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Scan every forward output for NaN/Inf (test/debug mode).
  bool check_finite = false;

  /// When set, dropout masks and noise draws are copied aside in application
  /// order so tests can compare them across configurations.
  bool capture_stochastic = false;
  std::vector<Tensor<T>> dropout_masks;
  std::vector<Tensor<T>> noise_draws;

  Value<T> leaf(Tensor<T> v, bool requires_grad = false) {
    return push(std::move(v), requires_grad, nullptr, "leaf");
  }

  Value<T> constant(Tensor<T> v) { return leaf(std::move(v), false); }

  const Tensor<T>& value(const Value<T>& v) const { return nodes_[v.id].value; }

  bool requires_grad(const Value<T>& v) const { return nodes_[v.id].requires_grad; }

  std::size_t size() const { return nodes_.size(); }
  bool backward_done() const { return backward_done_; }

  /// Runs reverse accumulation from a scalar loss. A second call on the same
  /// tape is rejected (single-use contract).
  void backward(const Value<T>& loss) {
    if (backward_done_)
      throw ContractError("Tape::backward: tape already consumed by a previous backward");
    if (loss.tape != this) throw ContractError("Tape::backward: loss from another tape");
    if (nodes_[loss.id].value.numel() != 1)
      throw ContractError("Tape::backward: loss must be scalar, got shape " +
                          shape_to_string(nodes_[loss.id].value.shape()));
    backward_done_ = true;
    grad_buffer(loss.id)[0] = T(1);
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.requires_grad && n.back && n.grad.numel() > 0) n.back(*this, i);
    }
  }

  /// Gradient of a node; zeros if the node never received any contribution
  /// (e.g. a leaf disconnected from the loss).
  Tensor<T> grad(const Value<T>& v) const {
    const Node& n = nodes_[v.id];
    if (n.grad.numel() != n.value.numel()) return Tensor<T>(n.value.shape());
    return n.grad;
  }

  // --- primitive-implementation interface ---

  using BackFn = std::function<void(Tape&, std::size_t)>;

  /// Records a node. `back` receives the tape and the node's own id and must
  /// accumulate into the inputs' gradient buffers.
  Value<T> push(Tensor<T> out, bool requires_grad, BackFn back, const char* op_name) {
    if (check_finite) {
      const T* p = out.data();
      for (std::size_t i = 0; i < out.numel(); ++i) {
        if (!std::isfinite(static_cast<double>(p[i])))
          throw NumericError(std::string("non-finite value produced by op '") +
                             op_name + "'");
      }
    }
    Node n;
    n.value = std::move(out);
    n.requires_grad = requires_grad;
    if (requires_grad) n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return Value<T>{this, nodes_.size() - 1};
  }

  /// Zero-initialized gradient buffer, allocated on first touch.
  Tensor<T>& grad_buffer(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.numel() != n.value.numel()) n.grad = Tensor<T>(n.value.shape());
    return n.grad;
  }

  const Tensor<T>& out_grad(std::size_t id) const { return nodes_[id].grad; }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad{std::vector<std::size_t>{0}};  // empty until touched
    bool requires_grad = false;
    BackFn back;
  };

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

template <typename T>
const Tensor<T>& Value<T>::tensor() const {
  return tape->value(*this);
}

}  // namespace seqdesc
