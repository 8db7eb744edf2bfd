// Copyright 2026 the dksan authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "dksan/tensor.hpp"

namespace dksan {

/// A learnable tensor: value plus persistent gradient accumulator.
/// `name` is the dotted path used in checkpoints, e.g.
/// "level1.rcab.07.ca.down.weight".
template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;

  Parameter() = default;
  Parameter(std::string name_, Tensor<T> value_)
      : name(std::move(name_)), value(std::move(value_)), grad(value.shape()) {}

  void zero_grad() { grad.fill(T(0)); }
};

/// Handle to a value recorded on a Tape.
struct Var {
  int32_t idx = -1;
  bool valid() const { return idx >= 0; }
};

/// Define-by-run reverse-mode tape.
///
/// Forward ops push their outputs as slots and record a backward closure;
/// backward() replays the closures in exact reverse order, summing upstream
/// gradients into each slot (and into Parameter::grad for leaf parameters),
/// then releases all saved activations. A tape is single use: run forward,
/// run backward once, discard.
template <typename T>
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Record an input value (no producer; gradient is still accumulated
  /// and can be inspected after backward via grad()).
  Var leaf(Tensor<T> v) { return push(std::move(v)); }

  /// Record an op output.
  Var push(Tensor<T> v) {
    if (backward_done_)
      throw contract_error("Tape: forward recording after backward; start a new tape");
    slots_.push_back(Slot{std::move(v), Tensor<T>()});
    slots_.back().grad = Tensor<T>(slots_.back().value.shape());
    return Var{static_cast<int32_t>(slots_.size() - 1)};
  }

  void record(std::function<void()> backward_fn) {
    if (backward_done_)
      throw contract_error("Tape: forward recording after backward; start a new tape");
    nodes_.push_back(std::move(backward_fn));
  }

  const Tensor<T>& value(Var v) const { return slots_.at(v.idx).value; }
  Tensor<T>& grad(Var v) { return slots_.at(v.idx).grad; }
  const Tensor<T>& grad(Var v) const { return slots_.at(v.idx).grad; }

  /// Reverse sweep from a scalar loss. Activations are released afterwards;
  /// calling backward a second time is a contract error.
  void backward(Var loss, T loss_grad = T(1)) {
    if (backward_done_)
      throw contract_error("Tape: backward called twice without a new forward");
    if (value(loss).numel() != 1)
      throw contract_error("Tape: backward needs a scalar loss, got shape " +
                           value(loss).shape().str());
    grad(loss)[0] += loss_grad;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
    for (auto& s : slots_) s.value.release();
    nodes_.clear();
    backward_done_ = true;
  }

  bool backward_done() const { return backward_done_; }
  size_t size() const { return slots_.size(); }

 private:
  struct Slot {
    Tensor<T> value;
    Tensor<T> grad;
  };
  std::vector<Slot> slots_;
  std::vector<std::function<void()>> nodes_;
  bool backward_done_ = false;
};

// ---- elementwise tape ops ----

template <typename T>
Var add(Tape<T>& tp, Var a, Var b) {
  Var out = tp.push(ew_add(tp.value(a), tp.value(b)));
  tp.record([&tp, a, b, out] {
    const Tensor<T>& g = tp.grad(out);
    Tensor<T>& ga = tp.grad(a);
    Tensor<T>& gb = tp.grad(b);
    for (int64_t i = 0; i < g.numel(); ++i) {
      ga[i] += g[i];
      gb[i] += g[i];
    }
  });
  return out;
}

template <typename T>
Var sub(Tape<T>& tp, Var a, Var b) {
  Var out = tp.push(ew_sub(tp.value(a), tp.value(b)));
  tp.record([&tp, a, b, out] {
    const Tensor<T>& g = tp.grad(out);
    Tensor<T>& ga = tp.grad(a);
    Tensor<T>& gb = tp.grad(b);
    for (int64_t i = 0; i < g.numel(); ++i) {
      ga[i] += g[i];
      gb[i] -= g[i];
    }
  });
  return out;
}

template <typename T>
Var mul(Tape<T>& tp, Var a, Var b) {
  Var out = tp.push(ew_mul(tp.value(a), tp.value(b)));
  // save both inputs (copies) for the backward product rule
  Tensor<T> av = tp.value(a);
  Tensor<T> bv = tp.value(b);
  tp.record([&tp, a, b, out, av = std::move(av), bv = std::move(bv)] {
    const Tensor<T>& g = tp.grad(out);
    Tensor<T>& ga = tp.grad(a);
    Tensor<T>& gb = tp.grad(b);
    for (int64_t i = 0; i < g.numel(); ++i) {
      ga[i] += g[i] * bv[i];
      gb[i] += g[i] * av[i];
    }
  });
  return out;
}

template <typename T>
Var scale(Tape<T>& tp, Var a, T s) {
  Var out = tp.push(scale(tp.value(a), s));
  tp.record([&tp, a, out, s] {
    const Tensor<T>& g = tp.grad(out);
    Tensor<T>& ga = tp.grad(a);
    for (int64_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * s;
  });
  return out;
}

/// Elementwise multiply by a constant tensor (no gradient into the constant).
template <typename T>
Var mul_const(Tape<T>& tp, Var a, const Tensor<T>& k) {
  Var out = tp.push(ew_mul(tp.value(a), k));
  Tensor<T> kv = k;
  tp.record([&tp, a, out, kv = std::move(kv)] {
    const Tensor<T>& g = tp.grad(out);
    Tensor<T>& ga = tp.grad(a);
    for (int64_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * kv[i];
  });
  return out;
}

/// Reduce to a (1,1,1,1) scalar; ascending flat-index accumulation.
template <typename T>
Var sum(Tape<T>& tp, Var a) {
  Tensor<T> s(Shape{1, 1, 1, 1});
  s[0] = sum(tp.value(a));
  ensure_finite(s, "sum");
  Var out = tp.push(std::move(s));
  tp.record([&tp, a, out] {
    const T g = tp.grad(out)[0];
    Tensor<T>& ga = tp.grad(a);
    for (int64_t i = 0; i < ga.numel(); ++i) ga[i] += g;
  });
  return out;
}

}  // namespace dksan
