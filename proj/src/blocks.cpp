// Copyright 2026 the dksan authors
// SPDX-License-Identifier: Apache-2.0

#include "dksan/blocks.hpp"

#include "dksan/nn_ops.hpp"
#include "dksan/op_registry.hpp"

namespace dksan {

template <typename T>
void ResBlock<T>::init(int channels, const std::string& name, Rng& rng) {
  conv1.init(Conv2dSpec::same(channels, channels, 3), name + ".conv1", rng);
  conv2.init(Conv2dSpec::same(channels, channels, 3), name + ".conv2", rng);
  // residual branches start quiet: scale the pre-addition conv down
  conv2.weight.value = dksan::scale(conv2.weight.value, T(0.1));
}

template <typename T>
Var ResBlock<T>::forward(Tape<T>& tp, Var x) {
  Var h = conv2.forward(tp, leaky_relu(tp, conv1.forward(tp, x), T(0.1)));
  return add(tp, x, h);
}

template <typename T>
void ResBlock<T>::collect(std::vector<Parameter<T>*>& out) {
  conv1.collect(out);
  conv2.collect(out);
}

template <typename T>
void RCAB<T>::init(int channels, bool with_ca, const std::string& name, Rng& rng) {
  use_channel_attention = with_ca;
  conv1.init(Conv2dSpec::same(channels, channels, 3), name + ".conv1", rng);
  conv2.init(Conv2dSpec::same(channels, channels, 3), name + ".conv2", rng);
  conv2.weight.value = dksan::scale(conv2.weight.value, T(0.1));
  if (with_ca) {
    const int r = reduction_ratio(channels);
    if (channels % r != 0)
      throw contract_error("RCAB: channels " + std::to_string(channels) +
                           " not divisible by reduction ratio " + std::to_string(r));
    ca_down.init(Conv2dSpec::same(channels, channels / r, 1), name + ".ca.down", rng);
    ca_up.init(Conv2dSpec::same(channels / r, channels, 1), name + ".ca.up", rng);
  }
}

template <typename T>
Var RCAB<T>::forward(Tape<T>& tp, Var x) {
  Var body = conv2.forward(tp, leaky_relu(tp, conv1.forward(tp, x), T(0.1)));
  if (use_channel_attention) {
    Var d = global_avg_pool(tp, body);
    Var gate = sigmoid(
        tp, ca_up.forward(tp, leaky_relu(tp, ca_down.forward(tp, d), T(0.1))));
    body = channel_scale(tp, body, gate);
  }
  return add(tp, x, body);
}

template <typename T>
void RCAB<T>::collect(std::vector<Parameter<T>*>& out) {
  conv1.collect(out);
  conv2.collect(out);
  if (use_channel_attention) {
    ca_down.collect(out);
    ca_up.collect(out);
  }
}

template <typename T>
void DKSA<T>::init(int c, bool light_variant, bool single_map_variant, int scope,
                   const std::string& name, Rng& rng) {
  channels = c;
  light = light_variant;
  single_map = single_map_variant;
  const int map_channels = single_map ? 1 : c;
  if (light) {
    dkc.resize(1);
    dkc[0].init(Conv2dSpec::same(c, map_channels, 3), scope, name + ".dkc.00", rng);
  } else {
    pre.init(Conv2dSpec::same(c, c, 3), name + ".pre", rng);
    dkc.resize(2);
    dkc[0].init(Conv2dSpec::same(c, c, 3), scope, name + ".dkc.00", rng);
    dkc[1].init(Conv2dSpec::same(c, map_channels, 3), scope, name + ".dkc.01", rng);
  }
}

template <typename T>
Var DKSA<T>::attention(Tape<T>& tp, Var x) {
  Var h = x;
  if (!light) h = leaky_relu(tp, pre.forward(tp, h), T(0.1));
  for (size_t i = 0; i < dkc.size(); ++i) {
    h = dkc[i].forward(tp, h);
    if (i + 1 < dkc.size()) h = leaky_relu(tp, h, T(0.1));
  }
  return sigmoid(tp, h);
}

template <typename T>
Var DKSA<T>::apply_gate(Tape<T>& tp, Var x, Var gate) {
  if (tp.value(gate).c() == 1 && tp.value(x).c() != 1)
    gate = tile_channels(tp, gate, tp.value(x).c());
  return mul(tp, x, gate);
}

template <typename T>
Var DKSA<T>::forward(Tape<T>& tp, Var x) {
  return apply_gate(tp, x, attention(tp, x));
}

template <typename T>
void DKSA<T>::collect(std::vector<Parameter<T>*>& out) {
  if (!light) pre.collect(out);
  for (auto& l : dkc) l.collect(out);
}

template <typename T>
size_t DKSA<T>::param_count() const {
  std::vector<Parameter<T>*> ps;
  const_cast<DKSA<T>*>(this)->collect(ps);
  size_t n = 0;
  for (auto* p : ps) n += static_cast<size_t>(p->value.numel());
  return n;
}

DKSAN_REGISTER_OP(resblock);
DKSAN_REGISTER_OP(rcab);
DKSAN_REGISTER_OP(dksa);
DKSAN_REGISTER_OP(dksa_light);

template struct ResBlock<float>;
template struct ResBlock<double>;
template struct RCAB<float>;
template struct RCAB<double>;
template struct DKSA<float>;
template struct DKSA<double>;

}  // namespace dksan
