// Copyright 2026 the dksan authors
// SPDX-License-Identifier: Apache-2.0

#include "dksan/gradcheck.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <memory>

#include "dksan/alignment.hpp"
#include "dksan/blocks.hpp"
#include "dksan/loss_metrics.hpp"
#include "dksan/network.hpp"
#include "dksan/nn_ops.hpp"
#include "dksan/op_registry.hpp"

namespace dksan {

namespace {

using D = double;
using Inputs = std::vector<Tensor<D>>;

struct Case {
  double tol = 1e-5;
  double eps = 1e-3;
  std::vector<std::string> input_names;
  Inputs inputs;
  std::function<double(const Inputs&)> eval;          // fresh forward pass
  std::function<Inputs(const Inputs&)> grads;         // analytic, via the tape
};

Tensor<D> rnd(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<D> t(s);
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

/// Values with |v| in [margin, 1]; keeps activation inputs off the kink.
Tensor<D> rnd_margin(Shape s, Rng& rng, double margin) {
  Tensor<D> t(s);
  for (int64_t i = 0; i < t.numel(); ++i)
    t[i] = (rng.unit() < 0.5 ? -1.0 : 1.0) * rng.uniform(margin, 1.0);
  return t;
}

/// Sampling displacements whose fractional part stays in [0.1, 0.9]:
/// with integer base positions, every sample lands at least 0.1 away from
/// the bilinear kinks at the integer lattice.
Tensor<D> jittered_offsets(Shape s, Rng& rng, int max_whole) {
  Tensor<D> t(s);
  for (int64_t i = 0; i < t.numel(); ++i) {
    const double whole = static_cast<double>(rng.below(max_whole + 1));
    const double frac = rng.uniform(0.1, 0.9);
    t[i] = (rng.unit() < 0.5 ? -1.0 : 1.0) * (whole + frac);
  }
  return t;
}

double probe(Tape<D>& tp, Var out, const Tensor<D>& r) {
  Var loss = sum(tp, mul_const(tp, out, r));
  return tp.value(loss)[0];
}

Var probe_var(Tape<D>& tp, Var out, const Tensor<D>& r) {
  return sum(tp, mul_const(tp, out, r));
}

using Builder = std::function<Case()>;

/// Retries seeds until the forward pass keeps every leaky_relu
/// pre-activation at least `margin` away from zero (the finite-difference
/// step must not straddle the kink).
Case with_kink_margin(const std::function<Case(Rng&)>& make, uint64_t base_seed,
                      double margin) {
  for (uint64_t attempt = 0; attempt < 256; ++attempt) {
    Rng rng(base_seed + attempt);
    Case c = make(rng);
    gradcheck_hooks::track_preacts = true;
    gradcheck_hooks::reset();
    (void)c.eval(c.inputs);
    gradcheck_hooks::track_preacts = false;
    if (gradcheck_hooks::min_abs_preact >= margin) return c;
  }
  throw contract_error("gradcheck: no kink-free input found after 256 seeds");
}

// ---- elementwise / structural cases ----

Case case_binary(const char* which) {
  Rng rng(11);
  Case c;
  c.tol = 1e-8;
  const Shape s{1, 2, 3, 4};
  c.input_names = {"a", "b"};
  c.inputs = {rnd(s, rng), rnd(s, rng)};
  const Tensor<D> r = rnd(s, rng, 0.3, 1.0);
  const std::string op = which;
  auto run = [op, r](Tape<D>& tp, const Inputs& in, Var& a, Var& b) {
    a = tp.leaf(in[0]);
    b = tp.leaf(in[1]);
    Var out = op == "ew_add"   ? add(tp, a, b)
              : op == "ew_sub" ? sub(tp, a, b)
                               : mul(tp, a, b);
    return probe_var(tp, out, r);
  };
  c.eval = [run](const Inputs& in) {
    Tape<D> tp;
    Var a, b;
    return tp.value(run(tp, in, a, b))[0];
  };
  c.grads = [run](const Inputs& in) {
    Tape<D> tp;
    Var a, b;
    Var loss = run(tp, in, a, b);
    tp.backward(loss);
    return Inputs{tp.grad(a), tp.grad(b)};
  };
  return c;
}

Case case_scale() {
  Rng rng(12);
  Case c;
  c.tol = 1e-8;
  const Shape s{1, 2, 3, 4};
  c.input_names = {"a"};
  c.inputs = {rnd(s, rng)};
  const Tensor<D> r = rnd(s, rng, 0.3, 1.0);
  auto run = [r](Tape<D>& tp, const Inputs& in, Var& a) {
    a = tp.leaf(in[0]);
    return probe_var(tp, scale(tp, a, D(-1.7)), r);
  };
  c.eval = [run](const Inputs& in) {
    Tape<D> tp;
    Var a;
    return tp.value(run(tp, in, a))[0];
  };
  c.grads = [run](const Inputs& in) {
    Tape<D> tp;
    Var a;
    Var loss = run(tp, in, a);
    tp.backward(loss);
    return Inputs{tp.grad(a)};
  };
  return c;
}

Case case_mul_const() {
  Rng rng(13);
  Case c;
  c.tol = 1e-8;
  const Shape s{1, 3, 2, 3};
  c.input_names = {"a"};
  c.inputs = {rnd(s, rng)};
  const Tensor<D> k = rnd(s, rng, -2.0, 2.0);
  const Tensor<D> r = rnd(s, rng, 0.3, 1.0);
  auto run = [k, r](Tape<D>& tp, const Inputs& in, Var& a) {
    a = tp.leaf(in[0]);
    return probe_var(tp, mul_const(tp, a, k), r);
  };
  c.eval = [run](const Inputs& in) {
    Tape<D> tp;
    Var a;
    return tp.value(run(tp, in, a))[0];
  };
  c.grads = [run](const Inputs& in) {
    Tape<D> tp;
    Var a;
    Var loss = run(tp, in, a);
    tp.backward(loss);
    return Inputs{tp.grad(a)};
  };
  return c;
}

Case case_sum() {
  Rng rng(14);
  Case c;
  c.tol = 1e-8;
  c.input_names = {"a"};
  c.inputs = {rnd(Shape{2, 2, 3, 3}, rng)};
  c.eval = [](const Inputs& in) {
    Tape<D> tp;
    Var a = tp.leaf(in[0]);
    return tp.value(sum(tp, a))[0];
  };
  c.grads = [](const Inputs& in) {
    Tape<D> tp;
    Var a = tp.leaf(in[0]);
    tp.backward(sum(tp, a));
    return Inputs{tp.grad(a)};
  };
  return c;
}

template <typename MakeOut>
Case simple_unary(uint64_t seed, Shape in_shape, double tol, MakeOut make_out,
                  double lo = -1.0, double hi = 1.0) {
  Rng rng(seed);
  Case c;
  c.tol = tol;
  c.input_names = {"x"};
  c.inputs = {rnd(in_shape, rng, lo, hi)};
  // probe shape discovered from one forward pass
  Tensor<D> r;
  {
    Tape<D> tp;
    Var x = tp.leaf(c.inputs[0]);
    Var out = make_out(tp, x);
    r = rnd(tp.value(out).shape(), rng, 0.3, 1.0);
  }
  auto run = [make_out, r](Tape<D>& tp, const Inputs& in, Var& x) {
    x = tp.leaf(in[0]);
    return probe_var(tp, make_out(tp, x), r);
  };
  c.eval = [run](const Inputs& in) {
    Tape<D> tp;
    Var x;
    return tp.value(run(tp, in, x))[0];
  };
  c.grads = [run](const Inputs& in) {
    Tape<D> tp;
    Var x;
    Var loss = run(tp, in, x);
    tp.backward(loss);
    return Inputs{tp.grad(x)};
  };
  return c;
}

Case case_leaky_relu() {
  // inputs kept 0.05 away from the kink
  Rng rng(15);
  Case c;
  c.tol = 1e-8;
  c.input_names = {"x"};
  c.inputs = {rnd_margin(Shape{1, 2, 4, 4}, rng, 0.05)};
  const Tensor<D> r = rnd(Shape{1, 2, 4, 4}, rng, 0.3, 1.0);
  auto run = [r](Tape<D>& tp, const Inputs& in, Var& x) {
    x = tp.leaf(in[0]);
    return probe_var(tp, leaky_relu(tp, x, D(0.1)), r);
  };
  c.eval = [run](const Inputs& in) {
    Tape<D> tp;
    Var x;
    return tp.value(run(tp, in, x))[0];
  };
  c.grads = [run](const Inputs& in) {
    Tape<D> tp;
    Var x;
    Var loss = run(tp, in, x);
    tp.backward(loss);
    return Inputs{tp.grad(x)};
  };
  return c;
}

Case case_channel_scale() {
  Rng rng(16);
  Case c;
  c.tol = 1e-8;
  c.input_names = {"x", "gate"};
  c.inputs = {rnd(Shape{1, 3, 4, 4}, rng), rnd(Shape{1, 3, 1, 1}, rng, 0.1, 0.9)};
  const Tensor<D> r = rnd(Shape{1, 3, 4, 4}, rng, 0.3, 1.0);
  auto run = [r](Tape<D>& tp, const Inputs& in, Var& x, Var& g) {
    x = tp.leaf(in[0]);
    g = tp.leaf(in[1]);
    return probe_var(tp, channel_scale(tp, x, g), r);
  };
  c.eval = [run](const Inputs& in) {
    Tape<D> tp;
    Var x, g;
    return tp.value(run(tp, in, x, g))[0];
  };
  c.grads = [run](const Inputs& in) {
    Tape<D> tp;
    Var x, g;
    Var loss = run(tp, in, x, g);
    tp.backward(loss);
    return Inputs{tp.grad(x), tp.grad(g)};
  };
  return c;
}

Case case_concat() {
  Rng rng(17);
  Case c;
  c.tol = 1e-8;
  const Shape a{1, 2, 3, 3}, b{1, 1, 3, 3}, d{1, 3, 3, 3};
  c.input_names = {"a", "b", "c"};
  c.inputs = {rnd(a, rng), rnd(b, rng), rnd(d, rng)};
  const Tensor<D> r = rnd(Shape{1, 6, 3, 3}, rng, 0.3, 1.0);
  auto run = [r](Tape<D>& tp, const Inputs& in, std::vector<Var>& vs) {
    vs = {tp.leaf(in[0]), tp.leaf(in[1]), tp.leaf(in[2])};
    return probe_var(tp, concat_channels(tp, vs), r);
  };
  c.eval = [run](const Inputs& in) {
    Tape<D> tp;
    std::vector<Var> vs;
    return tp.value(run(tp, in, vs))[0];
  };
  c.grads = [run](const Inputs& in) {
    Tape<D> tp;
    std::vector<Var> vs;
    Var loss = run(tp, in, vs);
    tp.backward(loss);
    return Inputs{tp.grad(vs[0]), tp.grad(vs[1]), tp.grad(vs[2])};
  };
  return c;
}

// ---- conv / sampling cases ----

Case case_conv2d() {
  Rng rng(21);
  Case c;
  c.tol = 1e-5;
  const Conv2dSpec spec = Conv2dSpec::same(3, 4, 3);
  c.input_names = {"x", "w", "b"};
  c.inputs = {rnd(Shape{1, 3, 6, 6}, rng), rnd(Shape{4, 3, 3, 3}, rng, -0.5, 0.5),
              rnd(Shape{1, 4, 1, 1}, rng, -0.3, 0.3)};
  const Tensor<D> r = rnd(Shape{1, 4, 6, 6}, rng, 0.3, 1.0);
  auto run = [spec, r](Tape<D>& tp, const Inputs& in, Var& x, Parameter<D>& w,
                       Parameter<D>& b) {
    x = tp.leaf(in[0]);
    w = Parameter<D>("w", in[1]);
    b = Parameter<D>("b", in[2]);
    return probe_var(tp, conv2d(tp, x, w, &b, spec), r);
  };
  c.eval = [run](const Inputs& in) {
    Tape<D> tp;
    Var x;
    Parameter<D> w, b;
    return tp.value(run(tp, in, x, w, b))[0];
  };
  c.grads = [run](const Inputs& in) {
    Tape<D> tp;
    Var x;
    Parameter<D> w, b;
    Var loss = run(tp, in, x, w, b);
    tp.backward(loss);
    return Inputs{tp.grad(x), w.grad, b.grad};
  };
  return c;
}

Case case_bilinear_sample() {
  Rng rng(22);
  Case c;
  c.tol = 1e-4;
  c.input_names = {"img", "coords"};
  Tensor<D> img = rnd(Shape{1, 2, 5, 6}, rng);
  // interior, boundary-blend and near-edge points, all >= 0.1 off the lattice
  Tensor<D> coords(Shape{1, 2, 7, 1});
  const double ys[7] = {1.37, 2.64, -0.42, 3.58, 0.52, 4.31, -0.67};
  const double xs[7] = {2.23, 0.81, 1.49, 4.66, -0.38, 5.42, 3.17};
  for (int p = 0; p < 7; ++p) {
    coords.at(0, 0, p, 0) = ys[p];
    coords.at(0, 1, p, 0) = xs[p];
  }
  c.inputs = {std::move(img), std::move(coords)};
  const Tensor<D> r = rnd(Shape{1, 2, 7, 1}, rng, 0.3, 1.0);
  auto run = [r](Tape<D>& tp, const Inputs& in, Var& img, Var& coords) {
    img = tp.leaf(in[0]);
    coords = tp.leaf(in[1]);
    return probe_var(tp, bilinear_sample_points(tp, img, coords), r);
  };
  c.eval = [run](const Inputs& in) {
    Tape<D> tp;
    Var i, k;
    return tp.value(run(tp, in, i, k))[0];
  };
  c.grads = [run](const Inputs& in) {
    Tape<D> tp;
    Var i, k;
    Var loss = run(tp, in, i, k);
    tp.backward(loss);
    return Inputs{tp.grad(i), tp.grad(k)};
  };
  return c;
}

Case case_deformable_conv2d() {
  Rng rng(23);
  Case c;
  c.tol = 1e-4;
  const Conv2dSpec spec = Conv2dSpec::same(2, 2, 3, false);
  const int K = spec.taps();
  c.input_names = {"x", "w", "offsets", "mask"};
  c.inputs = {rnd(Shape{1, 2, 6, 6}, rng), rnd(Shape{2, 2, 3, 3}, rng, -0.5, 0.5),
              jittered_offsets(Shape{1, 2 * K, 6, 6}, rng, 1),
              rnd(Shape{1, K, 6, 6}, rng, 0.2, 0.9)};
  const Tensor<D> r = rnd(Shape{1, 2, 6, 6}, rng, 0.3, 1.0);
  auto run = [spec, r](Tape<D>& tp, const Inputs& in, Var& x, Parameter<D>& w,
                       Var& off, Var& mask) {
    x = tp.leaf(in[0]);
    w = Parameter<D>("w", in[1]);
    off = tp.leaf(in[2]);
    mask = tp.leaf(in[3]);
    return probe_var(tp, deformable_conv2d(tp, x, w, off, mask, spec), r);
  };
  c.eval = [run](const Inputs& in) {
    Tape<D> tp;
    Var x, o, m;
    Parameter<D> w;
    return tp.value(run(tp, in, x, w, o, m))[0];
  };
  c.grads = [run](const Inputs& in) {
    Tape<D> tp;
    Var x, o, m;
    Parameter<D> w;
    Var loss = run(tp, in, x, w, o, m);
    tp.backward(loss);
    return Inputs{tp.grad(x), w.grad, tp.grad(o), tp.grad(m)};
  };
  return c;
}

Case case_deformable_kernel_conv2d() {
  Rng rng(24);
  Case c;
  c.tol = 1e-4;
  const Conv2dSpec spec = Conv2dSpec::same(2, 2, 3);
  const int scope = 5, K = spec.taps();
  c.input_names = {"x", "scope_w", "kernel_offset", "b"};
  Tensor<D> ko(Shape{1, 1, 1, 2 * K});
  for (int i = 0; i < 2 * K; ++i)
    ko[i] = (rng.unit() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.1, 0.9);
  c.inputs = {rnd(Shape{1, 2, 5, 5}, rng), rnd(Shape{2, 2, scope, scope}, rng, -0.5, 0.5),
              std::move(ko), rnd(Shape{1, 2, 1, 1}, rng, -0.3, 0.3)};
  const Tensor<D> r = rnd(Shape{1, 2, 5, 5}, rng, 0.3, 1.0);
  auto run = [spec, scope, r](Tape<D>& tp, const Inputs& in, Var& x, Parameter<D>& sw,
                              Parameter<D>& ko, Parameter<D>& b) {
    x = tp.leaf(in[0]);
    sw = Parameter<D>("scope_w", in[1]);
    ko = Parameter<D>("kernel_offset", in[2]);
    b = Parameter<D>("b", in[3]);
    return probe_var(tp, deformable_kernel_conv2d(tp, x, sw, ko, &b, spec, scope), r);
  };
  c.eval = [run](const Inputs& in) {
    Tape<D> tp;
    Var x;
    Parameter<D> sw, ko, b;
    return tp.value(run(tp, in, x, sw, ko, b))[0];
  };
  c.grads = [run](const Inputs& in) {
    Tape<D> tp;
    Var x;
    Parameter<D> sw, ko, b;
    Var loss = run(tp, in, x, sw, ko, b);
    tp.backward(loss);
    return Inputs{tp.grad(x), sw.grad, ko.grad, b.grad};
  };
  return c;
}

Case case_charbonnier() {
  Rng rng(25);
  Case c;
  c.tol = 1e-5;
  const Shape s{1, 2, 3, 4};
  Tensor<D> target = rnd(s, rng);
  Tensor<D> pred = target;  // start from zero residual everywhere
  // give half the elements a residual of magnitude >= 0.2
  for (int64_t i = 0; i < pred.numel(); i += 2)
    pred[i] += (rng.unit() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.2, 1.0);
  c.input_names = {"pred"};
  c.inputs = {std::move(pred)};
  auto run = [target](Tape<D>& tp, const Inputs& in, Var& p) {
    p = tp.leaf(in[0]);
    return charbonnier_loss(tp, p, target, D(1e-3));
  };
  c.eval = [run](const Inputs& in) {
    Tape<D> tp;
    Var p;
    return tp.value(run(tp, in, p))[0];
  };
  c.grads = [run](const Inputs& in) {
    Tape<D> tp;
    Var p;
    Var loss = run(tp, in, p);
    tp.backward(loss);
    return Inputs{tp.grad(p)};
  };
  return c;
}

// ---- composite blocks ----

// collect current parameter values / write perturbed values back
Inputs param_values(const std::vector<Parameter<D>*>& ps) {
  Inputs out;
  for (auto* p : ps) out.push_back(p->value);
  return out;
}

void set_param_values(const std::vector<Parameter<D>*>& ps, const Inputs& vals,
                      size_t first) {
  for (size_t i = 0; i < ps.size(); ++i) ps[i]->value = vals[first + i];
}

void zero_param_grads(const std::vector<Parameter<D>*>& ps) {
  for (auto* p : ps) p->zero_grad();
}

template <typename Module>
Case module_case(uint64_t seed, double tol, double eps, Shape in_shape,
                 const std::function<Module(Rng&)>& make_module,
                 const std::function<Var(Module&, Tape<D>&, Var)>& fwd,
                 double kink_margin) {
  auto builder = [=](Rng& rng) {
    Case c;
    c.tol = tol;
    c.eps = eps;
    // the module is shared state: eval/grads overwrite its parameter values
    auto module = std::make_shared<Module>(make_module(rng));
    std::vector<Parameter<D>*> params;
    module->collect(params);
    c.input_names = {"x"};
    c.inputs = {rnd(in_shape, rng, -1.0, 1.0)};
    for (auto* p : params) {
      c.input_names.push_back(p->name);
      c.inputs.push_back(p->value);
    }
    Tensor<D> r;
    {
      Tape<D> tp;
      Var out = fwd(*module, tp, tp.leaf(c.inputs[0]));
      r = Tensor<D>(tp.value(out).shape());
      Rng rr(seed ^ 0x9e3779b9);
      for (int64_t i = 0; i < r.numel(); ++i) r[i] = rr.uniform(0.3, 1.0);
    }
    c.eval = [module, fwd, r](const Inputs& in) {
      std::vector<Parameter<D>*> ps;
      module->collect(ps);
      set_param_values(ps, in, 1);
      Tape<D> tp;
      Var out = fwd(*module, tp, tp.leaf(in[0]));
      return tp.value(probe_var(tp, out, r))[0];
    };
    c.grads = [module, fwd, r](const Inputs& in) {
      std::vector<Parameter<D>*> ps;
      module->collect(ps);
      set_param_values(ps, in, 1);
      zero_param_grads(ps);
      Tape<D> tp;
      Var x = tp.leaf(in[0]);
      Var loss = probe_var(tp, fwd(*module, tp, x), r);
      tp.backward(loss);
      Inputs out{tp.grad(x)};
      for (auto* p : ps) out.push_back(p->grad);
      return out;
    };
    return c;
  };
  return with_kink_margin(builder, seed, kink_margin);
}

/// fractional jitter for a layer's learned kernel offsets
void jitter_kernel_offsets(DeformKernelConv2dLayer<D>& layer, Rng& rng) {
  for (int64_t i = 0; i < layer.kernel_offset.value.numel(); ++i)
    layer.kernel_offset.value[i] =
        (rng.unit() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.1, 0.9);
}

Case case_resblock() {
  return module_case<ResBlock<D>>(
      31, 1e-5, 1e-3, Shape{1, 4, 5, 5},
      [](Rng& rng) {
        ResBlock<D> m;
        Rng r(rng.next_u64());
        m.init(4, "resblock", r);
        return m;
      },
      [](ResBlock<D>& m, Tape<D>& tp, Var x) { return m.forward(tp, x); }, 6e-3);
}

Case case_rcab() {
  return module_case<RCAB<D>>(
      32, 1e-5, 1e-3, Shape{1, 4, 5, 5},
      [](Rng& rng) {
        RCAB<D> m;
        Rng r(rng.next_u64());
        m.init(4, true, "rcab", r);
        return m;
      },
      [](RCAB<D>& m, Tape<D>& tp, Var x) { return m.forward(tp, x); }, 6e-3);
}

Case case_dksa(bool light) {
  return module_case<DKSA<D>>(
      light ? 34 : 33, 1e-4, 1e-3, Shape{1, 3, 5, 5},
      [light](Rng& rng) {
        DKSA<D> m;
        Rng r(rng.next_u64());
        m.init(3, light, /*single_map=*/false, 5, light ? "dksa_light" : "dksa", r);
        Rng jr(rng.next_u64());
        for (auto& layer : m.dkc) jitter_kernel_offsets(layer, jr);
        return m;
      },
      [](DKSA<D>& m, Tape<D>& tp, Var x) { return m.forward(tp, x); }, 6e-3);
}

Case case_predict_offsets() {
  return module_case<OffsetPredictor<D>>(
      35, 1e-4, 1e-3, Shape{1, 3, 5, 5},
      [](Rng& rng) {
        OffsetPredictor<D> m;
        Rng r(rng.next_u64());
        m.init(3, 9, 2, 5, "pred", r);
        // a zero head would leave upstream gradients vacuously zero; give it
        // random weights (nothing downstream samples with these offsets)
        m.head.weight.value = rnd(m.head.weight.value.shape(), r, -0.3, 0.3);
        m.head.bias.value = rnd(m.head.bias.value.shape(), r, -0.4, 0.4);
        Rng jr(rng.next_u64());
        for (auto& layer : m.dk) jitter_kernel_offsets(layer, jr);
        return m;
      },
      [](OffsetPredictor<D>& m, Tape<D>& tp, Var x) {
        auto [off, mask] = m.forward(tp, x);
        return concat_channels(tp, {off, mask});
      },
      6e-3);
}

Case case_extract_features() {
  return module_case<FeatureExtractor<D>>(
      36, 1e-5, 1e-3, Shape{2, 3, 4, 4},
      [](Rng& rng) {
        FeatureExtractor<D> m;
        Rng r(rng.next_u64());
        m.init(3, 4, 2, "features", r);
        return m;
      },
      [](FeatureExtractor<D>& m, Tape<D>& tp, Var x) { return m.forward(tp, x); },
      6e-3);
}

Case case_upscale() {
  return module_case<Upscale<D>>(
      37, 1e-5, 1e-3, Shape{1, 4, 4, 4},
      [](Rng& rng) {
        Upscale<D> m;
        Rng r(rng.next_u64());
        m.init(4, "up", r);
        return m;
      },
      [](Upscale<D>& m, Tape<D>& tp, Var x) { return m.forward(tp, x); }, 6e-3);
}

Case case_reconstruct_level() {
  NetworkConfig cfg;
  cfg.channels = 4;
  cfg.frames = 3;
  cfg.levels = 1;
  cfg.rcab_counts = {2};
  return module_case<ReconLevel<D>>(
      38, 1e-4, 1e-3, Shape{1, 4, 5, 5},
      [cfg](Rng& rng) {
        ReconLevel<D> m;
        Rng r(rng.next_u64());
        m.init(cfg, 1, "level1", r);
        Rng jr(rng.next_u64());
        for (auto& layer : m.dksa.dkc) jitter_kernel_offsets(layer, jr);
        return m;
      },
      [](ReconLevel<D>& m, Tape<D>& tp, Var x) { return m.forward(tp, x); }, 6e-3);
}

Case case_dkc_align() {
  // the predictor output feeds real image-space sampling, so offsets cannot
  // be jittered from outside; a smaller step keeps any kink crossings inside
  // the tolerance instead
  auto builder = [](Rng& rng) {
    Case c;
    c.tol = 1e-4;
    c.eps = 1e-4;
    auto module = std::make_shared<AlignModule<D>>();
    Rng r(rng.next_u64());
    module->init(2, 2, 5, "align", r);
    module->pred.head.weight.value =
        rnd(module->pred.head.weight.value.shape(), r, -0.3, 0.3);
    module->pred.head.bias.value =
        rnd(module->pred.head.bias.value.shape(), r, -0.4, 0.4);
    Rng jr(rng.next_u64());
    for (auto& layer : module->pred.dk) jitter_kernel_offsets(layer, jr);

    std::vector<Parameter<D>*> params;
    module->collect(params);
    c.input_names = {"f_n", "f_r"};
    c.inputs = {rnd(Shape{1, 2, 5, 5}, rng), rnd(Shape{1, 2, 5, 5}, rng)};
    for (auto* p : params) {
      c.input_names.push_back(p->name);
      c.inputs.push_back(p->value);
    }
    Tensor<D> probe_w;
    {
      Rng rr(39 ^ 0x9e3779b9);
      probe_w = Tensor<D>(Shape{1, 2, 5, 5});
      for (int64_t i = 0; i < probe_w.numel(); ++i) probe_w[i] = rr.uniform(0.3, 1.0);
    }
    c.eval = [module, probe_w](const Inputs& in) {
      std::vector<Parameter<D>*> ps;
      module->collect(ps);
      set_param_values(ps, in, 2);
      Tape<D> tp;
      Var out = module->forward(tp, tp.leaf(in[0]), tp.leaf(in[1]));
      return tp.value(probe_var(tp, out, probe_w))[0];
    };
    c.grads = [module, probe_w](const Inputs& in) {
      std::vector<Parameter<D>*> ps;
      module->collect(ps);
      set_param_values(ps, in, 2);
      zero_param_grads(ps);
      Tape<D> tp;
      Var fn = tp.leaf(in[0]);
      Var fr = tp.leaf(in[1]);
      Var loss = probe_var(tp, module->forward(tp, fn, fr), probe_w);
      tp.backward(loss);
      Inputs out{tp.grad(fn), tp.grad(fr)};
      for (auto* p : ps) out.push_back(p->grad);
      return out;
    };
    return c;
  };
  return with_kink_margin(builder, 39, 6e-4);
}

const std::map<std::string, Builder>& case_table() {
  static const std::map<std::string, Builder> table = {
      {"ew_add", [] { return case_binary("ew_add"); }},
      {"ew_sub", [] { return case_binary("ew_sub"); }},
      {"ew_mul", [] { return case_binary("ew_mul"); }},
      {"scale", case_scale},
      {"mul_const", case_mul_const},
      {"sum", case_sum},
      {"leaky_relu", case_leaky_relu},
      {"sigmoid",
       [] {
         return simple_unary(41, Shape{1, 2, 4, 4}, 1e-5,
                             [](Tape<D>& tp, Var x) { return sigmoid(tp, x); }, -3.0,
                             3.0);
       }},
      {"global_avg_pool",
       [] {
         return simple_unary(42, Shape{1, 3, 4, 5}, 1e-8, [](Tape<D>& tp, Var x) {
           return global_avg_pool(tp, x);
         });
       }},
      {"pixel_shuffle",
       [] {
         return simple_unary(43, Shape{1, 8, 2, 3}, 1e-12, [](Tape<D>& tp, Var x) {
           return pixel_shuffle(tp, x, 2);
         });
       }},
      {"bicubic_resize",
       [] {
         return simple_unary(44, Shape{1, 2, 4, 5}, 1e-8, [](Tape<D>& tp, Var x) {
           return bicubic_up2(tp, x);
         });
       }},
      {"concat_channels", case_concat},
      {"slice_channels",
       [] {
         return simple_unary(45, Shape{1, 5, 3, 3}, 1e-8, [](Tape<D>& tp, Var x) {
           return slice_channels(tp, x, 1, 4);
         });
       }},
      {"gather_rows",
       [] {
         // repeated rows exercise gradient accumulation
         return simple_unary(46, Shape{4, 2, 3, 3}, 1e-8, [](Tape<D>& tp, Var x) {
           return gather_rows(tp, x, {0, 2, 1, 2});
         });
       }},
      {"tile_channels",
       [] {
         return simple_unary(47, Shape{1, 1, 3, 4}, 1e-8, [](Tape<D>& tp, Var x) {
           return tile_channels(tp, x, 3);
         });
       }},
      {"channel_scale", case_channel_scale},
      {"conv2d", case_conv2d},
      {"bilinear_sample", case_bilinear_sample},
      {"deformable_conv2d", case_deformable_conv2d},
      {"deformable_kernel_conv2d", case_deformable_kernel_conv2d},
      {"predict_offsets", case_predict_offsets},
      {"charbonnier", case_charbonnier},
      {"resblock", case_resblock},
      {"rcab", case_rcab},
      {"dksa", [] { return case_dksa(false); }},
      {"dksa_light", [] { return case_dksa(true); }},
      {"dkc_align", case_dkc_align},
      {"extract_features", case_extract_features},
      {"reconstruct_level", case_reconstruct_level},
      {"upscale", case_upscale},
  };
  return table;
}

GradcheckReport run_case(const std::string& op, Case c) {
  const auto t0 = std::chrono::steady_clock::now();
  GradcheckReport report;
  report.op = op;
  report.tol = c.tol;
  report.eps = c.eps;

  const Inputs analytic = c.grads(c.inputs);
  report.pass = true;
  for (size_t i = 0; i < c.inputs.size(); ++i) {
    GradcheckInputResult res;
    res.input = c.input_names[i];
    Inputs work = c.inputs;
    for (int64_t e = 0; e < c.inputs[i].numel(); ++e) {
      const double saved = work[i][e];
      work[i][e] = saved + c.eps;
      const double fp = c.eval(work);
      work[i][e] = saved - c.eps;
      const double fm = c.eval(work);
      work[i][e] = saved;
      const double num = (fp - fm) / (2.0 * c.eps);
      const double ana = analytic[i][e];
      if (!std::isfinite(num) || !std::isfinite(ana))
        throw numeric_error("gradcheck: non-finite gradient for op " + op + " input " +
                            res.input + " element " + std::to_string(e));
      const double rel =
          std::abs(ana - num) / std::max(1e-8, std::abs(ana) + std::abs(num));
      if (rel > res.max_rel_err) res.max_rel_err = rel;
    }
    res.pass = res.max_rel_err <= c.tol;
    if (!res.pass) report.pass = false;
    report.inputs.push_back(std::move(res));
  }
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

}  // namespace

std::vector<std::string> gradcheck_ops() {
  std::vector<std::string> out;
  for (const auto& [name, _] : case_table()) out.push_back(name);
  return out;
}

GradcheckReport run_gradcheck(const std::string& op) {
  const auto& table = case_table();
  auto it = table.find(op);
  if (it == table.end()) {
    std::string msg = "gradcheck: unknown op '" + op + "'; suite contains:";
    for (const auto& [name, _] : table) msg += " " + name;
    throw contract_error(msg);
  }
  return run_case(op, it->second());
}

std::vector<GradcheckReport> run_all_gradchecks() {
  std::vector<GradcheckReport> reports;
  const auto& table = case_table();
  // registry coverage: a registered op without a check is a failure
  for (const auto& name : op_registry()) {
    if (table.find(name) == table.end()) {
      GradcheckReport r;
      r.op = name;
      r.pass = false;
      GradcheckInputResult miss;
      miss.input = "<no gradcheck case registered>";
      miss.pass = false;
      r.inputs.push_back(miss);
      reports.push_back(std::move(r));
    }
  }
  for (const auto& [name, builder] : table) reports.push_back(run_case(name, builder()));
  std::sort(reports.begin(), reports.end(),
            [](const GradcheckReport& a, const GradcheckReport& b) { return a.op < b.op; });
  return reports;
}

std::string format_gradcheck_table(const std::vector<GradcheckReport>& reports) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof(line), "%-28s %-28s %12s %9s %6s\n", "op", "input",
                "max_rel_err", "tol", "ok");
  out += line;
  for (const auto& r : reports)
    for (const auto& in : r.inputs) {
      std::snprintf(line, sizeof(line), "%-28s %-28s %12.3e %9.0e %6s\n", r.op.c_str(),
                    in.input.c_str(), in.max_rel_err, r.tol,
                    in.pass ? "pass" : "FAIL");
      out += line;
    }
  return out;
}

bool all_passed(const std::vector<GradcheckReport>& reports) {
  for (const auto& r : reports)
    if (!r.pass) return false;
  return !reports.empty();
}

}  // namespace dksan
