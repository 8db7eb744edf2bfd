// Copyright 2026 the dksan authors
// SPDX-License-Identifier: Apache-2.0

#include "dksan/alignment.hpp"

#include "dksan/nn_ops.hpp"
#include "dksan/op_registry.hpp"

namespace dksan {

template <typename T>
void AlignModule<T>::init(int channels, int predictor_depth, int scope,
                          const std::string& name, Rng& rng) {
  fuse.init(Conv2dSpec::same(2 * channels, channels, 1), name + ".fuse", rng);
  defconv_spec = Conv2dSpec::same(channels, channels, 3, /*with_bias=*/false);
  pred.init(channels, defconv_spec.taps(), predictor_depth, scope, name + ".pred", rng);
  const int fan_in = channels * defconv_spec.kh * defconv_spec.kw;
  defconv_w = Parameter<T>(
      name + ".defconv.weight",
      kaiming_uniform<T>(Shape{channels, channels, 3, 3}, fan_in, rng));
}

template <typename T>
Var AlignModule<T>::forward(Tape<T>& tp, Var f_n, Var f_r) {
  ensure_same_shape(tp.value(f_n), tp.value(f_r), "dkc_align");
  Var fused = fuse.forward(tp, concat_channels(tp, {f_n, f_r}));
  auto [offsets, mask] = pred.forward(tp, fused);
  return deformable_conv2d(tp, f_n, defconv_w, offsets, mask, defconv_spec);
}

template <typename T>
void AlignModule<T>::collect(std::vector<Parameter<T>*>& out) {
  fuse.collect(out);
  pred.collect(out);
  out.push_back(&defconv_w);
}

template <typename T>
Var align_and_fuse(Tape<T>& tp, AlignModule<T>* align, Conv2dLayer<T>& fusion,
                   const std::vector<Var>& features, int ref_index) {
  const int frames = static_cast<int>(features.size());
  if (frames < 1 || frames % 2 == 0 || ref_index != frames / 2)
    throw contract_error("align_and_fuse: need 2N+1 frames with the reference at the "
                         "center, got " +
                         std::to_string(frames) + " frames, ref " +
                         std::to_string(ref_index));
  std::vector<Var> ordered;
  ordered.reserve(features.size());
  for (int f = 0; f < frames; ++f) {
    if (f == ref_index || align == nullptr)
      ordered.push_back(features[f]);  // reference passes through unaligned
    else
      ordered.push_back(align->forward(tp, features[f], features[ref_index]));
  }
  return fusion.forward(tp, concat_channels(tp, ordered));
}

DKSAN_REGISTER_OP(dkc_align);

template struct AlignModule<float>;
template struct AlignModule<double>;
template Var align_and_fuse<float>(Tape<float>&, AlignModule<float>*,
                                   Conv2dLayer<float>&, const std::vector<Var>&, int);
template Var align_and_fuse<double>(Tape<double>&, AlignModule<double>*,
                                    Conv2dLayer<double>&, const std::vector<Var>&, int);

}  // namespace dksan
