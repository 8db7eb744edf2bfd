// Copyright 2026 the dksan authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "dksan/tensor.hpp"

namespace dksan {

/// Binary PPM (P6, maxval 255) -> (1,3,h,w) tensor in [0,1] (byte/255).
/// Header comments (#...) are honored. Malformed input raises io_error with
/// the byte offset of the problem.
Tensor<float> load_ppm(const std::string& path);

/// Exact inverse of load_ppm for quantized tensors: byte =
/// round-half-away-from-zero(value*255), clamped to [0,255].
void save_ppm(const std::string& path, const Tensor<float>& image);

/// Parser core, exposed for the malformed-header tests (offset is the byte
/// position embedded in thrown errors).
Tensor<float> parse_ppm(const std::string& bytes, const std::string& origin);

}  // namespace dksan
