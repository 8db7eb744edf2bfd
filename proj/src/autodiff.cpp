// Copyright 2026 the dksan authors
// SPDX-License-Identifier: Apache-2.0

#include "dksan/autodiff.hpp"

#include "dksan/op_registry.hpp"

// The tape engine itself is header-only; this unit just enters the basic
// elementwise ops into the gradcheck registry.
DKSAN_REGISTER_OP(ew_add);
DKSAN_REGISTER_OP(ew_sub);
DKSAN_REGISTER_OP(ew_mul);
DKSAN_REGISTER_OP(scale);
DKSAN_REGISTER_OP(mul_const);
DKSAN_REGISTER_OP(sum);
