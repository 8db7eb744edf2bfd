// Copyright 2026 the dksan authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

namespace dksan {

/// Names of every differentiable op the library exposes. The gradcheck
/// suite enumerates this list and refuses to pass if any entry lacks a
/// numeric check, so new ops cannot ship unverified.
const std::vector<std::string>& op_registry();

/// Static self-registration hook; one per op translation unit.
struct OpRegistrar {
  explicit OpRegistrar(const char* name);
};

#define DKSAN_REGISTER_OP(name) \
  static ::dksan::OpRegistrar dksan_op_registrar_##name(#name)

}  // namespace dksan
