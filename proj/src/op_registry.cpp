// Copyright 2026 the dksan authors
// SPDX-License-Identifier: Apache-2.0

#include "dksan/op_registry.hpp"

#include <algorithm>

namespace dksan {

namespace {
std::vector<std::string>& mutable_registry() {
  static std::vector<std::string> names;
  return names;
}
}  // namespace

const std::vector<std::string>& op_registry() { return mutable_registry(); }

OpRegistrar::OpRegistrar(const char* name) {
  auto& r = mutable_registry();
  if (std::find(r.begin(), r.end(), name) == r.end()) r.emplace_back(name);
}

}  // namespace dksan
