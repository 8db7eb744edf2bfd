// Copyright 2026 the dksan authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace dksan {

/// Violated API contract (bad shape, bad config, misuse). Maps to exit code 1.
class contract_error : public std::invalid_argument {
 public:
  explicit contract_error(const std::string& msg) : std::invalid_argument(msg) {}
};

/// Unreadable or malformed external data. Maps to exit code 2.
class io_error : public std::runtime_error {
 public:
  explicit io_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Non-finite values where finite ones are required. Maps to exit code 3.
class numeric_error : public std::runtime_error {
 public:
  explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace dksan
