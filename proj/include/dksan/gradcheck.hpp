// Copyright 2026 the dksan authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

namespace dksan {

/// Central-difference certification of one op (64-bit precision).
/// Relative error is |a-f| / max(1e-8, |a|+|f|), reported per input as the
/// max over its elements.
struct GradcheckInputResult {
  std::string input;
  double max_rel_err = 0.0;
  bool pass = false;
};

struct GradcheckReport {
  std::string op;
  double tol = 0.0;
  double eps = 0.0;
  std::vector<GradcheckInputResult> inputs;
  bool pass = false;
  double seconds = 0.0;
};

/// Suite keys (must cover the whole op registry).
std::vector<std::string> gradcheck_ops();

/// Runs one op's check; contract_error on unknown names (message lists the
/// suite). numeric_error if either gradient goes non-finite.
GradcheckReport run_gradcheck(const std::string& op);

/// Whole suite, registry-coverage enforced: any registered op without a
/// check appears as a failing row.
std::vector<GradcheckReport> run_all_gradchecks();

/// Plain text table: op, input, max rel err, tol, pass/fail.
std::string format_gradcheck_table(const std::vector<GradcheckReport>& reports);

bool all_passed(const std::vector<GradcheckReport>& reports);

}  // namespace dksan
