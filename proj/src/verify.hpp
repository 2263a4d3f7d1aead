// SPDX-FileCopyrightText: 2026 dpl contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

namespace dpl {

struct VerifyCheck {
  std::string name;
  bool pass = false;
  std::string detail;  // filled in on failure
};

struct VerifyReport {
  std::vector<VerifyCheck> checks;
  bool pass = false;
  std::string to_json() const;
};

/// Runs the built-in analytic-identity suite: softmax and distance
/// identities, loss reference values, the sigma-reduction and
/// sigma-scaling inference invariants, metric identities and the
/// determinism contract. Everything is seeded and self-contained.
VerifyReport run_verification();

}  // namespace dpl
