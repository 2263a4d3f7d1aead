// SPDX-FileCopyrightText: 2026 dpl contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dpl {

// One (parameter group, loss component) pair of the finite-difference
// check. Components are "ce", "ortho", "match" (alpha-scaled) and "total".
struct GradCheckCell {
  std::string group;
  std::string component;
  double max_rel_err = 0.0;
  bool pass = true;
};

struct GradCheckReport {
  std::uint64_t seed = 0;
  std::uint32_t trial = 0;  // instance rebuild count until margins held
  double step = 1e-5;
  double tolerance = 1e-4;
  std::size_t active_hinges = 0;
  std::vector<GradCheckCell> cells;
  bool pass = false;
  double max_rel_err = 0.0;

  std::string to_json() const;
};

/// Checks every analytic gradient of the composite objective against a
/// central finite difference of an independent re-implementation of the
/// loss, evaluated in extended precision. The check instance is d_in=16,
/// d=8, five classes, batch 16, four samples per class with frozen
/// epsilons; the instance is rebuilt deterministically until it sits far
/// enough from every non-smooth point (hinge boundary, sample argmin tie,
/// relu kink, dot-product sign) for the finite difference to be valid.
GradCheckReport run_grad_check(std::uint64_t seed,
                               bool detach_prototype_in_sampling = false);

}  // namespace dpl
