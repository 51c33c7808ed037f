// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace cure::diagnostics {

/// One differentiable op or layer under finite-difference check. `run`
/// builds random 64-bit inputs from `seed` and returns the worst relative
/// error over every input and parameter tensor.
struct GradCase {
  std::string name;
  std::function<double(std::uint64_t seed)> run;
};

std::vector<GradCase> all_grad_cases();

}  // namespace cure::diagnostics
