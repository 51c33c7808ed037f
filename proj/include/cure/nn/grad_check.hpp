// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>

#include "cure/nn/tensor.hpp"

namespace cure::nn {

struct GradCheckResult {
  double max_abs_error = 0.0;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
};

/// Gradients below this magnitude are compared on an absolute scale.
inline constexpr double kGradCheckFloor = 1e-4;

/// Compares the autodiff gradient of scalar `f` w.r.t. `x` with central
/// differences (f(x+h) - f(x-h)) / 2h, one coordinate at a time. `f` must
/// read `x` by handle; its values are perturbed in place and restored.
/// Relative error per coordinate is |a - n| / max(|a|, |n|, kGradCheckFloor).
GradCheckResult grad_check(const std::function<Tensor<double>()>& f, Tensor<double>& x,
                           double h = 1e-5);

}  // namespace cure::nn
