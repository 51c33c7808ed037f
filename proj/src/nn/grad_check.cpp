// SPDX-License-Identifier: Apache-2.0
#include "cure/nn/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace cure::nn {

GradCheckResult grad_check(const std::function<Tensor<double>()>& f, Tensor<double>& x,
                           double h) {
  const bool had_grad = x.requires_grad();
  x.set_requires_grad(true);
  x.zero_grad();
  f().backward();
  std::vector<double> analytic(x.numel(), 0.0);
  if (x.has_grad()) std::copy(x.grad().begin(), x.grad().end(), analytic.begin());
  x.zero_grad();

  GradCheckResult res;
  auto vals = x.values();
  {
    NoGradGuard no_grad;
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const double orig = vals[i];
      vals[i] = orig + h;
      const double fp = f().item();
      vals[i] = orig - h;
      const double fm = f().item();
      vals[i] = orig;
      const double numeric = (fp - fm) / (2.0 * h);
      const double abs_err = std::abs(analytic[i] - numeric);
      const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), kGradCheckFloor});
      const double rel = abs_err / denom;
      res.max_abs_error = std::max(res.max_abs_error, abs_err);
      if (rel > res.max_rel_error) {
        res.max_rel_error = rel;
        res.worst_index = i;
      }
    }
  }
  x.set_requires_grad(had_grad);
  return res;
}

}  // namespace cure::nn
