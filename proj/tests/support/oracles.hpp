// SPDX-License-Identifier: Apache-2.0
// Independent reference computations used to check library results.
#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace cure::testing {

/// Per-concept MI via the entropy decomposition
///   sum_y P(c,y) ln P(c,y) - P(c) ln P(c) - sum_y P(c,y) ln P(y),
/// summing raw counts with explicit double loops.
std::vector<double> mi_oracle(const std::vector<std::vector<std::size_t>>& joint);

/// P(lo <= X <= hi) for X ~ Binomial(n, p).
double binomial_interval_prob(int n, double p, int lo, int hi);

struct MetricsOracle {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::vector<double> precision;
  std::vector<double> recall;
  std::vector<double> f1;
};

/// Counts TP/FP/FN per class by scanning every (pred, gold) pair once per
/// class. Undefined ratios are 0.
MetricsOracle metrics_oracle(const std::vector<int>& preds, const std::vector<int>& gold,
                             int n_classes);

/// Plain dynamic-programming edit distance.
std::size_t edit_distance_oracle(const std::string& a, const std::string& b);

}  // namespace cure::testing
