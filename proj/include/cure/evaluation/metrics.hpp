// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

namespace cure::evaluation {

struct Metrics {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::vector<double> precision;  // per class
  std::vector<double> recall;     // per class
  std::vector<double> f1;         // per class
  std::vector<std::vector<std::size_t>> confusion;  // [gold][pred]
  std::size_t n = 0;
  std::vector<std::string> warnings;
};

/// Classes are [0, n_classes); n_classes = 0 infers max(pred, gold) + 1.
/// Precision/recall with a zero denominator are 0. A class absent from both
/// preds and gold gets F1 = 0 and a warning.
/// Throws DimensionError on length mismatch or empty input.
Metrics compute_metrics(const std::vector<int>& preds, const std::vector<int>& gold,
                        int n_classes = 0);

nlohmann::json to_json(const Metrics& m);

}  // namespace cure::evaluation
