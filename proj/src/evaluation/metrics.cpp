// SPDX-License-Identifier: Apache-2.0
#include "cure/evaluation/metrics.hpp"

#include <algorithm>

#include "cure/common/errors.hpp"

namespace cure::evaluation {

Metrics compute_metrics(const std::vector<int>& preds, const std::vector<int>& gold,
                        int n_classes) {
  if (preds.size() != gold.size()) {
    throw DimensionError("compute_metrics: " + std::to_string(preds.size()) + " predictions for " +
                         std::to_string(gold.size()) + " gold labels");
  }
  if (preds.empty()) throw DimensionError("compute_metrics: empty input");
  int k = n_classes;
  if (k <= 0) {
    for (std::size_t i = 0; i < preds.size(); ++i) k = std::max({k, preds[i] + 1, gold[i] + 1});
  }
  Metrics m;
  m.n = preds.size();
  m.confusion.assign(static_cast<std::size_t>(k), std::vector<std::size_t>(static_cast<std::size_t>(k), 0));
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] < 0 || preds[i] >= k || gold[i] < 0 || gold[i] >= k) {
      throw IndexError("compute_metrics: class index outside [0, " + std::to_string(k) + ")");
    }
    ++m.confusion[static_cast<std::size_t>(gold[i])][static_cast<std::size_t>(preds[i])];
  }
  std::size_t trace = 0;
  double f1_sum = 0.0;
  for (int c = 0; c < k; ++c) {
    const auto cu = static_cast<std::size_t>(c);
    const std::size_t tp = m.confusion[cu][cu];
    std::size_t pred_c = 0, gold_c = 0;
    for (std::size_t j = 0; j < static_cast<std::size_t>(k); ++j) {
      pred_c += m.confusion[j][cu];
      gold_c += m.confusion[cu][j];
    }
    trace += tp;
    const double p = pred_c ? static_cast<double>(tp) / static_cast<double>(pred_c) : 0.0;
    const double r = gold_c ? static_cast<double>(tp) / static_cast<double>(gold_c) : 0.0;
    const double f = pred_c + gold_c
                         ? 2.0 * static_cast<double>(tp) / static_cast<double>(pred_c + gold_c)
                         : 0.0;
    if (pred_c + gold_c == 0) {
      m.warnings.push_back("class " + std::to_string(c) + " absent from predictions and gold; F1 = 0");
    }
    m.precision.push_back(p);
    m.recall.push_back(r);
    m.f1.push_back(f);
    f1_sum += f;
  }
  m.accuracy = static_cast<double>(trace) / static_cast<double>(m.n);
  m.macro_f1 = f1_sum / static_cast<double>(k);
  return m;
}

nlohmann::json to_json(const Metrics& m) {
  nlohmann::json j;
  j["n"] = m.n;
  j["accuracy"] = m.accuracy;
  j["macro_f1"] = m.macro_f1;
  j["precision"] = m.precision;
  j["recall"] = m.recall;
  j["f1"] = m.f1;
  j["confusion"] = m.confusion;
  if (!m.warnings.empty()) j["warnings"] = m.warnings;
  return j;
}

}  // namespace cure::evaluation
