// SPDX-License-Identifier: Apache-2.0
#include "cure/evaluation/evaluate.hpp"

#include "cure/common/errors.hpp"

namespace cure::evaluation {

template <typename T>
Metrics evaluate(const pipeline::CureModel<T>& model, const pipeline::Dataset<T>& data,
                 pipeline::Mode mode) {
  if (data.size() == 0) throw DimensionError("evaluate: empty split");
  nn::NoGradGuard guard;
  auto preds = pipeline::argmax_rows(model.task_logits(data.x, mode));
  return compute_metrics(preds, data.labels, static_cast<int>(model.config().n_labels));
}

template Metrics evaluate(const pipeline::CureModel<float>&, const pipeline::Dataset<float>&,
                          pipeline::Mode);
template Metrics evaluate(const pipeline::CureModel<double>&, const pipeline::Dataset<double>&,
                          pipeline::Mode);

}  // namespace cure::evaluation
