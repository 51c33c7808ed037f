// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "cure/evaluation/metrics.hpp"
#include "cure/pipeline/model.hpp"
#include "cure/pipeline/stages.hpp"

namespace cure::evaluation {

/// Metrics of the task head on `data` through the inference path of `mode`:
/// theta(psi(x)), or theta(x) when mode is off. Runs without gradient
/// tracking and never touches the model. Throws DimensionError on an empty
/// split.
template <typename T>
Metrics evaluate(const pipeline::CureModel<T>& model, const pipeline::Dataset<T>& data,
                 pipeline::Mode mode);

}  // namespace cure::evaluation
