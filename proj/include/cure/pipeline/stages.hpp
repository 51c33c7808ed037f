// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "cure/common/rng.hpp"
#include "cure/nn/adamw.hpp"
#include "cure/nn/tensor.hpp"
#include "cure/pipeline/model.hpp"
#include "cure/pipeline/report.hpp"
#include "cure/pipeline/schedule.hpp"

namespace cure::pipeline {

/// One embedded split part.
template <typename T>
struct Dataset {
  nn::Tensor<T> x;              // [n x d], no grad
  std::vector<int> labels;      // task labels
  std::vector<int> concepts;    // concept indices, or empty

  std::size_t size() const { return labels.size(); }
};

/// Rows `idx` of `x` as a fresh leaf tensor.
template <typename T>
nn::Tensor<T> gather_rows(const nn::Tensor<T>& x, const std::vector<std::size_t>& idx);

/// Shuffled mini-batches of [0, n); the last batch may be short.
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size, Rng& rng);

/// Evaluation sets logged after each task-stage epoch. Either may be null.
template <typename T>
struct EvalSets {
  const Dataset<T>* iid = nullptr;
  const Dataset<T>* ood = nullptr;
};

template <typename T>
std::vector<int> argmax_rows(const nn::Tensor<T>& logits);

/// Accuracy of the frozen concept head on `data.x` passed through phi
/// (`through_phi`) or used raw.
template <typename T>
double concept_accuracy(const CureModel<T>& model, const Dataset<T>& data, bool through_phi);

/// Mean concept dropout loss over `data` through phi.
template <typename T>
double mean_concept_dropout(const CureModel<T>& model, const Dataset<T>& data, double tau);

/// Mean per-dimension variance of phi(x) across rows (collapse statistic).
template <typename T>
double output_variance(const CureModel<T>& model, const Dataset<T>& data);

/// Fraction of rows whose hinge term is exactly zero, and mean cosine,
/// for pairs (psi(x), psi(phi(x))).
struct HingeStats {
  double satisfied = 0.0;
  double mean_cos = 0.0;
};
template <typename T>
HingeStats hinge_stats(const CureModel<T>& model, const Dataset<T>& data, double margin, Mode mode);

/// Freezes every part, then unfreezes `trainable`.
template <typename T>
void set_trainable_parts(CureModel<T>& model, std::initializer_list<Part> trainable);

/// Stage 1: omega minimizes concept cross-entropy on raw embeddings.
/// Throws DegenerateTaskError if fewer than two concepts occur in `train`.
template <typename T>
void train_concept_head(CureModel<T>& model, const Dataset<T>& train, const StageSchedule& sched,
                        std::uint64_t seed, TrainReport& report);

/// One optimizer step of phi_hat on ||phi_hat(phi(x)) - x||^2 with phi frozen.
/// Returns the loss before the step.
template <typename T>
double train_reversal_step(CureModel<T>& model, const nn::Tensor<T>& xb, nn::AdamW<T>& opt);

/// Stage 2: alternates `sched.alternation` reversal steps with one step of
/// L(phi) = L_concept + lambda * L_content. With use_reversal = false only
/// L_concept drives phi and phi_hat is never trained.
template <typename T>
void train_content_extractor(CureModel<T>& model, const Dataset<T>& train,
                             const StageSchedule& sched, const Hyperparameters& hp,
                             std::uint64_t seed, TrainReport& report);

/// Stage 3: psi minimizes the margin loss between psi(x) and psi(phi(x)).
/// Stops early once kHingeSatisfiedFraction of train pairs have a zero
/// hinge term (checked before every epoch).
template <typename T>
void train_debias(CureModel<T>& model, const Dataset<T>& train, const StageSchedule& sched,
                  const Hyperparameters& hp, std::uint64_t seed, TrainReport& report);

/// Stage 4: theta and psi jointly minimize cross-entropy on psi(x) plus
/// hp.joint_margin_weight times the margin loss; with mode off theta alone
/// trains on raw x.
template <typename T>
void train_task_head(CureModel<T>& model, const Dataset<T>& train, const StageSchedule& sched,
                     const Hyperparameters& hp, std::uint64_t seed, TrainReport& report,
                     const EvalSets<T>& eval = {});

}  // namespace cure::pipeline
