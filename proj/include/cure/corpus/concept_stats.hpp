// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "cure/corpus/document.hpp"

namespace cure::corpus {

/// Empirical joint and marginal counts over (concept, label) plus the
/// per-concept mutual-information bias score
///   I(c; Y) = sum_y P(c,y) ln(P(c,y) / (P(c) P(y))).
/// Concepts are indexed in lexicographic name order.
struct ConceptStats {
  std::vector<std::string> concepts;
  int n_labels = 0;
  std::vector<std::vector<std::size_t>> joint;  // [concept][label]
  std::vector<std::size_t> concept_totals;
  std::vector<std::size_t> label_totals;
  std::size_t total = 0;
  std::vector<double> mi;  // per concept

  /// Index of `name` in `concepts`, or -1.
  int index_of(const std::string& name) const;
};

/// Per-row MI scores of a raw count table (rows = concepts, cols = labels).
std::vector<double> concept_mi_from_counts(const std::vector<std::vector<std::size_t>>& joint);

/// Throws LabelingIncompleteError if any document lacks a concept.
/// `n_labels` = 0 infers it from the documents.
ConceptStats concept_mi(const std::vector<Document>& docs, int n_labels = 0);

}  // namespace cure::corpus
