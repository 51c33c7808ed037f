// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "cure/corpus/concept_stats.hpp"
#include "cure/corpus/document.hpp"

namespace cure::corpus {

struct SplitOptions {
  int k = 2;
  double iid_holdout_fraction = 0.15;
  std::uint64_t seed = 1;
};

/// Group A (top-k MI concepts) becomes a label-balanced biased train set plus
/// an iid test set; Group B (bottom-k) becomes the OOD test set with every
/// kept concept exactly label-balanced.
struct DatasetSplit {
  std::vector<Document> train;
  std::vector<Document> iid_test;
  std::vector<Document> ood_test;
  /// Full concept inventory in index order; the concept head predicts over it.
  std::vector<std::string> concepts;
  int n_labels = 0;
  std::vector<std::string> top_concepts;
  std::vector<double> top_mi;
  std::vector<std::string> bottom_concepts;  // kept in OOD
  std::vector<double> bottom_mi;
  std::vector<std::string> warnings;

  /// Concept index per train document (into `concepts`).
  std::vector<int> train_concept_indices() const;
};

/// Throws DegenerateTaskError if fewer than 2k concepts are present and
/// LabelingIncompleteError for unlabeled documents. Documents labeled
/// "unknown" are excluded with a warning. Output does not depend on input
/// order.
DatasetSplit build_splits(const std::vector<Document>& docs, const SplitOptions& options);

/// Throws on any violated split invariant (label balance, uneven concept
/// distribution in train, per-concept OOD balance, disjoint ids).
void check_split_invariants(const DatasetSplit& split);

/// Manifest: ids per split, selected concepts with MI scores, warnings.
nlohmann::json split_manifest(const DatasetSplit& split);
void write_split_manifest(const std::filesystem::path& path, const DatasetSplit& split);

/// Rebuilds a split from a manifest plus the labeled corpus it references.
DatasetSplit split_from_manifest(const nlohmann::json& manifest, const std::vector<Document>& docs);

}  // namespace cure::corpus
