// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "cure/corpus/document.hpp"

namespace cure::corpus {

/// Parameters of the biased synthetic corpus. Concept i < n_biased favors
/// label i % n_labels with probability `bias`; every other concept draws its
/// labels uniformly.
struct SyntheticSpec {
  int n_labels = 2;
  int n_concepts = 6;
  int n_biased = 2;
  int n_documents = 4000;  // spread as evenly as possible over concepts
  double bias = 0.95;      // in [0.5, 1]
  int vocabulary_size = 2000;
  int concept_vocab_size = 1;     // words per concept cluster
  int sentiment_vocab_size = 2;   // words per label
  int sentiment_tokens = 6;
  int concept_tokens = 4;
  int noise_tokens = 4;
  /// Probability that a sentiment token comes from the document's own label.
  double sentiment_purity = 0.9;
  std::uint64_t seed = 1;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

nlohmann::json to_json(const SyntheticSpec& spec);
SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j);

/// Ground truth the generator knows and the offline annotator consumes.
struct GeneratorMetadata {
  std::vector<std::string> concept_names;
  std::vector<std::vector<std::string>> concept_vocab;    // per concept
  std::vector<std::vector<std::string>> sentiment_vocab;  // per label
  std::vector<int> favored_label;                         // -1 when unbiased
  SyntheticSpec spec;
};

nlohmann::json to_json(const GeneratorMetadata& meta);
GeneratorMetadata generator_metadata_from_json(const nlohmann::json& j);

struct SyntheticCorpus {
  std::vector<Document> documents;
  GeneratorMetadata metadata;
};

/// Each text is a shuffled mix of sentiment tokens (causal for the label),
/// concept-cluster tokens and noise tokens. Documents carry their generating
/// concept as ground truth.
SyntheticCorpus generate_synthetic(const SyntheticSpec& spec);

/// Deterministic pronounceable pseudo-word for pool index `i`; distinct for
/// distinct `i`.
std::string pseudo_word(std::size_t i);

/// Display name for concept index `i` ("acting", "plot", ...).
std::string concept_name(int i);

}  // namespace cure::corpus
