// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

#include "cure/corpus/document.hpp"
#include "cure/corpus/synthetic.hpp"
#include "cure/labeling/client.hpp"

namespace cure::labeling {

struct DocError {
  std::string id;
  std::string stage;  // "clean", "label", "assign"
  std::string message;
};

nlohmann::json to_json(const DocError& e);

struct LabelOptions {
  int concurrency = 1;  // in-flight client requests
};

struct LabelResult {
  std::vector<corpus::Document> docs;
  std::vector<DocError> errors;
};

/// Runs Pa per document. Documents whose text is empty, whose replies never
/// normalize to one word, or whose client keeps failing end up "unknown" with
/// an error record.
LabelResult label_concepts(const std::vector<corpus::Document>& docs, Annotator& annotator,
                           const LabelOptions& opts = {});

/// Runs Pb over the distinct raw concepts ("unknown" excluded). Throws
/// ParseError when every attempt yields an invalid list and ConfigError on an
/// empty input.
std::vector<std::string> merge_meta_concepts(const std::vector<std::string>& raw_concepts,
                                             Annotator& annotator);

struct Assignment {
  std::string concept_name;
  std::string warning;  // set when the edit-distance fallback was used
};

/// Runs Pc. If no attempt names a member of `concepts`, falls back to the
/// member nearest by edit distance to the last reply (or to `raw` if no reply
/// normalized), ties to the earlier member. Throws ConfigError on empty
/// `concepts`.
Assignment assign_final_concept(const std::string& raw, const std::vector<std::string>& concepts,
                                Annotator& annotator);

struct LabelingOutcome {
  std::vector<corpus::Document> docs;  // final concept or "unknown"
  std::vector<std::string> concepts;   // meta-concept set
  std::vector<DocError> errors;
  std::vector<std::string> warnings;
  std::size_t client_calls = 0;
  std::size_t cache_hits = 0;
};

nlohmann::json summary_json(const LabelingOutcome& out);

/// clean -> label -> merge -> assign. Incoming concept fields are ignored.
LabelingOutcome run_labeling(const std::vector<corpus::Document>& docs, Annotator& annotator,
                             const LabelOptions& opts = {});

/// Direct keyword lookup against the generator's clusters, bypassing prompts.
std::vector<corpus::Document> offline_annotate(const std::vector<corpus::Document>& docs,
                                               const corpus::GeneratorMetadata& meta);

}  // namespace cure::labeling
