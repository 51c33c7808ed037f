// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace cure::corpus {

/// Concept name assigned to documents the labeling pipeline could not place.
inline constexpr const char* kUnknownConcept = "unknown";

struct Document {
  std::string id;
  std::string text;
  int label = 0;
  std::optional<std::string> concept_label;  // empty until labeled

  bool operator==(const Document&) const = default;
};

/// JSON-lines: one {"id", "text", "label", "concept"} object per line;
/// "concept" is null for unlabeled documents.
void write_jsonl(const std::filesystem::path& path, const std::vector<Document>& docs);
std::vector<Document> read_jsonl(const std::filesystem::path& path);

std::string to_jsonl_line(const Document& doc);
Document from_jsonl_line(const std::string& line);

/// Number of task classes: max label + 1.
int label_count(const std::vector<Document>& docs);

std::vector<std::string> texts_of(const std::vector<Document>& docs);
std::vector<int> labels_of(const std::vector<Document>& docs);

}  // namespace cure::corpus
