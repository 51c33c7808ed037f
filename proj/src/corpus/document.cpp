// SPDX-License-Identifier: Apache-2.0
#include "cure/corpus/document.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "cure/common/errors.hpp"

namespace cure::corpus {

std::string to_jsonl_line(const Document& doc) {
  nlohmann::ordered_json j;
  j["id"] = doc.id;
  j["text"] = doc.text;
  j["label"] = doc.label;
  j["concept"] = doc.concept_label ? nlohmann::ordered_json(*doc.concept_label) : nlohmann::ordered_json();
  return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

Document from_jsonl_line(const std::string& line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("jsonl: ") + e.what());
  }
  Document d;
  try {
    d.id = j.at("id").get<std::string>();
    d.text = j.at("text").get<std::string>();
    d.label = j.at("label").get<int>();
    if (j.contains("concept") && !j["concept"].is_null()) {
      d.concept_label = j["concept"].get<std::string>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("jsonl: malformed document: ") + e.what());
  }
  if (d.label < 0) throw ParseError("jsonl: document " + d.id + " has a negative label");
  return d;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<Document>& docs) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  for (const auto& d : docs) os << to_jsonl_line(d) << '\n';
  if (!os) throw IoError("write failed for " + path.string());
}

std::vector<Document> read_jsonl(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read " + path.string());
  std::vector<Document> docs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      docs.push_back(from_jsonl_line(line));
    } catch (const ParseError& e) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return docs;
}

int label_count(const std::vector<Document>& docs) {
  int k = 0;
  for (const auto& d : docs) k = std::max(k, d.label + 1);
  return k;
}

std::vector<std::string> texts_of(const std::vector<Document>& docs) {
  std::vector<std::string> out;
  out.reserve(docs.size());
  for (const auto& d : docs) out.push_back(d.text);
  return out;
}

std::vector<int> labels_of(const std::vector<Document>& docs) {
  std::vector<int> out;
  out.reserve(docs.size());
  for (const auto& d : docs) out.push_back(d.label);
  return out;
}

}  // namespace cure::corpus
