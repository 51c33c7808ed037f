// SPDX-License-Identifier: Apache-2.0
#include "cure/labeling/prompts.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "cure/common/errors.hpp"

namespace cure::labeling {

namespace detail {
extern const std::string_view kPromptPa;
extern const std::string_view kPromptPb;
extern const std::string_view kPromptPc;
}  // namespace detail

namespace {

bool is_slot_char(char c) { return (c >= 'a' && c <= 'z') || c == ' ' || c == '_'; }

// Splits a body into alternating literal / slot pieces. Pieces at even
// positions are literals (possibly empty).
std::vector<std::string> split_pieces(const std::string& body) {
  std::vector<std::string> pieces;
  std::string lit;
  std::size_t i = 0;
  while (i < body.size()) {
    if (body[i] == '{') {
      auto close = body.find('}', i + 1);
      if (close != std::string::npos && close > i + 1 &&
          std::all_of(body.begin() + static_cast<long>(i) + 1,
                      body.begin() + static_cast<long>(close), is_slot_char)) {
        pieces.push_back(std::move(lit));
        lit.clear();
        pieces.push_back(body.substr(i + 1, close - i - 1));
        i = close + 1;
        continue;
      }
    }
    lit.push_back(body[i++]);
  }
  pieces.push_back(std::move(lit));
  return pieces;
}

}  // namespace

const char* to_string(TemplateId id) {
  switch (id) {
    case TemplateId::kPa: return "Pa";
    case TemplateId::kPb: return "Pb";
    case TemplateId::kPc: return "Pc";
  }
  return "?";
}

const char* file_name(TemplateId id) {
  switch (id) {
    case TemplateId::kPa: return "pa.txt";
    case TemplateId::kPb: return "pb.txt";
    case TemplateId::kPc: return "pc.txt";
  }
  return "?";
}

TemplateId template_from_string(std::string_view s) {
  for (auto id : kAllTemplates) {
    if (s == to_string(id)) return id;
  }
  throw ParseError("unknown prompt template id '" + std::string(s) + "'");
}

PromptTemplate::PromptTemplate(TemplateId id, std::string body) : id_(id), body_(std::move(body)) {
  auto pieces = split_pieces(body_);
  for (std::size_t i = 1; i < pieces.size(); i += 2) {
    if (std::find(slots_.begin(), slots_.end(), pieces[i]) == slots_.end()) {
      slots_.push_back(pieces[i]);
    }
  }
}

std::string PromptTemplate::render(const std::map<std::string, std::string>& values) const {
  for (const auto& [k, v] : values) {
    if (std::find(slots_.begin(), slots_.end(), k) == slots_.end()) {
      throw ConfigError(std::string("template ") + to_string(id_) + " has no slot {" + k + "}");
    }
  }
  auto pieces = split_pieces(body_);
  std::string out;
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    if (i % 2 == 0) {
      out += pieces[i];
      continue;
    }
    auto it = values.find(pieces[i]);
    if (it == values.end()) {
      throw ConfigError(std::string("template ") + to_string(id_) + ": slot {" + pieces[i] +
                        "} is unfilled");
    }
    out += it->second;
  }
  return out;
}

std::optional<std::map<std::string, std::string>> PromptTemplate::match(
    std::string_view prompt) const {
  auto pieces = split_pieces(body_);
  std::map<std::string, std::string> values;
  if (!prompt.starts_with(pieces[0])) return std::nullopt;
  std::size_t pos = pieces[0].size();
  for (std::size_t i = 1; i + 1 < pieces.size(); i += 2) {
    const std::string& next = pieces[i + 1];
    std::size_t end;
    if (i + 2 == pieces.size()) {
      // Last literal must be the suffix.
      if (prompt.size() < pos + next.size() || !prompt.ends_with(next)) return std::nullopt;
      end = prompt.size() - next.size();
    } else {
      end = prompt.find(next, pos);
      if (end == std::string_view::npos) return std::nullopt;
    }
    std::string value(prompt.substr(pos, end - pos));
    auto [it, fresh] = values.emplace(pieces[i], value);
    if (!fresh && it->second != value) return std::nullopt;
    pos = end + next.size();
  }
  if (pieces.size() == 1 && prompt.size() != pieces[0].size()) return std::nullopt;
  return values;
}

const PromptTemplate& builtin_template(TemplateId id) {
  static const PromptTemplate pa(TemplateId::kPa, std::string(detail::kPromptPa));
  static const PromptTemplate pb(TemplateId::kPb, std::string(detail::kPromptPb));
  static const PromptTemplate pc(TemplateId::kPc, std::string(detail::kPromptPc));
  switch (id) {
    case TemplateId::kPa: return pa;
    case TemplateId::kPb: return pb;
    case TemplateId::kPc: return pc;
  }
  return pa;
}

PromptTemplate load_template(TemplateId id, const std::filesystem::path& dir) {
  auto path = dir / file_name(id);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read prompt template " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return PromptTemplate(id, ss.str());
}

}  // namespace cure::labeling
