// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cure::labeling {

/// Pa labels one review, Pb clusters raw concepts, Pc maps a raw concept to a
/// cluster.
enum class TemplateId { kPa, kPb, kPc };

inline constexpr TemplateId kAllTemplates[] = {TemplateId::kPa, TemplateId::kPb, TemplateId::kPc};

const char* to_string(TemplateId id);        // "Pa", "Pb", "Pc"
const char* file_name(TemplateId id);        // "pa.txt", ...
TemplateId template_from_string(std::string_view s);

class PromptTemplate {
 public:
  PromptTemplate(TemplateId id, std::string body);

  TemplateId id() const { return id_; }
  const std::string& body() const { return body_; }

  /// Slot names in order of first appearance, e.g. {"review"}.
  const std::vector<std::string>& slots() const { return slots_; }

  /// Substitutes every {slot}. Throws ConfigError if a slot is missing from
  /// `values` or `values` names a slot the template lacks.
  std::string render(const std::map<std::string, std::string>& values) const;

  /// Inverse of render: recovers slot values if `prompt` was rendered from
  /// this template, nullopt otherwise.
  std::optional<std::map<std::string, std::string>> match(std::string_view prompt) const;

 private:
  TemplateId id_;
  std::string body_;
  std::vector<std::string> slots_;
};

/// Compiled-in copy of prompts/<id>.txt.
const PromptTemplate& builtin_template(TemplateId id);

/// Reads `dir`/<file_name(id)>. Throws IoError when unreadable.
PromptTemplate load_template(TemplateId id, const std::filesystem::path& dir);

}  // namespace cure::labeling
