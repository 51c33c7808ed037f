// SPDX-License-Identifier: Apache-2.0
#include "cure/labeling/text.hpp"

#include <algorithm>
#include <cctype>
#include <set>

namespace cure::labeling {

namespace {

bool is_space(unsigned char c) { return c == ' ' || (c >= '\t' && c <= '\r'); }

bool is_word_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '-';
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && is_space(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

std::string clean_text(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  for (unsigned char c : raw) {
    if (c >= 0x80) continue;
    if (is_space(c)) {
      pending_space = true;
      continue;
    }
    if (c < 0x20 || c == 0x7f) continue;
    if (pending_space && !out.empty()) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(c));
  }
  return out;
}

std::optional<std::string> normalize_concept(std::string_view reply) {
  std::string s;
  for (char c : trim(reply)) s.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  auto strip = [](char c) {
    return std::ispunct(static_cast<unsigned char>(c)) || is_space(static_cast<unsigned char>(c));
  };
  while (!s.empty() && strip(s.front())) s.erase(s.begin());
  while (!s.empty() && strip(s.back())) s.pop_back();
  if (s.empty() || !std::all_of(s.begin(), s.end(), is_word_char)) return std::nullopt;
  return s;
}

std::optional<std::vector<std::string>> parse_concept_list(std::string_view reply) {
  std::vector<std::string> items;
  std::set<std::string> seen;
  std::size_t start = 0;
  while (start <= reply.size()) {
    auto end = reply.find_first_of(",\n", start);
    if (end == std::string_view::npos) end = reply.size();
    std::string_view item = trim(reply.substr(start, end - start));
    start = end + 1;
    if (auto colon = item.find(':'); colon != std::string_view::npos) item = item.substr(0, colon);
    // "1." / "2)" / "-" / "*" prefixes.
    std::size_t k = 0;
    while (k < item.size() && std::isdigit(static_cast<unsigned char>(item[k]))) ++k;
    if (k > 0 && k < item.size() && (item[k] == '.' || item[k] == ')')) item.remove_prefix(k + 1);
    item = trim(item);
    if (!item.empty() && (item.front() == '-' || item.front() == '*')) item = trim(item.substr(1));
    if (item.empty()) continue;
    auto name = normalize_concept(item);
    if (!name || !seen.insert(*name).second) return std::nullopt;
    items.push_back(*name);
  }
  if (items.empty()) return std::nullopt;
  return items;
}

std::size_t edit_distance(std::string_view a, std::string_view b) {
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[b.size()];
}

std::string join(const std::vector<std::string>& items, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

}  // namespace cure::labeling
