// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cure::labeling {

/// Drops every byte >= 0x80 and control characters, collapses whitespace
/// runs to one space and trims. May return "".
std::string clean_text(std::string_view raw);

/// Lowercases, trims whitespace and surrounding punctuation. Returns nullopt
/// unless the result is one token of [a-z0-9-].
std::optional<std::string> normalize_concept(std::string_view reply);

/// Parses a comma or newline separated list of one-word names. Bullets,
/// list numbering and text after ':' are ignored. Returns nullopt if any item
/// is not a single word, if a name repeats, or if the list is empty.
std::optional<std::vector<std::string>> parse_concept_list(std::string_view reply);

/// Levenshtein distance over bytes.
std::size_t edit_distance(std::string_view a, std::string_view b);

std::string join(const std::vector<std::string>& items, std::string_view sep);

}  // namespace cure::labeling
