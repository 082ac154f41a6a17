#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace caseret::text {

// Lowercased tokens. ASCII punctuation and whitespace separate tokens; each
// CJK ideograph or kana is a token of its own.
std::vector<std::string> tokenize(std::string_view text);

// Words are whitespace-delimited runs of non-CJK text; every CJK character
// counts as one word. CJK punctuation separates words and is not counted.
std::size_t word_count(std::string_view text);

struct Truncation {
  std::string text;
  bool truncated = false;
};

// Keeps the prefix that ends with the max_words-th word.
Truncation truncate_words(std::string_view text, std::size_t max_words);

std::string trim(std::string_view s);

// Trimmed, ASCII case-folded, inner whitespace collapsed to one space.
std::string normalize_name(std::string_view s);

std::vector<std::string> split(std::string_view s, char sep);

std::uint64_t fnv1a64(std::string_view data);
std::string hex64(std::uint64_t value);

}  // namespace caseret::text
