#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace genderpair::text {

// ASCII case folding. Bytes >= 0x80 pass through unchanged.
std::string casefold(std::string_view s);

std::string_view trim_whitespace(std::string_view s);

// Strips whitespace, ASCII punctuation and common UTF-8 quotes/dashes/ellipsis from both ends.
std::string_view trim_punctuation(std::string_view s);

// Trims punctuation and collapses internal whitespace runs to one space. Case preserved.
std::string tidy_phrase(std::string_view s);

// tidy_phrase + casefold. Two phrases are "the same descriptor" iff their normalized forms are equal.
std::string normalize_phrase(std::string_view s);

bool contains_brace(std::string_view s);

// Whole-word, case-insensitive search. A hit must not be glued to a word character on either side.
// Word characters are ASCII alphanumerics, '_', and bytes >= 0x80; an apostrophe or hyphen also glues
// when it is itself followed (after the hit) or preceded (before the hit) by an alphanumeric.
// Whitespace inside the needle matches any whitespace run in the haystack.
struct WordHit {
  size_t pos;
  size_t len;
};
std::optional<WordHit> find_whole_word(std::string_view haystack, std::string_view needle, size_t from = 0);
size_t count_whole_word(std::string_view haystack, std::string_view needle);
inline bool contains_whole_word(std::string_view haystack, std::string_view needle) {
  return find_whole_word(haystack, needle).has_value();
}

std::vector<std::string> split(std::string_view s, char sep);

}  // namespace genderpair::text
