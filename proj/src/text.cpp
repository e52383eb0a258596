#include "genderpair/text.hpp"

#include <array>
#include <cctype>

namespace genderpair::text {
namespace {

bool is_space(unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }
bool is_alnum(unsigned char c) { return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }
bool is_word(unsigned char c) { return is_alnum(c) || c == '_' || c >= 0x80; }
bool is_glue(unsigned char c) { return c == '\'' || c == '-'; }
unsigned char lower(unsigned char c) { return (c >= 'A' && c <= 'Z') ? static_cast<unsigned char>(c + 32) : c; }

// UTF-8 sequences treated as punctuation when trimming.
constexpr std::array<std::string_view, 9> kUtf8Punct = {
    "\xE2\x80\x98",  // left single quote
    "\xE2\x80\x99",  // right single quote
    "\xE2\x80\x9C",  // left double quote
    "\xE2\x80\x9D",  // right double quote
    "\xE2\x80\x93",  // en dash
    "\xE2\x80\x94",  // em dash
    "\xE2\x80\xA6",  // ellipsis
    "\xC2\xAB",      // guillemets
    "\xC2\xBB",
};

bool is_ascii_punct(unsigned char c) { return c < 0x80 && std::ispunct(c) != 0; }

}  // namespace

std::string casefold(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(lower(static_cast<unsigned char>(c)));
  return out;
}

std::string_view trim_whitespace(std::string_view s) {
  while (!s.empty() && is_space(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && is_space(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string_view trim_punctuation(std::string_view s) {
  bool changed = true;
  while (changed && !s.empty()) {
    changed = false;
    auto c = static_cast<unsigned char>(s.front());
    if (is_space(c) || is_ascii_punct(c)) {
      s.remove_prefix(1);
      changed = true;
      continue;
    }
    for (auto p : kUtf8Punct) {
      if (s.starts_with(p)) {
        s.remove_prefix(p.size());
        changed = true;
        break;
      }
    }
  }
  changed = true;
  while (changed && !s.empty()) {
    changed = false;
    auto c = static_cast<unsigned char>(s.back());
    if (is_space(c) || is_ascii_punct(c)) {
      s.remove_suffix(1);
      changed = true;
      continue;
    }
    for (auto p : kUtf8Punct) {
      if (s.ends_with(p)) {
        s.remove_suffix(p.size());
        changed = true;
        break;
      }
    }
  }
  return s;
}

std::string tidy_phrase(std::string_view s) {
  s = trim_punctuation(s);
  std::string out;
  out.reserve(s.size());
  bool in_space = false;
  for (char ch : s) {
    if (is_space(static_cast<unsigned char>(ch))) {
      in_space = true;
      continue;
    }
    if (in_space && !out.empty()) out.push_back(' ');
    in_space = false;
    out.push_back(ch);
  }
  return out;
}

std::string normalize_phrase(std::string_view s) { return casefold(tidy_phrase(s)); }

bool contains_brace(std::string_view s) { return s.find_first_of("{}") != std::string_view::npos; }

namespace {

// Matches needle at haystack[pos], case-insensitively, letting a needle space match a whitespace run.
// Returns the matched length in the haystack, or 0 on mismatch.
size_t match_at(std::string_view hay, size_t pos, std::string_view needle) {
  size_t h = pos;
  size_t n = 0;
  while (n < needle.size()) {
    auto nc = static_cast<unsigned char>(needle[n]);
    if (h >= hay.size()) return 0;
    auto hc = static_cast<unsigned char>(hay[h]);
    if (is_space(nc)) {
      if (!is_space(hc)) return 0;
      while (n < needle.size() && is_space(static_cast<unsigned char>(needle[n]))) ++n;
      while (h < hay.size() && is_space(static_cast<unsigned char>(hay[h]))) ++h;
      continue;
    }
    if (lower(hc) != lower(nc)) return 0;
    ++h;
    ++n;
  }
  return h - pos;
}

bool left_boundary(std::string_view hay, size_t pos) {
  if (pos == 0) return true;
  auto prev = static_cast<unsigned char>(hay[pos - 1]);
  if (is_word(prev)) return false;
  if (is_glue(prev) && pos >= 2 && is_alnum(static_cast<unsigned char>(hay[pos - 2]))) return false;
  return true;
}

bool right_boundary(std::string_view hay, size_t end) {
  if (end >= hay.size()) return true;
  auto next = static_cast<unsigned char>(hay[end]);
  if (is_word(next)) return false;
  if (is_glue(next) && end + 1 < hay.size() && is_alnum(static_cast<unsigned char>(hay[end + 1]))) return false;
  return true;
}

}  // namespace

std::optional<WordHit> find_whole_word(std::string_view haystack, std::string_view needle, size_t from) {
  needle = trim_whitespace(needle);
  if (needle.empty()) return std::nullopt;
  for (size_t pos = from; pos < haystack.size(); ++pos) {
    if (lower(static_cast<unsigned char>(haystack[pos])) != lower(static_cast<unsigned char>(needle[0]))) continue;
    size_t len = match_at(haystack, pos, needle);
    if (len == 0) continue;
    if (left_boundary(haystack, pos) && right_boundary(haystack, pos + len)) return WordHit{pos, len};
  }
  return std::nullopt;
}

size_t count_whole_word(std::string_view haystack, std::string_view needle) {
  size_t count = 0;
  size_t from = 0;
  while (auto hit = find_whole_word(haystack, needle, from)) {
    ++count;
    from = hit->pos + hit->len;
  }
  return count;
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    size_t pos = s.find(sep, start);
    out.emplace_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace genderpair::text
