#include "caseret/text.hpp"

#include <cctype>
#include <cstdio>

namespace caseret::text {
namespace {

struct CodePoint {
  char32_t value;
  std::size_t length;
};

CodePoint decode(std::string_view s, std::size_t pos) {
  const auto b0 = static_cast<unsigned char>(s[pos]);
  auto cont = [&](std::size_t k) -> int {
    if (pos + k >= s.size()) return -1;
    const auto b = static_cast<unsigned char>(s[pos + k]);
    return (b & 0xC0) == 0x80 ? (b & 0x3F) : -1;
  };
  if (b0 < 0x80) return {b0, 1};
  if ((b0 & 0xE0) == 0xC0) {
    const int c1 = cont(1);
    if (c1 >= 0) return {static_cast<char32_t>(((b0 & 0x1F) << 6) | c1), 2};
  } else if ((b0 & 0xF0) == 0xE0) {
    const int c1 = cont(1), c2 = cont(2);
    if (c1 >= 0 && c2 >= 0) return {static_cast<char32_t>(((b0 & 0x0F) << 12) | (c1 << 6) | c2), 3};
  } else if ((b0 & 0xF8) == 0xF0) {
    const int c1 = cont(1), c2 = cont(2), c3 = cont(3);
    if (c1 >= 0 && c2 >= 0 && c3 >= 0)
      return {static_cast<char32_t>(((b0 & 0x07) << 18) | (c1 << 12) | (c2 << 6) | c3), 4};
  }
  // Invalid sequence: treat the byte as an opaque word character.
  return {0xFFFD, 1};
}

bool is_cjk(char32_t c) {
  return (c >= 0x3040 && c <= 0x30FF) ||    // kana
         (c >= 0x3400 && c <= 0x4DBF) ||    // ext A
         (c >= 0x4E00 && c <= 0x9FFF) ||    // unified ideographs
         (c >= 0xF900 && c <= 0xFAFF) ||    // compatibility ideographs
         (c >= 0x20000 && c <= 0x2FA1F);    // ext B and beyond
}

bool is_space(char32_t c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v' || c == 0x3000 ||
         c == 0x00A0;
}

bool is_cjk_punct(char32_t c) {
  return (c >= 0x3001 && c <= 0x303F) || (c >= 0xFF00 && c <= 0xFF0F) || (c >= 0xFF1A && c <= 0xFF20) ||
         (c >= 0xFF3B && c <= 0xFF40) || (c >= 0xFF5B && c <= 0xFF65) || (c >= 0x2010 && c <= 0x2027);
}

bool is_ascii_punct(char32_t c) { return c < 0x80 && std::ispunct(static_cast<int>(c)); }

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) tokens.push_back(std::move(current));
    current.clear();
  };
  for (std::size_t pos = 0; pos < text.size();) {
    const CodePoint cp = decode(text, pos);
    const std::string_view raw = text.substr(pos, cp.length);
    pos += cp.length;
    if (is_space(cp.value) || is_ascii_punct(cp.value) || is_cjk_punct(cp.value)) {
      flush();
    } else if (is_cjk(cp.value)) {
      flush();
      tokens.emplace_back(raw);
    } else if (cp.value < 0x80) {
      current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(cp.value))));
    } else {
      current.append(raw);
    }
  }
  flush();
  return tokens;
}

namespace {

// Calls on_word(end_byte_offset) once per word, in order; stops when it returns false.
template <typename F>
void scan_words(std::string_view text, F&& on_word) {
  bool in_run = false;
  std::size_t run_end = 0;
  for (std::size_t pos = 0; pos < text.size();) {
    const CodePoint cp = decode(text, pos);
    const std::size_t next = pos + cp.length;
    if (is_space(cp.value) || is_cjk_punct(cp.value)) {
      if (in_run && !on_word(run_end)) return;
      in_run = false;
    } else if (is_cjk(cp.value)) {
      if (in_run && !on_word(run_end)) return;
      in_run = false;
      if (!on_word(next)) return;
    } else {
      in_run = true;
      run_end = next;
    }
    pos = next;
  }
  if (in_run) on_word(run_end);
}

}  // namespace

std::size_t word_count(std::string_view text) {
  std::size_t n = 0;
  scan_words(text, [&](std::size_t) {
    ++n;
    return true;
  });
  return n;
}

Truncation truncate_words(std::string_view text, std::size_t max_words) {
  std::size_t n = 0;
  std::size_t cut = 0;
  bool over = false;
  scan_words(text, [&](std::size_t end) {
    if (n == max_words) {
      over = true;
      return false;
    }
    ++n;
    cut = end;
    return true;
  });
  if (!over) return {std::string(text), false};
  return {trim(text.substr(0, cut)), true};
}

std::string trim(std::string_view s) {
  const char* ws = " \t\n\r\f\v";
  const auto first = s.find_first_not_of(ws);
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(ws);
  return std::string(s.substr(first, last - first + 1));
}

std::string normalize_name(std::string_view s) {
  std::string out;
  bool pending_space = false;
  for (char c : trim(s)) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = true;
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto at = s.find(sep, start);
    parts.emplace_back(s.substr(start, at == std::string_view::npos ? std::string_view::npos : at - start));
    if (at == std::string_view::npos) break;
    start = at + 1;
  }
  return parts;
}

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

}  // namespace caseret::text
