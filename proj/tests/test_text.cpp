#include <doctest.h>

#include "caseret/text.hpp"

using namespace caseret;

TEST_CASE("tokenize lowercases and splits on punctuation") {
  CHECK(text::tokenize("The Crime, of ARSON!") == std::vector<std::string>{"the", "crime", "of", "arson"});
  CHECK(text::tokenize("").empty());
  CHECK(text::tokenize("  \t\n").empty());
}

TEST_CASE("tokenize emits each CJK character as a token") {
  // 放火罪 (arson), then an ASCII word.
  CHECK(text::tokenize("\xE6\x94\xBE\xE7\x81\xAB\xE7\xBD\xAA abc") ==
        std::vector<std::string>{"\xE6\x94\xBE", "\xE7\x81\xAB", "\xE7\xBD\xAA", "abc"});
}

TEST_CASE("word_count counts whitespace words and CJK characters") {
  CHECK(text::word_count("one two  three") == 3);
  CHECK(text::word_count("") == 0);
  CHECK(text::word_count("\xE6\x94\xBE\xE7\x81\xAB\xE7\xBD\xAA") == 3);
  // Full-width comma separates and is not counted.
  CHECK(text::word_count("\xE6\x94\xBE\xEF\xBC\x8C\xE7\x81\xAB") == 2);
  CHECK(text::word_count("mixed \xE6\x94\xBE\xE7\x81\xAB words") == 4);
}

TEST_CASE("truncate_words keeps exactly the first n words") {
  std::string long_text;
  for (int k = 0; k < 120; ++k) long_text += "w" + std::to_string(k) + " ";
  const auto t = text::truncate_words(long_text, 100);
  CHECK(t.truncated);
  CHECK(text::word_count(t.text) == 100);
  CHECK(t.text.rfind("w99") == t.text.size() - 3);

  const auto short_text = text::truncate_words("a b c", 100);
  CHECK_FALSE(short_text.truncated);
  CHECK(short_text.text == "a b c");
}

TEST_CASE("normalize_name trims, folds case and collapses whitespace") {
  CHECK(text::normalize_name("  The  Crime of\tArson ") == "the crime of arson");
}

TEST_CASE("fnv1a64 matches published test vectors") {
  CHECK(text::fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(text::fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(text::fnv1a64("foobar") == 0x85944171f73967e8ULL);
  CHECK(text::hex64(0xabcULL) == "0000000000000abc");
}

TEST_CASE("split keeps empty fields") {
  CHECK(text::split("a,,b", ',') == std::vector<std::string>{"a", "", "b"});
}
