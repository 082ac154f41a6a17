#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "caseret/corpus.hpp"
#include "caseret/eval.hpp"

namespace caseret {

inline constexpr double kBm25K1 = 1.2;
inline constexpr double kBm25B = 0.75;

enum class LexicalMethod { Bm25, TfIdf };
std::string_view to_string(LexicalMethod method);
std::optional<LexicalMethod> parse_lexical_method(std::string_view s);

// Term statistics over document fact sections. Immutable after build.
class LexicalIndex {
 public:
  struct Doc {
    std::string id;
    std::size_t length = 0;
    std::unordered_map<std::string, std::size_t> tf;
  };

  // Indexes the fact section of every document case.
  static LexicalIndex build(const Corpus& corpus);
  // (doc id, text) pairs.
  static LexicalIndex from_texts(const std::vector<std::pair<std::string, std::string>>& docs);

  std::size_t size() const { return docs_.size(); }
  double average_length() const { return avgdl_; }
  std::size_t df(const std::string& term) const;
  const Doc& doc(std::string_view id) const;
  const std::vector<Doc>& docs() const { return docs_; }

  std::string serialize() const;
  static LexicalIndex deserialize(std::string_view json);
  void save(const std::filesystem::path& path) const;
  static LexicalIndex load(const std::filesystem::path& path);

 private:
  explicit LexicalIndex(std::vector<Doc> docs);

  std::vector<Doc> docs_;  // ordered by id
  std::map<std::string, std::size_t, std::less<>> by_id_;
  std::unordered_map<std::string, std::size_t> df_;
  double avgdl_ = 0.0;
};

// Query terms are de-duplicated; each distinct term contributes once.
double bm25_score(std::span<const std::string> query_terms, std::string_view doc_id, const LexicalIndex& index,
                  double k1 = kBm25K1, double b = kBm25B);

// Cosine of ltc vectors: (1 + ln tf) * ln(N / df), L2-normalized.
double tfidf_score(std::span<const std::string> query_terms, std::string_view doc_id, const LexicalIndex& index);

// Scores `candidates` (all indexed docs when empty) and sorts them.
std::vector<ScoredDoc> lexical_rank(LexicalMethod method, std::string_view query_text, const LexicalIndex& index,
                                    const std::vector<std::string>& candidates = {});

}  // namespace caseret
