#include "caseret/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <nlohmann/json.hpp>

#include "caseret/error.hpp"
#include "caseret/io.hpp"
#include "caseret/text.hpp"

namespace caseret {

namespace {

constexpr const char* kIndexFormat = "caseret-lexical-index";
constexpr int kIndexVersion = 1;

std::vector<std::string> distinct(std::span<const std::string> terms) {
  std::vector<std::string> out;
  std::set<std::string_view> seen;
  for (const auto& t : terms)
    if (seen.insert(t).second) out.push_back(t);
  return out;
}

}  // namespace

std::string_view to_string(LexicalMethod method) { return method == LexicalMethod::Bm25 ? "bm25" : "tfidf"; }

std::optional<LexicalMethod> parse_lexical_method(std::string_view s) {
  const auto n = text::normalize_name(s);
  if (n == "bm25") return LexicalMethod::Bm25;
  if (n == "tfidf" || n == "tf-idf") return LexicalMethod::TfIdf;
  return std::nullopt;
}

LexicalIndex::LexicalIndex(std::vector<Doc> docs) : docs_(std::move(docs)) {
  if (docs_.empty()) fail(ErrorKind::Integrity, "lexical index needs at least one document");
  std::sort(docs_.begin(), docs_.end(), [](const Doc& a, const Doc& b) { return a.id < b.id; });
  std::size_t total = 0;
  for (std::size_t k = 0; k < docs_.size(); ++k) {
    if (!by_id_.emplace(docs_[k].id, k).second) fail(ErrorKind::Integrity, "duplicate indexed doc " + docs_[k].id);
    total += docs_[k].length;
    for (const auto& [term, tf] : docs_[k].tf) {
      if (tf == 0) fail(ErrorKind::Integrity, "zero term frequency in doc " + docs_[k].id);
      ++df_[term];
    }
  }
  if (total == 0) fail(ErrorKind::Integrity, "lexical index has no tokens");
  avgdl_ = static_cast<double>(total) / static_cast<double>(docs_.size());
}

LexicalIndex LexicalIndex::from_texts(const std::vector<std::pair<std::string, std::string>>& docs) {
  std::vector<Doc> out;
  for (const auto& [id, body] : docs) {
    Doc d{id, 0, {}};
    for (auto& token : text::tokenize(body)) {
      ++d.tf[std::move(token)];
      ++d.length;
    }
    out.push_back(std::move(d));
  }
  return LexicalIndex(std::move(out));
}

LexicalIndex LexicalIndex::build(const Corpus& corpus) {
  std::vector<std::pair<std::string, std::string>> docs;
  for (const auto& c : corpus.cases())
    if (c.kind == CaseKind::Document) docs.emplace_back(c.id, c.fact());
  return from_texts(docs);
}

std::size_t LexicalIndex::df(const std::string& term) const {
  const auto it = df_.find(term);
  return it == df_.end() ? 0 : it->second;
}

const LexicalIndex::Doc& LexicalIndex::doc(std::string_view id) const {
  const auto it = by_id_.find(id);
  if (it == by_id_.end()) fail(ErrorKind::Lookup, "doc " + std::string(id) + " is not indexed");
  return docs_[it->second];
}

std::string LexicalIndex::serialize() const {
  nlohmann::json docs = nlohmann::json::array();
  for (const auto& d : docs_) {
    std::map<std::string, std::size_t> sorted(d.tf.begin(), d.tf.end());
    docs.push_back({{"id", d.id}, {"length", d.length}, {"tf", sorted}});
  }
  return nlohmann::json{{"format", kIndexFormat}, {"version", kIndexVersion}, {"docs", docs}}.dump() + "\n";
}

LexicalIndex LexicalIndex::deserialize(std::string_view json) {
  try {
    const auto j = nlohmann::json::parse(json);
    if (j.at("format") != kIndexFormat) fail(ErrorKind::Parse, "not a lexical index");
    if (j.at("version") != kIndexVersion)
      fail(ErrorKind::Parse, "unsupported lexical index version " + j.at("version").dump());
    std::vector<Doc> docs;
    for (const auto& d : j.at("docs")) {
      Doc doc{d.at("id").get<std::string>(), d.at("length").get<std::size_t>(), {}};
      std::size_t sum = 0;
      for (const auto& [term, tf] : d.at("tf").items()) {
        doc.tf[term] = tf.get<std::size_t>();
        sum += doc.tf[term];
      }
      if (sum != doc.length) fail(ErrorKind::Integrity, "doc " + doc.id + " length disagrees with its term counts");
      docs.push_back(std::move(doc));
    }
    return LexicalIndex(std::move(docs));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Parse, std::string("lexical index: ") + e.what());
  }
}

void LexicalIndex::save(const std::filesystem::path& path) const { io::write_atomic(path, serialize()); }

LexicalIndex LexicalIndex::load(const std::filesystem::path& path) { return deserialize(io::read_file(path)); }

double bm25_score(std::span<const std::string> query_terms, std::string_view doc_id, const LexicalIndex& index,
                  double k1, double b) {
  const auto& d = index.doc(doc_id);
  const double n = static_cast<double>(index.size());
  const double norm = k1 * (1.0 - b + b * static_cast<double>(d.length) / index.average_length());
  double score = 0.0;
  for (const auto& term : distinct(query_terms)) {
    const auto it = d.tf.find(term);
    if (it == d.tf.end()) continue;
    const double df = static_cast<double>(index.df(term));
    const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
    const double tf = static_cast<double>(it->second);
    score += idf * tf * (k1 + 1.0) / (tf + norm);
  }
  return score;
}

double tfidf_score(std::span<const std::string> query_terms, std::string_view doc_id, const LexicalIndex& index) {
  const auto& d = index.doc(doc_id);
  const double n = static_cast<double>(index.size());
  auto idf = [&](const std::string& term) {
    const auto df = index.df(term);
    return df == 0 ? 0.0 : std::log(n / static_cast<double>(df));
  };

  double doc_norm = 0.0;
  for (const auto& [term, tf] : d.tf) {
    const double w = (1.0 + std::log(static_cast<double>(tf))) * idf(term);
    doc_norm += w * w;
  }
  std::map<std::string, std::size_t> qtf;
  for (const auto& t : query_terms) ++qtf[t];
  double query_norm = 0.0, dot = 0.0;
  for (const auto& [term, tf] : qtf) {
    const double i = idf(term);
    const double wq = (1.0 + std::log(static_cast<double>(tf))) * i;
    query_norm += wq * wq;
    const auto it = d.tf.find(term);
    if (it != d.tf.end()) dot += wq * (1.0 + std::log(static_cast<double>(it->second))) * i;
  }
  if (doc_norm == 0.0 || query_norm == 0.0) return 0.0;
  return dot / (std::sqrt(doc_norm) * std::sqrt(query_norm));
}

std::vector<ScoredDoc> lexical_rank(LexicalMethod method, std::string_view query_text, const LexicalIndex& index,
                                    const std::vector<std::string>& candidates) {
  const auto terms = text::tokenize(query_text);
  std::vector<ScoredDoc> out;
  auto score = [&](const std::string& id) {
    out.push_back({id, method == LexicalMethod::Bm25 ? bm25_score(terms, id, index) : tfidf_score(terms, id, index)});
  };
  if (candidates.empty()) {
    for (const auto& d : index.docs()) score(d.id);
  } else {
    for (const auto& id : candidates) score(id);
  }
  sort_ranking(out);
  return out;
}

}  // namespace caseret
