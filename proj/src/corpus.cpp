#include "caseret/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "caseret/error.hpp"
#include "caseret/rng.hpp"
#include "caseret/text.hpp"

namespace caseret {

using nlohmann::json;

namespace {

constexpr std::pair<Section, std::string_view> kSectionNames[] = {
    {Section::Procedure, "procedure"}, {Section::Fact, "fact"},   {Section::Reasoning, "reasoning"},
    {Section::Decision, "decision"},   {Section::Tail, "tail"},
};

std::string at_line(std::size_t line) { return "line " + std::to_string(line) + ": "; }

}  // namespace

std::string_view to_string(CaseKind kind) { return kind == CaseKind::Query ? "query" : "document"; }

std::string_view to_string(Section section) {
  for (const auto& [s, name] : kSectionNames)
    if (s == section) return name;
  return "?";
}

std::string_view to_string(QueryType type) { return type == QueryType::Common ? "common" : "controversial"; }

std::string_view to_string(GradeRule rule) { return rule == GradeRule::LeCaRD ? "LeCaRD" : "LeCaRDv2"; }

std::optional<CaseKind> parse_case_kind(std::string_view s) {
  if (s == "query") return CaseKind::Query;
  if (s == "document") return CaseKind::Document;
  return std::nullopt;
}

std::optional<Section> parse_section(std::string_view s) {
  for (const auto& [section, name] : kSectionNames)
    if (name == s) return section;
  return std::nullopt;
}

std::optional<QueryType> parse_query_type(std::string_view s) {
  if (s == "common") return QueryType::Common;
  if (s == "controversial") return QueryType::Controversial;
  return std::nullopt;
}

std::optional<GradeRule> parse_grade_rule(std::string_view s) {
  const auto n = text::normalize_name(s);
  if (n == "lecard") return GradeRule::LeCaRD;
  if (n == "lecardv2") return GradeRule::LeCaRDv2;
  return std::nullopt;
}

const std::string* LegalCase::section(Section s) const {
  const auto it = sections.find(s);
  return it == sections.end() ? nullptr : &it->second;
}

const std::string& LegalCase::fact() const {
  static const std::string empty;
  const auto* f = section(Section::Fact);
  return f ? *f : empty;
}

std::string LegalCase::full_text() const {
  std::string out;
  for (const auto& [s, body] : sections) {
    if (body.empty()) continue;
    if (!out.empty()) out += "\n\n";
    out += body;
  }
  return out;
}

void LegalCase::validate() const {
  if (id.empty()) fail(ErrorKind::Integrity, "case id is empty");
  if (fact().empty()) fail(ErrorKind::Integrity, "case " + id + " has no fact section");
  if (kind == CaseKind::Query) {
    for (Section s : {Section::Reasoning, Section::Decision, Section::Tail}) {
      const auto* body = section(s);
      if (body && !body->empty())
        fail(ErrorKind::Integrity,
             "query case " + id + " carries a " + std::string(to_string(s)) + " section");
    }
  }
}

Corpus::Corpus(std::vector<LegalCase> cases) : cases_(std::move(cases)) {
  std::vector<std::string> duplicates;
  for (std::size_t i = 0; i < cases_.size(); ++i) {
    cases_[i].validate();
    if (!index_.emplace(cases_[i].id, i).second) duplicates.push_back(cases_[i].id);
  }
  if (!duplicates.empty()) {
    std::string list;
    for (const auto& d : duplicates) list += (list.empty() ? "" : ", ") + d;
    fail(ErrorKind::Integrity, "duplicate case ids: " + list);
  }
}

const LegalCase* Corpus::find(std::string_view id) const {
  const auto it = index_.find(std::string(id));
  return it == index_.end() ? nullptr : &cases_[it->second];
}

const LegalCase& Corpus::at(std::string_view id) const {
  const auto* c = find(id);
  if (!c) fail(ErrorKind::Lookup, "unknown case id " + std::string(id));
  return *c;
}

namespace {

LegalCase case_from_json(const json& j, std::size_t line) {
  if (!j.is_object()) fail(ErrorKind::Parse, at_line(line) + "expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key != "id" && key != "kind" && key != "sections" && key != "query_type")
      fail(ErrorKind::Parse, at_line(line) + "unexpected key \"" + key + "\"");
  }
  LegalCase c;
  if (!j.contains("id") || !j["id"].is_string()) fail(ErrorKind::Parse, at_line(line) + "missing string \"id\"");
  c.id = j["id"].get<std::string>();
  if (!j.contains("kind") || !j["kind"].is_string())
    fail(ErrorKind::Parse, at_line(line) + "missing string \"kind\"");
  const auto kind = parse_case_kind(j["kind"].get<std::string>());
  if (!kind) fail(ErrorKind::Parse, at_line(line) + "kind must be \"query\" or \"document\"");
  c.kind = *kind;
  if (!j.contains("sections") || !j["sections"].is_object())
    fail(ErrorKind::Parse, at_line(line) + "missing object \"sections\"");
  for (const auto& [key, value] : j["sections"].items()) {
    const auto s = parse_section(key);
    if (!s) fail(ErrorKind::Parse, at_line(line) + "unknown section \"" + key + "\"");
    if (!value.is_string()) fail(ErrorKind::Parse, at_line(line) + "section \"" + key + "\" is not a string");
    c.sections[*s] = value.get<std::string>();
  }
  if (j.contains("query_type") && !j["query_type"].is_null()) {
    if (!j["query_type"].is_string()) fail(ErrorKind::Parse, at_line(line) + "query_type is not a string");
    const auto t = parse_query_type(j["query_type"].get<std::string>());
    if (!t) fail(ErrorKind::Parse, at_line(line) + "query_type must be \"common\" or \"controversial\"");
    c.query_type = *t;
  }
  try {
    c.validate();
  } catch (const Error& e) {
    throw Error(e.kind(), at_line(line) + e.what());
  }
  return c;
}

json case_to_json(const LegalCase& c) {
  json sections = json::object();
  for (const auto& [s, body] : c.sections) sections[std::string(to_string(s))] = body;
  json j = {{"id", c.id}, {"kind", std::string(to_string(c.kind))}, {"sections", sections}};
  if (c.query_type) j["query_type"] = std::string(to_string(*c.query_type));
  return j;
}

}  // namespace

Corpus parse_corpus(std::istream& in) {
  std::vector<LegalCase> cases;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (text::trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      fail(ErrorKind::Parse, at_line(number) + e.what());
    }
    cases.push_back(case_from_json(j, number));
  }
  return Corpus(std::move(cases));
}

Corpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open corpus " + path.string());
  return parse_corpus(in);
}

std::string serialize_corpus(const Corpus& corpus) {
  std::string out;
  for (const auto& c : corpus.cases()) out += case_to_json(c).dump() + "\n";
  return out;
}

bool binarize_grade(int grade, GradeRule rule) {
  if (grade < 0 || grade > 3) fail(ErrorKind::Domain, "grade " + std::to_string(grade) + " outside [0, 3]");
  return rule == GradeRule::LeCaRD ? grade == 3 : grade >= 2;
}

Judgments::Judgments(const std::vector<RelevanceJudgment>& judgments) {
  for (const auto& j : judgments) {
    if (j.grade < 0 || j.grade > 3)
      fail(ErrorKind::Domain, "grade " + std::to_string(j.grade) + " for (" + j.query_id + ", " + j.doc_id +
                                  ") outside [0, 3]");
    auto& docs = by_query_[j.query_id];
    if (!docs.emplace(j.doc_id, j.grade).second)
      fail(ErrorKind::Integrity, "duplicate judgment for (" + j.query_id + ", " + j.doc_id + ")");
    ++count_;
  }
}

std::optional<int> Judgments::grade(std::string_view query_id, std::string_view doc_id) const {
  const auto q = by_query_.find(query_id);
  if (q == by_query_.end()) return std::nullopt;
  const auto d = q->second.find(std::string(doc_id));
  if (d == q->second.end()) return std::nullopt;
  return d->second;
}

int Judgments::grade_or_zero(std::string_view query_id, std::string_view doc_id) const {
  return grade(query_id, doc_id).value_or(0);
}

bool Judgments::is_positive(std::string_view query_id, std::string_view doc_id, GradeRule rule) const {
  return binarize_grade(grade_or_zero(query_id, doc_id), rule);
}

const std::map<std::string, int>& Judgments::for_query(std::string_view query_id) const {
  static const std::map<std::string, int> empty;
  const auto q = by_query_.find(query_id);
  return q == by_query_.end() ? empty : q->second;
}

std::vector<std::string> Judgments::query_ids() const {
  std::vector<std::string> ids;
  for (const auto& [q, docs] : by_query_) ids.push_back(q);
  return ids;
}

Judgments parse_judgments(std::istream& in) {
  std::vector<RelevanceJudgment> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty()) continue;
    const auto fields = text::split(line, '\t');
    if (fields.size() != 3) fail(ErrorKind::Parse, at_line(number) + "expected query_id<TAB>doc_id<TAB>grade");
    RelevanceJudgment j{text::trim(fields[0]), text::trim(fields[1]), 0};
    const auto g = text::trim(fields[2]);
    try {
      std::size_t used = 0;
      j.grade = std::stoi(g, &used);
      if (used != g.size()) throw std::invalid_argument(g);
    } catch (const std::exception&) {
      fail(ErrorKind::Parse, at_line(number) + "grade \"" + g + "\" is not an integer");
    }
    if (j.query_id.empty() || j.doc_id.empty()) fail(ErrorKind::Parse, at_line(number) + "empty id");
    out.push_back(std::move(j));
  }
  return Judgments(out);
}

Judgments load_judgments(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open judgments " + path.string());
  return parse_judgments(in);
}

void validate_pool(const CandidatePool& pool, const Corpus* corpus) {
  std::set<std::string_view> seen;
  for (const auto& id : pool.candidate_ids) {
    if (!seen.insert(id).second)
      fail(ErrorKind::Integrity, "pool for " + pool.query_id + " lists " + id + " twice");
    if (corpus && !corpus->contains(id))
      fail(ErrorKind::Integrity, "pool for " + pool.query_id + " references unknown case " + id);
  }
}

std::vector<CandidatePool> parse_pools(std::istream& in) {
  std::vector<CandidatePool> pools;
  std::set<std::string> queries;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (text::trim(line).empty()) continue;
    CandidatePool pool;
    try {
      const json j = json::parse(line);
      pool.query_id = j.at("query_id").get<std::string>();
      pool.candidate_ids = j.at("candidate_ids").get<std::vector<std::string>>();
    } catch (const json::exception& e) {
      fail(ErrorKind::Parse, at_line(number) + e.what());
    }
    if (!queries.insert(pool.query_id).second)
      fail(ErrorKind::Integrity, at_line(number) + "second pool for query " + pool.query_id);
    validate_pool(pool);
    pools.push_back(std::move(pool));
  }
  return pools;
}

std::vector<CandidatePool> load_pools(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open pools " + path.string());
  return parse_pools(in);
}

std::string serialize_pools(const std::vector<CandidatePool>& pools) {
  std::string out;
  for (const auto& p : pools) out += json{{"query_id", p.query_id}, {"candidate_ids", p.candidate_ids}}.dump() + "\n";
  return out;
}

CandidatePool supplement_pool(const CandidatePool& pool, const Judgments& judgments, GradeRule rule,
                              const std::vector<std::string>& bm25_ranking, std::uint64_t seed) {
  if (std::find(bm25_ranking.begin(), bm25_ranking.end(), pool.query_id) != bm25_ranking.end())
    fail(ErrorKind::Contract, "BM25 ranking for " + pool.query_id + " contains the query itself");
  const bool all_positive = std::all_of(pool.candidate_ids.begin(), pool.candidate_ids.end(), [&](const auto& id) {
    return judgments.is_positive(pool.query_id, id, rule);
  });
  if (!all_positive) return pool;

  const std::set<std::string_view> pooled(pool.candidate_ids.begin(), pool.candidate_ids.end());
  std::vector<std::string> eligible;
  const std::size_t last = std::min(bm25_ranking.size(), kSupplementLastRank);
  for (std::size_t rank = kSupplementFirstRank; rank <= last; ++rank) {
    const auto& id = bm25_ranking[rank - 1];
    if (pooled.contains(id) || judgments.is_positive(pool.query_id, id, rule)) continue;
    eligible.push_back(id);
  }
  if (eligible.size() < kSupplementCount)
    fail(ErrorKind::Contract, "pool supplementation for " + pool.query_id + " needs " +
                                  std::to_string(kSupplementCount) + " eligible docs in ranks " +
                                  std::to_string(kSupplementFirstRank) + "-" + std::to_string(kSupplementLastRank) +
                                  ", found " + std::to_string(eligible.size()) + " (short by " +
                                  std::to_string(kSupplementCount - eligible.size()) + ")");

  // Per-query stream so one root seed yields independent draws per query.
  Rng rng(seed ^ text::fnv1a64(pool.query_id));
  CandidatePool out = pool;
  for (std::size_t i : rng.sample_without_replacement(eligible.size(), kSupplementCount))
    out.candidate_ids.push_back(eligible[i]);
  return out;
}

}  // namespace caseret
