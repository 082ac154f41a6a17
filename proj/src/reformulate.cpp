#include "caseret/reformulate.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <exception>
#include <fstream>
#include <set>
#include <thread>

#include <nlohmann/json.hpp>

#include "caseret/error.hpp"
#include "caseret/io.hpp"
#include "caseret/text.hpp"

namespace caseret {

using nlohmann::json;

namespace {

void warn(Warnings* warnings, std::string message) {
  if (warnings) warnings->push_back(std::move(message));
}

json parse_json_object(std::string_view json_text, const char* what) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::Parse, std::string(what) + ": " + e.what());
  }
  if (!j.is_object()) fail(ErrorKind::Parse, std::string(what) + ": expected a JSON object");
  return j;
}

}  // namespace

void ArticleStore::add(LawArticle article) {
  if (text::trim(article.article_id).empty()) fail(ErrorKind::Integrity, "article id is empty");
  if (text::trim(article.provision).empty())
    fail(ErrorKind::Integrity, "article " + article.article_id + " has no provision text");
  auto key = text::normalize_name(article.article_id);
  articles_.insert_or_assign(std::move(key), std::move(article));
}

const LawArticle* ArticleStore::find(std::string_view title) const {
  const auto it = articles_.find(text::normalize_name(title));
  return it == articles_.end() ? nullptr : &it->second;
}

ArticleStore parse_article_store(std::string_view json_text) {
  const json j = parse_json_object(json_text, "article store");
  ArticleStore store;
  for (const auto& [id, provision] : j.items()) {
    if (!provision.is_string()) fail(ErrorKind::Parse, "article store: provision of " + id + " is not a string");
    store.add({id, provision.get<std::string>()});
  }
  return store;
}

ArticleStore load_article_store(const std::filesystem::path& path) {
  return parse_article_store(io::read_file(path));
}

void CrimeArticleMap::add(std::string crime, std::vector<std::string> article_ids) {
  if (text::trim(crime).empty()) fail(ErrorKind::Integrity, "crime name is empty");
  if (article_ids.empty()) fail(ErrorKind::Integrity, "crime " + crime + " lists no articles");
  auto key = text::normalize_name(crime);
  if (index_.contains(key)) fail(ErrorKind::Integrity, "crime " + crime + " listed twice");
  index_.emplace(std::move(key), entries_.size());
  entries_.emplace_back(std::move(crime), std::move(article_ids));
}

const std::pair<std::string, std::vector<std::string>>* CrimeArticleMap::find(std::string_view crime) const {
  const auto it = index_.find(text::normalize_name(crime));
  return it == index_.end() ? nullptr : &entries_[it->second];
}

void CrimeArticleMap::validate(const ArticleStore& store) const {
  std::string missing;
  for (const auto& [crime, ids] : entries_)
    for (const auto& id : ids)
      if (!store.find(id)) missing += (missing.empty() ? "" : "; ") + crime + " -> " + id;
  if (!missing.empty()) fail(ErrorKind::Integrity, "crime map references unknown articles: " + missing);
}

CrimeArticleMap parse_crime_map(std::string_view json_text) {
  const json j = parse_json_object(json_text, "crime map");
  CrimeArticleMap map;
  for (const auto& [crime, ids] : j.items()) {
    try {
      map.add(crime, ids.get<std::vector<std::string>>());
    } catch (const json::exception&) {
      fail(ErrorKind::Parse, "crime map: articles of " + crime + " must be a list of strings");
    }
  }
  return map;
}

CrimeArticleMap load_crime_map(const std::filesystem::path& path) { return parse_crime_map(io::read_file(path)); }

std::string SubFact::text() const { return crime + "\n" + cause + "\n" + procedure + "\n" + outcome; }

void SubFact::validate() const {
  if (text::trim(crime).empty()) fail(ErrorKind::Integrity, "sub-fact of " + source_case_id + " has no crime title");
  if (cause.empty() && procedure.empty() && outcome.empty())
    fail(ErrorKind::Integrity, "sub-fact " + crime + " of " + source_case_id + " has no body");
  for (const auto* part : {&cause, &procedure, &outcome})
    if (text::word_count(*part) > kMaxPartWords)
      fail(ErrorKind::Integrity, "sub-fact " + crime + " of " + source_case_id + " exceeds 100 words in a part");
}

std::string_view to_string(ReformulationMode mode) { return mode == ReformulationMode::KGCR ? "KGCR" : "NS"; }

std::optional<ReformulationMode> parse_reformulation_mode(std::string_view s) {
  const auto n = text::normalize_name(s);
  if (n == "kgcr") return ReformulationMode::KGCR;
  if (n == "ns") return ReformulationMode::NS;
  return std::nullopt;
}

void ReformulatedCase::validate() const {
  if (subfacts.empty() || subfacts.size() > kMaxSubfacts)
    fail(ErrorKind::Integrity, "reformulated case " + case_id + " has " + std::to_string(subfacts.size()) +
                                   " sub-facts; expected 1 to 4");
  std::set<std::string> crimes;
  for (const auto& sf : subfacts) {
    sf.validate();
    if (!crimes.insert(text::normalize_name(sf.crime)).second)
      fail(ErrorKind::Integrity, "reformulated case " + case_id + " repeats crime " + sf.crime);
  }
}

std::string extraction_prompt() {
  return "Act as a criminal law analyst. Read the case below and list every offence named in the charges or "
         "the verdict, together with every statutory provision cited for them. Reply with two lines only: the "
         "offences on the first line and the provisions on the second, using semicolons between items.";
}

std::string summarization_prompt(const CrimeArticlePair& pair) {
  std::string provisions;
  for (const auto& a : pair.articles) {
    if (!provisions.empty()) provisions += "\n";
    provisions += a.article_id + ": " + a.provision;
  }
  return "Act as a criminal law analyst. The case below may describe several offences. Focus only on the "
         "offence named here and, using the cited provisions as a guide, state how it came about, how it was "
         "committed and how it ended. Keep each of the three parts within 100 words.\n\n"
         "[Crime]: " +
         pair.crime + "\n\n[Law Articles]: " + provisions +
         "\n\nAnswer in exactly three lines:\nCause: <causes>\nProcedure: <procedures>\nOutcome: <outcomes>";
}

std::string naive_summary_prompt() {
  return "Act as a criminal law analyst. Give a short one-paragraph account of the facts in the case below.";
}

namespace {

std::vector<std::string> split_list(std::string_view line) {
  // ASCII and full-width semicolons.
  std::string normalized;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line.substr(i, 3) == "\xEF\xBC\x9B") {
      normalized.push_back(';');
      i += 2;
    } else {
      normalized.push_back(line[i]);
    }
  }
  std::vector<std::string> items;
  std::set<std::string> seen;
  for (auto& part : text::split(normalized, ';')) {
    auto item = text::trim(part);
    if (item.empty()) continue;
    if (!seen.insert(text::normalize_name(item)).second) continue;
    items.push_back(std::move(item));
  }
  return items;
}

}  // namespace

Extraction parse_extraction(std::string_view response) {
  std::vector<std::string> lines;
  for (const auto& raw : text::split(response, '\n')) {
    auto line = text::trim(raw);
    if (!line.empty()) lines.push_back(std::move(line));
  }
  if (lines.size() != 2)
    throw Error(ErrorKind::Format,
                "extraction response must have two non-empty lines, got " + std::to_string(lines.size()), false,
                std::string(response));
  Extraction out{split_list(lines[0]), split_list(lines[1])};
  if (out.crimes.empty() || out.article_titles.empty())
    throw Error(ErrorKind::Format, "extraction response has an empty crime or article list", false,
                std::string(response));
  return out;
}

Extraction extract_crimes_articles(const LegalCase& legal_case, LlmClient& llm) {
  if (legal_case.fact().empty()) fail(ErrorKind::Contract, "case " + legal_case.id + " has no fact section");
  return parse_extraction(llm.complete({extraction_prompt(), legal_case.full_text(), legal_case.id}));
}

std::vector<CrimeArticlePair> expand_and_map(const std::vector<std::string>& crimes,
                                             const std::vector<std::string>& article_titles,
                                             const ArticleStore& store, const CrimeArticleMap& map,
                                             Warnings* warnings) {
  std::set<std::string> extracted;
  for (const auto& title : article_titles) {
    if (const auto* article = store.find(title))
      extracted.insert(text::normalize_name(article->article_id));
    else
      warn(warnings, "article title not found in store: " + title);
  }

  std::vector<CrimeArticlePair> pairs;
  std::set<std::string> seen;
  for (const auto& crime : crimes) {
    const auto* entry = map.find(crime);
    if (!entry) {
      warn(warnings, "crime not in crime-article map, dropped: " + crime);
      continue;
    }
    if (!seen.insert(text::normalize_name(entry->first)).second) continue;
    CrimeArticlePair pair{entry->first, {}};
    for (const auto& id : entry->second)
      if (extracted.contains(text::normalize_name(id))) pair.articles.push_back(*store.find(id));
    if (pair.articles.empty())
      for (const auto& id : entry->second) {
        const auto* article = store.find(id);
        if (!article) fail(ErrorKind::Integrity, "crime map article " + id + " missing from store");
        pair.articles.push_back(*article);
      }
    pairs.push_back(std::move(pair));
  }
  if (pairs.empty()) fail(ErrorKind::EmptyResult, "no extracted crime is present in the crime-article map");
  return pairs;
}

namespace {

enum class Part { None, Cause, Procedure, Outcome };

// Recognizes "Cause:", "Procedure:" or "Outcome:" (ASCII or full-width colon)
// at the start of a line, optionally after a list marker.
std::pair<Part, std::string> match_label(const std::string& line) {
  std::string_view rest = line;
  while (!rest.empty() && (rest.front() == '-' || rest.front() == '*' || rest.front() == ' ')) rest.remove_prefix(1);
  static constexpr std::pair<Part, std::string_view> labels[] = {
      {Part::Cause, "cause"}, {Part::Cause, "causes"}, {Part::Procedure, "procedure"},
      {Part::Procedure, "procedures"}, {Part::Outcome, "outcome"}, {Part::Outcome, "outcomes"}};
  for (const auto& [part, label] : labels) {
    if (rest.size() < label.size()) continue;
    bool same = true;
    for (std::size_t i = 0; i < label.size() && same; ++i)
      same = std::tolower(static_cast<unsigned char>(rest[i])) == label[i];
    if (!same) continue;
    auto after = rest.substr(label.size());
    while (!after.empty() && after.front() == ' ') after.remove_prefix(1);
    if (!after.empty() && after.front() == ':') return {part, text::trim(after.substr(1))};
    if (after.substr(0, 3) == "\xEF\xBC\x9A") return {part, text::trim(after.substr(3))};
  }
  return {Part::None, {}};
}

void append_text(std::string& dst, std::string_view more) {
  if (more.empty()) return;
  if (!dst.empty()) dst += " ";
  dst += more;
}

void cap_words(std::string& part, const char* name, const std::string& crime, const std::string& case_id,
               Warnings* warnings) {
  auto t = text::truncate_words(part, kMaxPartWords);
  if (t.truncated) {
    warn(warnings, "case " + case_id + ", " + crime + ": " + name + " truncated to 100 words");
    part = std::move(t.text);
  }
}

}  // namespace

SubFact parse_summary(std::string_view response, std::string crime, std::string case_id, Warnings* warnings) {
  const auto body = text::trim(response);
  if (body.empty()) throw Error(ErrorKind::Format, "empty summarization response", false, std::string(response));

  SubFact sf{std::move(crime), {}, {}, {}, std::move(case_id)};
  Part current = Part::None;
  bool labeled = false;
  std::string preamble;
  for (const auto& raw : text::split(body, '\n')) {
    const auto line = text::trim(raw);
    auto [part, rest] = match_label(line);
    if (part != Part::None) {
      labeled = true;
      current = part;
    } else {
      rest = line;
    }
    switch (current) {
      case Part::Cause: append_text(sf.cause, rest); break;
      case Part::Procedure: append_text(sf.procedure, rest); break;
      case Part::Outcome: append_text(sf.outcome, rest); break;
      case Part::None: append_text(preamble, rest); break;
    }
  }
  if (!labeled) sf.procedure = preamble;
  if (sf.cause.empty() && sf.procedure.empty() && sf.outcome.empty())
    throw Error(ErrorKind::Format, "summarization response has empty parts", false, std::string(response));
  cap_words(sf.cause, "cause", sf.crime, sf.source_case_id, warnings);
  cap_words(sf.procedure, "procedure", sf.crime, sf.source_case_id, warnings);
  cap_words(sf.outcome, "outcome", sf.crime, sf.source_case_id, warnings);
  return sf;
}

SubFact summarize_fact(const LegalCase& legal_case, const CrimeArticlePair& pair, LlmClient& llm,
                       Warnings* warnings) {
  if (pair.crime.empty() || pair.articles.empty()) fail(ErrorKind::Contract, "crime-article pair is incomplete");
  const auto response = llm.complete({summarization_prompt(pair), legal_case.full_text(), legal_case.id});
  return parse_summary(response, pair.crime, legal_case.id, warnings);
}

ReformulatedCase reformulate_case(const LegalCase& legal_case, LlmClient& llm, const ArticleStore& store,
                                  const CrimeArticleMap& map, ReformulationMode mode, Warnings* warnings) {
  ReformulatedCase out{legal_case.id, {}};
  if (mode == ReformulationMode::NS) {
    const auto response = llm.complete({naive_summary_prompt(), legal_case.full_text(), legal_case.id});
    out.subfacts.push_back(parse_summary(response, "summary", legal_case.id, warnings));
    return out;
  }

  const auto extraction = extract_crimes_articles(legal_case, llm);
  std::vector<CrimeArticlePair> pairs;
  try {
    pairs = expand_and_map(extraction.crimes, extraction.article_titles, store, map, warnings);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::EmptyResult) throw;
    warn(warnings, "case " + legal_case.id + ": no usable crimes, falling back to the fact section");
    auto fact = text::truncate_words(legal_case.fact(), kMaxPartWords);
    out.subfacts.push_back({"fact", "", std::move(fact.text), "", legal_case.id});
    return out;
  }
  if (pairs.size() > kMaxSubfacts) {
    for (std::size_t i = kMaxSubfacts; i < pairs.size(); ++i)
      warn(warnings, "case " + legal_case.id + ": crime beyond the cap of 4 dropped: " + pairs[i].crime);
    pairs.resize(kMaxSubfacts);
  }
  for (const auto& pair : pairs) out.subfacts.push_back(summarize_fact(legal_case, pair, llm, warnings));
  return out;
}

std::string serialize_cache_line(const ReformulatedCase& reformulated, ReformulationMode mode) {
  json subfacts = json::array();
  for (const auto& sf : reformulated.subfacts)
    subfacts.push_back({{"crime", sf.crime}, {"cause", sf.cause}, {"procedure", sf.procedure}, {"outcome", sf.outcome}});
  return json{{"case_id", reformulated.case_id}, {"mode", std::string(to_string(mode))}, {"subfacts", subfacts}}
      .dump();
}

ReformulationCache::ReformulationCache(std::filesystem::path path) : path_(std::move(path)) {
  if (!std::filesystem::exists(*path_)) return;
  io::for_each_line(*path_, [&](std::string_view line, std::size_t number) {
    if (text::trim(line).empty()) return;
    const auto where = path_->filename().string() + ":" + std::to_string(number) + ": ";
    ReformulatedCase rc;
    ReformulationMode mode{};
    try {
      const auto j = json::parse(line);
      rc.case_id = j.at("case_id").get<std::string>();
      const auto m = parse_reformulation_mode(j.at("mode").get<std::string>());
      if (!m) fail(ErrorKind::Parse, where + "unknown mode");
      mode = *m;
      for (const auto& s : j.at("subfacts"))
        rc.subfacts.push_back({s.at("crime").get<std::string>(), s.at("cause").get<std::string>(),
                               s.at("procedure").get<std::string>(), s.at("outcome").get<std::string>(),
                               rc.case_id});
    } catch (const json::exception& e) {
      fail(ErrorKind::Parse, where + e.what());
    }
    try {
      rc.validate();
    } catch (const Error& e) {
      throw Error(e.kind(), where + e.what());
    }
    // Later lines supersede earlier ones.
    entries_.insert_or_assign({rc.case_id, mode}, std::move(rc));
  });
}

std::optional<ReformulatedCase> ReformulationCache::find(std::string_view case_id, ReformulationMode mode) const {
  std::lock_guard lock(mutex_);
  const auto it = entries_.find({std::string(case_id), mode});
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void ReformulationCache::put(const ReformulatedCase& reformulated, ReformulationMode mode) {
  reformulated.validate();
  std::lock_guard lock(mutex_);
  if (path_) {
    std::ofstream out(*path_, std::ios::app | std::ios::binary);
    if (!out) fail(ErrorKind::Io, "cannot append to cache " + path_->string());
    out << serialize_cache_line(reformulated, mode) << '\n';
    out.flush();
    if (!out) fail(ErrorKind::Io, "short write to cache " + path_->string());
  }
  entries_.insert_or_assign({reformulated.case_id, mode}, reformulated);
}

std::size_t ReformulationCache::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

std::map<std::string, ReformulatedCase> ReformulationCache::entries(ReformulationMode mode) const {
  std::lock_guard lock(mutex_);
  std::map<std::string, ReformulatedCase> out;
  for (const auto& [key, rc] : entries_)
    if (key.second == mode) out.emplace(key.first, rc);
  return out;
}

std::vector<ReformulatedCase> reformulate_all(const std::vector<const LegalCase*>& cases, LlmClient& llm,
                                              const ArticleStore& store, const CrimeArticleMap& map,
                                              ReformulationCache& cache, const ReformulateOptions& options,
                                              ReformulateSummary* summary) {
  const std::size_t n = cases.size();
  std::vector<std::optional<ReformulatedCase>> results(n);
  std::vector<std::exception_ptr> errors(n);
  std::vector<Warnings> warnings(n);
  std::vector<char> hit(n, 0);
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        if (auto cached = cache.find(cases[i]->id, options.mode)) {
          results[i] = std::move(cached);
          hit[i] = 1;
          continue;
        }
        auto rc = reformulate_case(*cases[i], llm, store, map, options.mode, &warnings[i]);
        cache.put(rc, options.mode);
        results[i] = std::move(rc);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };

  const std::size_t threads = std::clamp<std::size_t>(options.max_parallel, 1, std::max<std::size_t>(n, 1));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  if (summary) {
    for (std::size_t i = 0; i < n; ++i) {
      if (errors[i]) continue;
      (hit[i] ? summary->cache_hits : summary->reformulated)++;
      summary->warnings.insert(summary->warnings.end(), warnings[i].begin(), warnings[i].end());
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::vector<ReformulatedCase> out;
  out.reserve(n);
  for (auto& r : results) out.push_back(std::move(*r));
  return out;
}

}  // namespace caseret
