#include "caseret/pipeline.hpp"

#include <algorithm>
#include <charconv>

#include <nlohmann/json.hpp>

#include "caseret/error.hpp"
#include "caseret/io.hpp"
#include "caseret/text.hpp"

namespace caseret {

const std::vector<std::string>& config_path_keys() {
  static const std::vector<std::string> keys{"corpus",     "qrels",         "pools",      "articles", "crime_map",
                                             "cache",      "checkpoint",    "lexical_index", "embeddings",
                                             "mock_llm",   "run",           "metrics",    "encoded"};
  return keys;
}

std::optional<std::filesystem::path> PipelineConfig::path(std::string_view key) const {
  const auto it = paths.find(std::string(key));
  if (it == paths.end()) return std::nullopt;
  return it->second;
}

const std::filesystem::path& PipelineConfig::require(std::string_view key) const {
  const auto it = paths.find(std::string(key));
  if (it == paths.end()) fail(ErrorKind::Config, "config key '" + std::string(key) + "' is not set");
  return it->second;
}

namespace {

template <typename T>
bool parse_number(std::string_view s, T& out) {
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

bool parse_real(const std::string& s, double& out) {
  try {
    std::size_t used = 0;
    out = std::stod(s, &used);
    return used == s.size();
  } catch (const std::exception&) {
    return false;
  }
}

bool parse_bool(const std::string& s, bool& out) {
  const auto n = text::normalize_name(s);
  if (n == "true" || n == "1" || n == "yes" || n == "on") return out = true, true;
  if (n == "false" || n == "0" || n == "no" || n == "off") return out = false, true;
  return false;
}

// Returns an error message, empty on success.
std::string apply(PipelineConfig& c, const std::string& key, const std::string& value,
                  const std::filesystem::path& base_dir) {
  const auto& path_keys = config_path_keys();
  if (std::find(path_keys.begin(), path_keys.end(), key) != path_keys.end()) {
    if (value.empty()) return key + ": empty path";
    std::filesystem::path p(value);
    c.paths[key] = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
    return {};
  }
  auto bad = [&] { return key + ": invalid value '" + value + "'"; };
  if (key == "vocab_dim") return parse_number(value, c.vocab_dim) && c.vocab_dim > 0 ? "" : bad();
  if (key == "dim") return parse_number(value, c.dim) && c.dim > 0 ? "" : bad();
  if (key == "max_parallel") return parse_number(value, c.max_parallel) && c.max_parallel > 0 ? "" : bad();
  if (key == "llm_attempts") return parse_number(value, c.llm_attempts) && c.llm_attempts > 0 ? "" : bad();
  if (key == "seed") return parse_number(value, c.train.seed) ? "" : bad();
  if (key == "steps") return parse_number(value, c.train.steps) ? "" : bad();
  if (key == "batch_size") return parse_number(value, c.train.batch_size) && c.train.batch_size >= 2 ? "" : bad();
  if (key == "tau") return parse_real(value, c.train.temperature) && c.train.temperature > 0 ? "" : bad();
  if (key == "alpha") return parse_real(value, c.train.alpha) && c.train.alpha >= 0 ? "" : bad();
  if (key == "lr") return parse_real(value, c.train.learning_rate) && c.train.learning_rate > 0 ? "" : bad();
  if (key == "case_loss") return parse_bool(value, c.train.case_loss) ? "" : bad();
  if (key == "subfact_loss") return parse_bool(value, c.train.subfact_loss) ? "" : bad();
  if (key == "mode") {
    const auto m = parse_reformulation_mode(value);
    if (!m) return bad() + " (expected kgcr or ns)";
    c.mode = *m;
    return {};
  }
  if (key == "dataset") {
    const auto r = parse_grade_rule(value);
    if (!r) return bad() + " (expected lecard or lecardv2)";
    c.grade_rule = *r;
    return {};
  }
  if (key == "aggregator") {
    const auto a = parse_aggregator(value);
    if (!a) return bad() + " (expected maxsim_sum, mean, kernel_pool, or single_vector)";
    c.train.aggregator = *a;
    return {};
  }
  if (key == "mean_mode") {
    const auto m = parse_mean_mode(value);
    if (!m) return bad() + " (expected grand or row_max)";
    c.train.mean_mode = *m;
    return {};
  }
  return "unknown key '" + key + "'";
}

[[noreturn]] void report(const std::vector<std::string>& errors) {
  std::string msg = "invalid configuration: ";
  for (std::size_t k = 0; k < errors.size(); ++k) msg += (k ? "; " : "") + errors[k];
  fail(ErrorKind::Config, msg);
}

}  // namespace

PipelineConfig parse_config(std::string_view text_in, const std::filesystem::path& base_dir) {
  PipelineConfig c;
  std::vector<std::string> errors;
  std::size_t number = 0;
  for (const auto& raw : text::split(text_in, '\n')) {
    ++number;
    auto line = raw;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = text::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      errors.push_back("line " + std::to_string(number) + ": expected key = value");
      continue;
    }
    const auto err = apply(c, text::trim(line.substr(0, eq)), text::trim(line.substr(eq + 1)), base_dir);
    if (!err.empty()) errors.push_back("line " + std::to_string(number) + ": " + err);
  }
  if (!errors.empty()) report(errors);
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::string contents;
  try {
    contents = io::read_file(path);
  } catch (const Error& e) {
    fail(ErrorKind::Config, std::string("cannot read config: ") + e.what());
  }
  return parse_config(contents, path.parent_path());
}

void apply_overrides(PipelineConfig& config, const std::vector<std::pair<std::string, std::string>>& overrides) {
  std::vector<std::string> errors;
  for (const auto& [key, value] : overrides) {
    const auto err = apply(config, key, value, {});
    if (!err.empty()) errors.push_back(err);
  }
  if (!errors.empty()) report(errors);
}

void check_paths(const PipelineConfig& config, const std::vector<std::string>& required,
                 const std::vector<std::string>& existing) {
  std::vector<std::string> errors;
  if (config.train.aggregator == Aggregator::SingleVector && config.path("embeddings"))
    errors.push_back("single_vector scoring cannot use precomputed sub-fact embeddings");
  for (const auto& key : required)
    if (!config.path(key)) errors.push_back(key + " is not set");
  for (const auto& key : existing) {
    const auto p = config.path(key);
    if (p && !std::filesystem::exists(*p)) errors.push_back(key + ": " + p->string() + " does not exist");
  }
  if (!errors.empty()) report(errors);
}

std::string artifact_header(const PipelineConfig& config, std::string_view artifact) {
  return "caseret " + std::string(artifact) + " seed=" + std::to_string(config.seed()) +
         " aggregator=" + std::string(to_string(config.train.aggregator)) +
         " mode=" + std::string(to_string(config.mode));
}

std::filesystem::path kernel_path(const std::filesystem::path& checkpoint) {
  auto p = checkpoint;
  p += ".kernels.json";
  return p;
}

void save_ranking_model(const RankingModel& model, const std::filesystem::path& checkpoint) {
  model.encoder.save(checkpoint);
  nlohmann::json kernels = nlohmann::json::array();
  for (const auto& k : model.kernels) kernels.push_back({{"mu", k.mu}, {"sigma", k.sigma}});
  io::write_atomic(kernel_path(checkpoint),
                   nlohmann::json{{"kernels", kernels}, {"weights", model.kernel_weights}}.dump() + "\n");
}

RankingModel load_ranking_model(const std::filesystem::path& checkpoint) {
  RankingModel model{ToyEncoderModel::load(checkpoint), default_kernels(), {}};
  model.kernel_weights.assign(model.kernels.size(), 0.0);
  const auto kp = kernel_path(checkpoint);
  if (!std::filesystem::exists(kp)) return model;
  try {
    const auto j = nlohmann::json::parse(io::read_file(kp));
    model.kernels.clear();
    for (const auto& k : j.at("kernels")) model.kernels.push_back({k.at("mu").get<double>(), k.at("sigma").get<double>()});
    model.kernel_weights = j.at("weights").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Parse, kp.string() + ": " + e.what());
  }
  if (model.kernel_weights.size() != model.kernels.size())
    fail(ErrorKind::Integrity, kp.string() + ": kernel and weight counts differ");
  return model;
}

CaseTable case_table(const ReformulationCache& cache, ReformulationMode mode) {
  CaseTable out;
  for (auto& [id, rc] : cache.entries(mode)) out.emplace(id, std::move(rc));
  return out;
}

std::vector<TrainingQuery> training_queries(const Judgments& judgments, GradeRule rule) {
  std::vector<TrainingQuery> out;
  for (const auto& qid : judgments.query_ids()) {
    TrainingQuery q{qid, {}};
    for (const auto& [doc, grade] : judgments.for_query(qid))
      if (binarize_grade(grade, rule)) q.positives.push_back(doc);
    if (!q.positives.empty()) out.push_back(std::move(q));
  }
  return out;
}

Scorer::Scorer(const CaseTable& cases, const RankingModel& model, Aggregator aggregator, MeanMode mean_mode,
               const PrecomputedEmbeddings* precomputed)
    : cases_(cases), model_(model), aggregator_(aggregator), mean_mode_(mean_mode), precomputed_(precomputed) {
  if (precomputed && aggregator == Aggregator::SingleVector)
    fail(ErrorKind::Config, "single_vector scoring cannot use precomputed sub-fact embeddings");
}

const ReformulatedCase& Scorer::lookup(const std::string& id) const {
  const auto it = cases_.find(id);
  if (it == cases_.end()) fail(ErrorKind::Lookup, "case " + id + " is missing from the reformulation cache");
  return it->second;
}

std::vector<Embedding> Scorer::embed(const ReformulatedCase& c) const {
  if (precomputed_) return precomputed_->encode_case(c);
  return ToyEncoderProvider(model_.encoder).encode_case(c);
}

SimilarityMatrix Scorer::matrix(const std::string& query_id, const std::string& doc_id) const {
  return similarity_matrix(embed(lookup(query_id)), embed(lookup(doc_id)));
}

double Scorer::score(const std::string& query_id, const std::string& doc_id) const {
  const auto& q = lookup(query_id);
  const auto& d = lookup(doc_id);
  if (aggregator_ == Aggregator::SingleVector || !precomputed_) return score_pair(q, d, model_, aggregator_, mean_mode_);
  const auto m = similarity_matrix(embed(q), embed(d));
  switch (aggregator_) {
    case Aggregator::MaxSimSum: return maxsim_sum(m).value;
    case Aggregator::Mean: return mean_aggregate(m, mean_mode_).value;
    default: return kernel_pool(m, model_.kernels, model_.kernel_weights).value;
  }
}

Explanation Scorer::explain(const std::string& query_id, const std::string& doc_id) const {
  const auto& q = lookup(query_id);
  const auto& d = lookup(doc_id);
  Explanation e{query_id, doc_id, aggregator_, similarity_matrix(embed(q), embed(d)), {}, {}, {}, 0.0};
  e.attributions = attribute_matches(e.matrix);
  for (const auto& sf : q.subfacts) e.query_crimes.push_back(sf.crime);
  for (const auto& sf : d.subfacts) e.doc_crimes.push_back(sf.crime);
  e.score = score(query_id, doc_id);
  return e;
}

std::vector<ScoredDoc> rank_pool(const CandidatePool& pool, const Scorer& scorer) {
  std::vector<ScoredDoc> out;
  out.reserve(pool.candidate_ids.size());
  for (const auto& id : pool.candidate_ids) out.push_back({id, scorer.score(pool.query_id, id)});
  sort_ranking(out);
  return out;
}

RankedRun rank_pools(const std::vector<CandidatePool>& pools, const Scorer& scorer, std::string tag) {
  RankedRun run{std::move(tag), {}};
  for (const auto& p : pools) run.queries[p.query_id] = rank_pool(p, scorer);
  return run;
}

std::string emit_explanation(const Explanation& explanation) {
  return explanation_to_json(explanation).dump(2) + "\n\n" + render_explanation(explanation);
}

}  // namespace caseret
