#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include <nlohmann/json.hpp>

#include "caseret/baselines.hpp"
#include "caseret/corpus.hpp"
#include "caseret/encoder.hpp"
#include "caseret/error.hpp"
#include "caseret/eval.hpp"
#include "caseret/io.hpp"
#include "caseret/llm.hpp"
#include "caseret/pipeline.hpp"
#include "caseret/reformulate.hpp"
#include "caseret/training.hpp"

using namespace caseret;

namespace {

struct Options {
  std::string config_file;
  std::vector<std::pair<std::string, std::string>> overrides;
  std::vector<std::string> sets;
  bool disable_case_loss = false;
  bool disable_subfact_loss = false;

  std::string query_id, doc_id, output, method, supplemented_pools;
};

PipelineConfig resolve(const Options& o) {
  PipelineConfig config = o.config_file.empty() ? PipelineConfig{} : load_config(o.config_file);
  auto overrides = o.overrides;
  for (const auto& s : o.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) fail(ErrorKind::Usage, "--set expects key=value, got '" + s + "'");
    overrides.emplace_back(s.substr(0, eq), s.substr(eq + 1));
  }
  if (o.disable_case_loss) overrides.emplace_back("case_loss", "false");
  if (o.disable_subfact_loss) overrides.emplace_back("subfact_loss", "false");
  apply_overrides(config, overrides);
  return config;
}

void write_output(const std::string& path, const std::string& contents) {
  if (path.empty() || path == "-")
    std::cout << contents;
  else
    io::write_atomic(path, contents);
}

std::map<std::string, QueryType> query_types(const Corpus& corpus) {
  std::map<std::string, QueryType> out;
  for (const auto& c : corpus.cases())
    if (c.kind == CaseKind::Query) out[c.id] = c.effective_query_type();
  return out;
}

int cmd_reformulate(const Options& o) {
  const auto config = resolve(o);
  check_paths(config, {"corpus", "articles", "crime_map", "cache"}, {"corpus", "articles", "crime_map", "mock_llm"});
  const auto corpus = load_corpus(config.require("corpus"));
  const auto store = load_article_store(config.require("articles"));
  const auto map = load_crime_map(config.require("crime_map"));
  map.validate(store);

  std::unique_ptr<LlmClient> client;
  MockLlmClient* mock = nullptr;
  if (const auto dir = config.path("mock_llm")) {
    auto m = std::make_unique<MockLlmClient>(MockLlmClient::from_directory(*dir));
    mock = m.get();
    client = std::move(m);
  } else {
    const auto http = http_config_from_env();
    if (!http) fail(ErrorKind::Config, "no LLM configured: set mock_llm or " + std::string(kEnvLlmEndpoint));
    client = std::make_unique<HttpLlmClient>(*http);
  }
  RetryingLlmClient llm(*client, config.llm_attempts);

  ReformulationCache cache(config.require("cache"));
  std::vector<const LegalCase*> cases;
  for (const auto& c : corpus.cases()) cases.push_back(&c);
  ReformulateSummary summary;
  reformulate_all(cases, llm, store, map, cache, {config.mode, config.max_parallel}, &summary);
  for (const auto& w : summary.warnings) std::cerr << "warning: " << w << "\n";
  nlohmann::json out{{"cases", cases.size()},
                     {"cache_hits", summary.cache_hits},
                     {"reformulated", summary.reformulated},
                     {"mode", to_string(config.mode)}};
  if (mock) out["llm_calls"] = mock->calls();
  std::cout << out.dump() << "\n";
  return 0;
}

RankingModel model_for(const PipelineConfig& config) {
  const auto checkpoint = config.path("checkpoint");
  if (checkpoint && std::filesystem::exists(*checkpoint)) return load_ranking_model(*checkpoint);
  return RankingModel::init(config.vocab_dim, config.dim, config.seed());
}

int cmd_index(const Options& o) {
  const auto config = resolve(o);
  std::vector<std::string> required{"corpus", "lexical_index"};
  std::vector<std::string> existing{"corpus"};
  if (config.path("encoded")) {
    required.push_back("cache");
    existing.push_back("cache");
  }
  check_paths(config, required, existing);
  const auto corpus = load_corpus(config.require("corpus"));
  LexicalIndex::build(corpus).save(config.require("lexical_index"));
  nlohmann::json out{{"indexed_docs", LexicalIndex::load(config.require("lexical_index")).size()}};
  if (const auto encoded = config.path("encoded")) {
    const auto cache_path = config.require("cache");
    const ReformulationCache cache(cache_path);
    const auto cases = case_table(cache, config.mode);
    const auto model = model_for(config);
    const ToyEncoderProvider provider(model.encoder);
    PrecomputedEmbeddings vectors;
    for (const auto& c : corpus.cases()) {
      const auto it = cases.find(c.id);
      if (it == cases.end()) fail(ErrorKind::Lookup, "case " + c.id + " is missing from the reformulation cache");
      const auto embeddings = provider.encode_case(it->second);
      for (std::size_t k = 0; k < embeddings.size(); ++k) vectors.add(c.id, k, embeddings[k]);
    }
    io::write_atomic(*encoded, "# " + artifact_header(config, "encoded") + "\n" + vectors.serialize());
    out["encoded_cases"] = corpus.size();
  }
  std::cout << out.dump() << "\n";
  return 0;
}

int cmd_train(const Options& o) {
  const auto config = resolve(o);
  check_paths(config, {"cache", "qrels", "checkpoint"}, {"cache", "qrels"});
  config.train.validate();
  const ReformulationCache cache(config.require("cache"));
  const auto cases = case_table(cache, config.mode);
  const auto judgments = load_judgments(config.require("qrels"));
  const auto queries = training_queries(judgments, config.grade_rule);

  std::string log = "# " + artifact_header(config, "train-log") + "\n";
  auto model = RankingModel::init(config.vocab_dim, config.dim, config.seed());
  try {
    model = train(cases, queries, config.train, std::move(model),
                  [&](const LossReport& r) { log += loss_report_to_json(r).dump() + "\n"; });
  } catch (const TrainingDiverged& e) {
    log += loss_report_to_json(e.report()).dump() + "\n";
    io::write_atomic(config.require("checkpoint").string() + ".log.jsonl", log);
    throw;
  }
  save_ranking_model(model, config.require("checkpoint"));
  io::write_atomic(config.require("checkpoint").string() + ".log.jsonl", log);
  std::cout << nlohmann::json{{"steps", config.train.steps}, {"checkpoint", config.require("checkpoint").string()}}.dump()
            << "\n";
  return 0;
}

int cmd_rank(const Options& o) {
  const auto config = resolve(o);
  check_paths(config, {"cache", "pools", "run"}, {"cache", "pools", "checkpoint", "embeddings"});
  const ReformulationCache cache(config.require("cache"));
  const auto cases = case_table(cache, config.mode);
  const auto pools = load_pools(config.require("pools"));
  const auto model = model_for(config);
  std::optional<PrecomputedEmbeddings> precomputed;
  if (const auto p = config.path("embeddings")) precomputed = PrecomputedEmbeddings::load(*p);
  const Scorer scorer(cases, model, config.train.aggregator, config.train.mean_mode,
                      precomputed ? &*precomputed : nullptr);
  const auto run = rank_pools(pools, scorer, std::string(to_string(config.train.aggregator)));
  io::write_atomic(config.require("run"), serialize_trec_run(run, artifact_header(config, "run")));
  std::cout << nlohmann::json{{"queries", run.queries.size()}, {"run", config.require("run").string()}}.dump() << "\n";
  return 0;
}

int cmd_eval(const Options& o) {
  const auto config = resolve(o);
  check_paths(config, {"run", "qrels", "pools", "corpus"}, {"run", "qrels", "pools", "corpus"});
  const auto run = load_trec_run(config.require("run"));
  const auto report = evaluate_run(run, load_judgments(config.require("qrels")), load_pools(config.require("pools")),
                                   query_types(load_corpus(config.require("corpus"))), {config.grade_rule});
  for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
  auto json = metric_report_to_json(report);
  json["header"] = artifact_header(config, "metrics");
  if (const auto out = config.path("metrics")) {
    if (out->extension() == ".csv")
      io::write_atomic(*out, metric_report_to_csv(report));
    else
      io::write_atomic(*out, json.dump(2) + "\n");
  }
  std::cout << nlohmann::json(report.macro).dump() << "\n";
  return 0;
}

int cmd_explain(const Options& o) {
  const auto config = resolve(o);
  check_paths(config, {"cache"}, {"cache", "checkpoint", "embeddings"});
  const ReformulationCache cache(config.require("cache"));
  const auto cases = case_table(cache, config.mode);
  const auto model = model_for(config);
  std::optional<PrecomputedEmbeddings> precomputed;
  if (const auto p = config.path("embeddings")) precomputed = PrecomputedEmbeddings::load(*p);
  const Scorer scorer(cases, model, config.train.aggregator, config.train.mean_mode,
                      precomputed ? &*precomputed : nullptr);
  write_output(o.output, emit_explanation(scorer.explain(o.query_id, o.doc_id)));
  return 0;
}

int cmd_baseline(const Options& o) {
  const auto config = resolve(o);
  const auto method = parse_lexical_method(o.method);
  if (!method) fail(ErrorKind::Usage, "--method must be bm25 or tfidf");
  std::vector<std::string> required{"corpus", "pools", "run"};
  if (!o.supplemented_pools.empty()) required.push_back("qrels");
  check_paths(config, required, {"corpus", "pools", "qrels"});
  const auto corpus = load_corpus(config.require("corpus"));
  const auto index_path = config.path("lexical_index");
  const auto index = index_path && std::filesystem::exists(*index_path) ? LexicalIndex::load(*index_path)
                                                                         : LexicalIndex::build(corpus);
  auto pools = load_pools(config.require("pools"));
  if (!o.supplemented_pools.empty()) {
    const auto judgments = load_judgments(config.require("qrels"));
    for (auto& pool : pools) {
      const auto full = lexical_rank(LexicalMethod::Bm25, corpus.at(pool.query_id).fact(), index);
      auto ranking = doc_ids(full);
      std::erase(ranking, pool.query_id);
      pool = supplement_pool(pool, judgments, config.grade_rule, ranking, config.seed());
    }
    io::write_atomic(o.supplemented_pools, serialize_pools(pools));
  }
  RankedRun run{std::string(to_string(*method)), {}};
  for (const auto& pool : pools)
    run.queries[pool.query_id] = lexical_rank(*method, corpus.at(pool.query_id).fact(), index, pool.candidate_ids);
  io::write_atomic(config.require("run"), serialize_trec_run(run, artifact_header(config, "run")));
  std::cout << nlohmann::json{{"queries", run.queries.size()}, {"method", run.tag}}.dump() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Legal case retrieval over crime-level sub-facts"};
  app.require_subcommand(1);
  Options o;

  app.add_option("--config", o.config_file, "Flat key = value configuration file");
  app.add_option("--set", o.sets, "Override any config key: key=value (repeatable)")->allow_extra_args(false);
  auto add_override = [&](const std::string& flag, const std::string& key, const std::string& help) {
    app.add_option_function<std::string>(flag, [&o, key](const std::string& v) { o.overrides.emplace_back(key, v); },
                                         help);
  };
  for (const auto& key : config_path_keys()) {
    std::string flag = "--" + key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    add_override(flag, key, key == "mock_llm" ? "Serve LLM responses from fixture files in this directory" : key + " path");
  }
  add_override("--seed", "seed", "Root seed");
  add_override("--tau", "tau", "Softmax temperature");
  add_override("--alpha", "alpha", "Sub-fact loss weight");
  add_override("--steps", "steps", "Training steps");
  add_override("--batch-size", "batch_size", "Queries per batch");
  add_override("--lr", "lr", "Learning rate");
  add_override("--aggregator", "aggregator", "maxsim_sum | mean | kernel_pool | single_vector");
  add_override("--mean-mode", "mean_mode", "grand | row_max");
  add_override("--mode", "mode", "kgcr | ns");
  add_override("--dataset", "dataset", "lecard | lecardv2");
  app.add_flag("--disable-case-loss", o.disable_case_loss, "Train without the case-level loss");
  app.add_flag("--disable-subfact-loss", o.disable_subfact_loss, "Train without the sub-fact-level loss");

  std::function<int()> run;
  app.add_subcommand("reformulate", "Reformulate every case into crime sub-facts")->callback([&] {
    run = [&] { return cmd_reformulate(o); };
  });
  app.add_subcommand("index", "Build the lexical index and optionally encode cached sub-facts")->callback([&] {
    run = [&] { return cmd_index(o); };
  });
  app.add_subcommand("train", "Train the toy encoder")->callback([&] { run = [&] { return cmd_train(o); }; });
  app.add_subcommand("rank", "Rank candidate pools")->callback([&] { run = [&] { return cmd_rank(o); }; });
  app.add_subcommand("eval", "Evaluate a run file")->callback([&] { run = [&] { return cmd_eval(o); }; });
  auto* explain = app.add_subcommand("explain", "Explain one query-document score");
  explain->add_option("--query", o.query_id)->required();
  explain->add_option("--doc", o.doc_id)->required();
  explain->add_option("--output", o.output, "Report path (stdout when omitted)");
  explain->callback([&] { run = [&] { return cmd_explain(o); }; });
  auto* baseline = app.add_subcommand("baseline", "Rank pools with BM25 or TF-IDF");
  baseline->add_option("--method", o.method)->required();
  baseline->add_option("--supplemented-pools", o.supplemented_pools, "Write pools supplemented from BM25 ranks");
  baseline->callback([&] { run = [&] { return cmd_baseline(o); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  try {
    return run();
  } catch (const Error& e) {
    std::cerr << "caseret: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "caseret: " << e.what() << "\n";
    return 2;
  }
}
