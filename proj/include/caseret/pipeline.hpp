#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "caseret/corpus.hpp"
#include "caseret/encoder.hpp"
#include "caseret/eval.hpp"
#include "caseret/reformulate.hpp"
#include "caseret/scoring.hpp"
#include "caseret/training.hpp"

namespace caseret {

struct PipelineConfig {
  std::map<std::string, std::filesystem::path> paths;  // corpus, qrels, pools, articles, crime_map, ...
  std::size_t vocab_dim = kDefaultVocabDim;
  std::size_t dim = kDefaultEmbeddingDim;
  ReformulationMode mode = ReformulationMode::KGCR;
  GradeRule grade_rule = GradeRule::LeCaRD;
  std::size_t max_parallel = 4;
  int llm_attempts = 3;
  TrainConfig train;  // also carries the aggregator, mean mode, and root seed

  std::uint64_t seed() const { return train.seed; }
  std::optional<std::filesystem::path> path(std::string_view key) const;
  // Throws Config naming the key when it is unset.
  const std::filesystem::path& require(std::string_view key) const;
};

// Path keys recognized in config files.
const std::vector<std::string>& config_path_keys();

// Flat "key = value" lines; "#" starts a comment. Relative paths resolve
// against `base_dir`. Every bad line is reported in one Config error.
PipelineConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {});
PipelineConfig load_config(const std::filesystem::path& path);

// Applies key/value overrides with the same rules as the file; paths resolve
// against the working directory.
void apply_overrides(PipelineConfig& config, const std::vector<std::pair<std::string, std::string>>& overrides);

// Every listed path must be set; `existing` ones must also exist. Reports all
// problems in one Config error.
void check_paths(const PipelineConfig& config, const std::vector<std::string>& required,
                 const std::vector<std::string>& existing);

std::string artifact_header(const PipelineConfig& config, std::string_view artifact);

// Kernel-pooling parameters live next to the encoder checkpoint.
std::filesystem::path kernel_path(const std::filesystem::path& checkpoint);
void save_ranking_model(const RankingModel& model, const std::filesystem::path& checkpoint);
// Missing kernel file means default kernels with zero weights.
RankingModel load_ranking_model(const std::filesystem::path& checkpoint);

// Cached reformulations of one mode.
CaseTable case_table(const ReformulationCache& cache, ReformulationMode mode);

// Queries with at least one positive doc under `rule`, ordered by query id.
std::vector<TrainingQuery> training_queries(const Judgments& judgments, GradeRule rule);

class Scorer {
 public:
  Scorer(const CaseTable& cases, const RankingModel& model, Aggregator aggregator, MeanMode mean_mode,
         const PrecomputedEmbeddings* precomputed = nullptr);

  double score(const std::string& query_id, const std::string& doc_id) const;
  SimilarityMatrix matrix(const std::string& query_id, const std::string& doc_id) const;
  Explanation explain(const std::string& query_id, const std::string& doc_id) const;

 private:
  const ReformulatedCase& lookup(const std::string& id) const;
  std::vector<Embedding> embed(const ReformulatedCase& c) const;

  const CaseTable& cases_;
  const RankingModel& model_;
  Aggregator aggregator_;
  MeanMode mean_mode_;
  const PrecomputedEmbeddings* precomputed_;
};

// Scores every pooled candidate, best first, ties by doc id.
std::vector<ScoredDoc> rank_pool(const CandidatePool& pool, const Scorer& scorer);
RankedRun rank_pools(const std::vector<CandidatePool>& pools, const Scorer& scorer, std::string tag);

// JSON report followed by the text rendering.
std::string emit_explanation(const Explanation& explanation);

}  // namespace caseret
