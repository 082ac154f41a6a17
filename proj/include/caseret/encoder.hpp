#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "caseret/reformulate.hpp"

namespace caseret {

inline constexpr std::size_t kDefaultVocabDim = 4096;
inline constexpr std::size_t kDefaultEmbeddingDim = 64;
inline constexpr double kUnitNormTolerance = 1e-9;

struct Embedding {
  std::vector<double> values;

  std::size_t dim() const { return values.size(); }
  double norm() const;
  bool is_unit(double tolerance = kUnitNormTolerance) const;
  bool operator==(const Embedding&) const = default;
};

// v / ||v||_2. Throws Encode when ||v|| < 1e-12 or v is not finite.
std::vector<double> normalize(std::span<const double> v);

// Hashed bag of tokens: (bucket, count), sorted by bucket.
using SparseVector = std::vector<std::pair<std::uint32_t, double>>;

std::uint32_t token_bucket(std::string_view token, std::size_t vocab_dim);
SparseVector featurize(std::string_view text, std::size_t vocab_dim);

// Hashed bag-of-tokens linear projection, V x D, row-major by bucket.
class ToyEncoderModel {
 public:
  // Gaussian init with standard deviation 1/sqrt(V).
  static ToyEncoderModel init(std::size_t vocab_dim, std::size_t dim, std::uint64_t seed);
  static ToyEncoderModel from_weights(std::size_t vocab_dim, std::size_t dim, std::uint64_t seed,
                                      std::vector<double> projection);

  std::size_t vocab_dim() const { return vocab_dim_; }
  std::size_t dim() const { return dim_; }
  std::uint64_t seed() const { return seed_; }

  std::span<const double> weights() const { return projection_; }
  std::span<double> weights() { return projection_; }
  std::span<const double> row(std::size_t bucket) const { return {projection_.data() + bucket * dim_, dim_}; }
  std::span<double> row(std::size_t bucket) { return {projection_.data() + bucket * dim_, dim_}; }

  // Unnormalized projection^T * features.
  std::vector<double> project(const SparseVector& features) const;
  Embedding encode_text(std::string_view text) const;

  std::string serialize() const;
  static ToyEncoderModel deserialize(std::string_view bytes);
  void save(const std::filesystem::path& path) const;
  static ToyEncoderModel load(const std::filesystem::path& path);

  bool operator==(const ToyEncoderModel&) const = default;

 private:
  std::size_t vocab_dim_ = 0;
  std::size_t dim_ = 0;
  std::uint64_t seed_ = 0;
  std::vector<double> projection_;
};

std::string concat_text(const ReformulatedCase& reformulated);
Embedding encode_subfact(const SubFact& subfact, const ToyEncoderModel& model);
// Single-vector path: all sub-fact texts joined in order.
Embedding encode_concat(const ReformulatedCase& reformulated, const ToyEncoderModel& model);

// Source of sub-fact embeddings: a pure function of (case, model state) with a
// fixed dimension and unit-norm outputs.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::size_t dim() const = 0;
  virtual std::vector<Embedding> encode_case(const ReformulatedCase& reformulated) const = 0;
};

class ToyEncoderProvider : public EmbeddingProvider {
 public:
  explicit ToyEncoderProvider(const ToyEncoderModel& model) : model_(model) {}
  std::size_t dim() const override { return model_.dim(); }
  std::vector<Embedding> encode_case(const ReformulatedCase& reformulated) const override;

 private:
  const ToyEncoderModel& model_;
};

// Embeddings produced elsewhere, one JSON line per sub-fact:
// {"case_id", "subfact_index", "vector": [...]}.
class PrecomputedEmbeddings : public EmbeddingProvider {
 public:
  // Vectors must be unit norm within this tolerance on load.
  static constexpr double kLoadTolerance = 1e-6;

  static PrecomputedEmbeddings load(const std::filesystem::path& path);
  void add(const std::string& case_id, std::size_t subfact_index, Embedding embedding);

  std::size_t dim() const override { return dim_; }
  std::vector<Embedding> encode_case(const ReformulatedCase& reformulated) const override;
  std::string serialize() const;

 private:
  std::size_t dim_ = 0;
  std::map<std::string, std::map<std::size_t, Embedding>> vectors_;
};

}  // namespace caseret
