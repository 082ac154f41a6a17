#include "caseret/encoder.hpp"

#include <bit>
#include <cmath>
#include <cstring>

#include <nlohmann/json.hpp>

#include "caseret/error.hpp"
#include "caseret/io.hpp"
#include "caseret/rng.hpp"
#include "caseret/text.hpp"

namespace caseret {

double Embedding::norm() const {
  double s = 0.0;
  for (double x : values) s += x * x;
  return std::sqrt(s);
}

bool Embedding::is_unit(double tolerance) const {
  for (double x : values)
    if (!std::isfinite(x)) return false;
  return !values.empty() && std::abs(norm() - 1.0) <= tolerance;
}

std::vector<double> normalize(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) {
    if (!std::isfinite(x)) fail(ErrorKind::Encode, "vector has a non-finite entry");
    s += x * x;
  }
  const double n = std::sqrt(s);
  if (n < 1e-12) fail(ErrorKind::Encode, "cannot normalize a degenerate (near-zero) vector");
  std::vector<double> out(v.begin(), v.end());
  for (double& x : out) x /= n;
  return out;
}

std::uint32_t token_bucket(std::string_view token, std::size_t vocab_dim) {
  return static_cast<std::uint32_t>(text::fnv1a64(token) % vocab_dim);
}

SparseVector featurize(std::string_view text, std::size_t vocab_dim) {
  if (vocab_dim == 0) fail(ErrorKind::Contract, "vocabulary dimension must be positive");
  std::map<std::uint32_t, double> counts;
  for (const auto& token : text::tokenize(text)) counts[token_bucket(token, vocab_dim)] += 1.0;
  return {counts.begin(), counts.end()};
}

ToyEncoderModel ToyEncoderModel::init(std::size_t vocab_dim, std::size_t dim, std::uint64_t seed) {
  if (vocab_dim == 0 || dim == 0) fail(ErrorKind::Contract, "encoder dimensions must be positive");
  Rng rng(seed);
  std::vector<double> w(vocab_dim * dim);
  const double scale = 1.0 / std::sqrt(static_cast<double>(vocab_dim));
  for (double& x : w) x = rng.gaussian() * scale;
  return from_weights(vocab_dim, dim, seed, std::move(w));
}

ToyEncoderModel ToyEncoderModel::from_weights(std::size_t vocab_dim, std::size_t dim, std::uint64_t seed,
                                              std::vector<double> projection) {
  if (vocab_dim == 0 || dim == 0) fail(ErrorKind::Contract, "encoder dimensions must be positive");
  if (projection.size() != vocab_dim * dim) fail(ErrorKind::Shape, "projection size does not match V x D");
  for (double x : projection)
    if (!std::isfinite(x)) fail(ErrorKind::Numerical, "projection has a non-finite weight");
  ToyEncoderModel m;
  m.vocab_dim_ = vocab_dim;
  m.dim_ = dim;
  m.seed_ = seed;
  m.projection_ = std::move(projection);
  return m;
}

std::vector<double> ToyEncoderModel::project(const SparseVector& features) const {
  std::vector<double> z(dim_, 0.0);
  for (const auto& [bucket, count] : features) {
    const auto r = row(bucket);
    for (std::size_t d = 0; d < dim_; ++d) z[d] += count * r[d];
  }
  return z;
}

Embedding ToyEncoderModel::encode_text(std::string_view text) const {
  const auto features = featurize(text, vocab_dim_);
  if (features.empty()) fail(ErrorKind::Encode, "text has no tokens");
  return {normalize(project(features))};
}

namespace {

constexpr char kMagic[8] = {'C', 'R', 'T', 'O', 'Y', 'E', 'N', 'C'};
constexpr std::uint32_t kCheckpointVersion = 1;

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_u64(std::string_view in, std::size_t& pos) {
  if (pos + 8 > in.size()) fail(ErrorKind::Parse, "checkpoint is truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  pos += 8;
  return v;
}

}  // namespace

// Layout (little-endian): magic[8], u64 version, u64 V, u64 D, u64 seed,
// then V*D IEEE-754 doubles, row-major.
std::string ToyEncoderModel::serialize() const {
  std::string out(kMagic, sizeof kMagic);
  put_u64(out, kCheckpointVersion);
  put_u64(out, vocab_dim_);
  put_u64(out, dim_);
  put_u64(out, seed_);
  out.reserve(out.size() + projection_.size() * 8);
  for (double x : projection_) put_u64(out, std::bit_cast<std::uint64_t>(x));
  return out;
}

ToyEncoderModel ToyEncoderModel::deserialize(std::string_view bytes) {
  if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
    fail(ErrorKind::Parse, "not an encoder checkpoint");
  std::size_t pos = sizeof kMagic;
  if (get_u64(bytes, pos) != kCheckpointVersion) fail(ErrorKind::Parse, "unsupported checkpoint version");
  const auto vocab = get_u64(bytes, pos);
  const auto dim = get_u64(bytes, pos);
  const auto seed = get_u64(bytes, pos);
  if (vocab == 0 || dim == 0 || (bytes.size() - pos) / 8 != vocab * dim || (bytes.size() - pos) % 8 != 0)
    fail(ErrorKind::Parse, "checkpoint size does not match its header");
  std::vector<double> w(vocab * dim);
  for (double& x : w) x = std::bit_cast<double>(get_u64(bytes, pos));
  return from_weights(vocab, dim, seed, std::move(w));
}

void ToyEncoderModel::save(const std::filesystem::path& path) const { io::write_atomic(path, serialize()); }

ToyEncoderModel ToyEncoderModel::load(const std::filesystem::path& path) { return deserialize(io::read_file(path)); }

std::string concat_text(const ReformulatedCase& reformulated) {
  std::string out;
  for (const auto& sf : reformulated.subfacts) {
    if (!out.empty()) out += "\n\n";
    out += sf.text();
  }
  return out;
}

Embedding encode_subfact(const SubFact& subfact, const ToyEncoderModel& model) {
  try {
    return model.encode_text(subfact.text());
  } catch (const Error& e) {
    throw Error(e.kind(), "sub-fact " + subfact.crime + " of " + subfact.source_case_id + ": " + e.what());
  }
}

Embedding encode_concat(const ReformulatedCase& reformulated, const ToyEncoderModel& model) {
  if (reformulated.subfacts.empty()) fail(ErrorKind::Encode, "case " + reformulated.case_id + " has no sub-facts");
  return model.encode_text(concat_text(reformulated));
}

std::vector<Embedding> ToyEncoderProvider::encode_case(const ReformulatedCase& reformulated) const {
  std::vector<Embedding> out;
  out.reserve(reformulated.subfacts.size());
  for (const auto& sf : reformulated.subfacts) out.push_back(encode_subfact(sf, model_));
  return out;
}

void PrecomputedEmbeddings::add(const std::string& case_id, std::size_t subfact_index, Embedding embedding) {
  if (!embedding.is_unit(kLoadTolerance))
    fail(ErrorKind::Integrity, "embedding " + case_id + "#" + std::to_string(subfact_index) + " is not unit norm");
  // Stored re-normalized to the tighter unit tolerance.
  embedding.values = normalize(embedding.values);
  if (dim_ == 0) dim_ = embedding.dim();
  if (embedding.dim() != dim_) fail(ErrorKind::Shape, "embedding " + case_id + " has inconsistent dimension");
  if (!vectors_[case_id].emplace(subfact_index, std::move(embedding)).second)
    fail(ErrorKind::Integrity, "duplicate embedding " + case_id + "#" + std::to_string(subfact_index));
}

PrecomputedEmbeddings PrecomputedEmbeddings::load(const std::filesystem::path& path) {
  PrecomputedEmbeddings out;
  io::for_each_line(path, [&](std::string_view line, std::size_t number) {
    const auto trimmed = text::trim(line);
    if (trimmed.empty() || trimmed[0] == '#') return;
    try {
      const auto j = nlohmann::json::parse(line);
      out.add(j.at("case_id").get<std::string>(), j.at("subfact_index").get<std::size_t>(),
              {j.at("vector").get<std::vector<double>>()});
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::Parse, "line " + std::to_string(number) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(e.kind(), "line " + std::to_string(number) + ": " + e.what());
    }
  });
  return out;
}

std::vector<Embedding> PrecomputedEmbeddings::encode_case(const ReformulatedCase& reformulated) const {
  const auto it = vectors_.find(reformulated.case_id);
  if (it == vectors_.end()) fail(ErrorKind::Lookup, "no precomputed embeddings for case " + reformulated.case_id);
  std::vector<Embedding> out;
  for (std::size_t i = 0; i < reformulated.subfacts.size(); ++i) {
    const auto v = it->second.find(i);
    if (v == it->second.end())
      fail(ErrorKind::Lookup, "no precomputed embedding for " + reformulated.case_id + "#" + std::to_string(i));
    out.push_back(v->second);
  }
  return out;
}

std::string PrecomputedEmbeddings::serialize() const {
  std::string out;
  for (const auto& [case_id, vectors] : vectors_)
    for (const auto& [index, e] : vectors)
      out += nlohmann::json{{"case_id", case_id}, {"subfact_index", index}, {"vector", e.values}}.dump() + "\n";
  return out;
}

}  // namespace caseret
