#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <algorithm>
#include <fstream>
#include <map>

#include "caseret/encoder.hpp"
#include "caseret/rng.hpp"
#include "caseret/text.hpp"
#include "support/expect.hpp"
#include "support/synthetic.hpp"

using namespace caseret;
using expect::error_kind;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "caseret_test_encoder";
  std::filesystem::create_directories(dir);
  return dir / name;
}

SubFact subfact(const std::string& crime, const std::string& text, const std::string& case_id = "c") {
  return {crime, "", text, "", case_id};
}

}  // namespace

TEST_CASE("featurize counts hashed tokens") {
  const auto f = featurize("a b a", 8);
  const auto ha = token_bucket("a", 8), hb = token_bucket("b", 8);
  if (ha == hb) {
    REQUIRE(f.size() == 1);
    CHECK(f[0].second == 3.0);
  } else {
    REQUIRE(f.size() == 2);
    for (const auto& [bucket, count] : f) CHECK(count == (bucket == ha ? 2.0 : 1.0));
  }
  CHECK(featurize("", 8).empty());
  CHECK(featurize("x y z", 4096) == featurize("x y z", 4096));
  CHECK(token_bucket("a", 4096) == text::fnv1a64("a") % 4096);
  CHECK(error_kind([] { featurize("a", 0); }) == ErrorKind::Contract);
}

TEST_CASE("featurize is order-invariant and additive") {
  Rng rng(2);
  for (int t = 0; t < 100; ++t) {
    std::vector<std::string> a, b;
    for (std::size_t k = 0; k < 1 + rng.below(10); ++k) a.push_back(synth::word(rng));
    for (std::size_t k = 0; k < 1 + rng.below(10); ++k) b.push_back(synth::word(rng));
    auto join = [](const std::vector<std::string>& w) {
      std::string s;
      for (const auto& x : w) s += x + " ";
      return s;
    };
    auto reversed = a;
    std::reverse(reversed.begin(), reversed.end());
    CHECK(featurize(join(a), 64) == featurize(join(reversed), 64));

    std::map<std::uint32_t, double> sum;
    for (const auto& [k, v] : featurize(join(a), 64)) sum[k] += v;
    for (const auto& [k, v] : featurize(join(b), 64)) sum[k] += v;
    const SparseVector expected(sum.begin(), sum.end());
    CHECK(featurize(join(a) + join(b), 64) == expected);
  }
}

TEST_CASE("normalize") {
  const std::vector<double> v{3, 4};
  const auto n = normalize(v);
  CHECK(n[0] == doctest::Approx(0.6));
  CHECK(n[1] == doctest::Approx(0.8));
  const std::vector<double> u{0.0, 1.0};
  CHECK(normalize(u) == u);
  const std::vector<double> zero{0.0, 0.0};
  CHECK(error_kind([&] { normalize(zero); }) == ErrorKind::Encode);
  const std::vector<double> nan{NAN, 1.0};
  CHECK(error_kind([&] { normalize(nan); }) == ErrorKind::Encode);
}

TEST_CASE("init is seeded with scale 1/sqrt(V)") {
  const auto a = ToyEncoderModel::init(1024, 16, 3);
  CHECK(a == ToyEncoderModel::init(1024, 16, 3));
  CHECK_FALSE(a == ToyEncoderModel::init(1024, 16, 4));
  double sq = 0.0;
  for (double w : a.weights()) sq += w * w;
  const double sd = std::sqrt(sq / static_cast<double>(a.weights().size()));
  CHECK(sd == doctest::Approx(1.0 / 32.0).epsilon(0.05));
}

TEST_CASE("encode_subfact yields unit vectors deterministically") {
  const auto model = ToyEncoderModel::init(kDefaultVocabDim, kDefaultEmbeddingDim, 1);
  Rng rng(5);
  for (int t = 0; t < 100; ++t) {
    const auto sf = subfact(synth::word(rng), synth::word(rng) + " " + synth::word(rng));
    const auto e = encode_subfact(sf, model);
    CHECK(e.dim() == kDefaultEmbeddingDim);
    CHECK(std::abs(e.norm() - 1.0) <= 1e-9);
    CHECK(encode_subfact(sf, model) == e);
  }
  CHECK(encode_subfact(subfact("x", "same"), model) == encode_subfact(subfact("x", "same", "other"), model));
}

TEST_CASE("zeroed weights make encoding fail") {
  auto model = ToyEncoderModel::init(64, 8, 1);
  const auto sf = subfact("arson", "fire");
  for (const auto& [bucket, _] : featurize(sf.text(), 64))
    for (auto& w : model.row(bucket)) w = 0.0;
  CHECK(error_kind([&] { encode_subfact(sf, model); }) == ErrorKind::Encode);
  CHECK(error_kind([&] { model.encode_text("  "); }) == ErrorKind::Encode);
}

TEST_CASE("concatenated encoding") {
  const auto model = ToyEncoderModel::init(kDefaultVocabDim, kDefaultEmbeddingDim, 2);
  const auto one = synth::make_case("c", {{"arson", "set fire to the house"}});
  CHECK(encode_concat(one, model) == encode_subfact(one.subfacts[0], model));

  const auto ab = synth::make_case("c", {{"arson", "fire house"}, {"theft", "stole money"}});
  const auto ba = synth::make_case("c", {{"theft", "stole money"}, {"arson", "fire house"}});
  CHECK(concat_text(ab) != concat_text(ba));
  const auto ea = encode_concat(ab, model), eb = encode_concat(ba, model);
  for (std::size_t k = 0; k < ea.dim(); ++k) CHECK(ea.values[k] == doctest::Approx(eb.values[k]).epsilon(1e-12));

  CHECK(error_kind([&] { encode_concat(ReformulatedCase{"empty", {}}, model); }) == ErrorKind::Encode);
}

TEST_CASE("checkpoint round-trip is bit-exact") {
  auto model = ToyEncoderModel::init(128, 8, 11);
  model.weights()[5] = 0.1 + 0.2;
  const auto bytes = model.serialize();
  CHECK(ToyEncoderModel::deserialize(bytes) == model);

  const auto path = temp_file("model.bin");
  model.save(path);
  const auto loaded = ToyEncoderModel::load(path);
  CHECK(loaded == model);
  CHECK(loaded.seed() == 11);

  CHECK(error_kind([&] { ToyEncoderModel::deserialize(bytes.substr(0, bytes.size() - 1)); }) == ErrorKind::Parse);
  CHECK(error_kind([] { ToyEncoderModel::deserialize("garbage"); }) == ErrorKind::Parse);
  CHECK(error_kind([] { ToyEncoderModel::from_weights(2, 2, 0, {1.0}); }) == ErrorKind::Shape);
}

TEST_CASE("provider contract holds for both providers") {
  const auto model = ToyEncoderModel::init(kDefaultVocabDim, kDefaultEmbeddingDim, 4);
  const ToyEncoderProvider toy(model);
  const auto c = synth::make_case("c", {{"arson", "fire"}, {"theft", "money"}});

  PrecomputedEmbeddings pre;
  const auto vectors = toy.encode_case(c);
  for (std::size_t i = 0; i < vectors.size(); ++i) pre.add("c", i, vectors[i]);

  for (const EmbeddingProvider* p : {static_cast<const EmbeddingProvider*>(&toy), static_cast<const EmbeddingProvider*>(&pre)}) {
    const auto e = p->encode_case(c);
    REQUIRE(e.size() == 2);
    for (const auto& v : e) {
      CHECK(v.dim() == p->dim());
      CHECK(v.is_unit());
    }
    CHECK(p->encode_case(c) == e);
  }
}

TEST_CASE("precomputed embeddings load and validate") {
  const auto path = temp_file("emb.jsonl");
  {
    std::ofstream out(path);
    out << "# produced elsewhere\n";
    out << R"({"case_id":"c","subfact_index":0,"vector":[0.6,0.8]})" << "\n";
    out << R"({"case_id":"c","subfact_index":1,"vector":[1.0,0.0]})" << "\n";
  }
  const auto pre = PrecomputedEmbeddings::load(path);
  CHECK(pre.dim() == 2);
  const auto c = synth::make_case("c", {{"a", "x"}, {"b", "y"}});
  CHECK(pre.encode_case(c)[1].values == std::vector<double>{1.0, 0.0});
  CHECK(error_kind([&] { pre.encode_case(synth::make_case("other", {{"a", "x"}})); }) == ErrorKind::Lookup);
  CHECK(error_kind([&] { pre.encode_case(synth::make_case("c", {{"a", "x"}, {"b", "y"}, {"d", "z"}})); }) ==
        ErrorKind::Lookup);

  std::ofstream(path) << R"({"case_id":"c","subfact_index":0,"vector":[3.0,4.0]})" << "\n";
  CHECK(error_kind([&] { PrecomputedEmbeddings::load(path); }) == ErrorKind::Integrity);
  std::ofstream(path) << R"({"case_id":"c","subfact_index":0,"vector":[1.0,0.0]})" << "\n"
                      << R"({"case_id":"d","subfact_index":0,"vector":[1.0,0.0,0.0]})" << "\n";
  CHECK(error_kind([&] { PrecomputedEmbeddings::load(path); }) == ErrorKind::Shape);
  std::ofstream(path) << R"({"case_id":"c","vector":[1.0,0.0]})" << "\n";
  CHECK(error_kind([&] { PrecomputedEmbeddings::load(path); }) == ErrorKind::Parse);

  PrecomputedEmbeddings dup;
  dup.add("c", 0, {{1.0, 0.0}});
  CHECK(error_kind([&] { dup.add("c", 0, {{0.0, 1.0}}); }) == ErrorKind::Integrity);
}
