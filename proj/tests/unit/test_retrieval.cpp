#include "doctest.h"

#include <cmath>

#include "adaptmt/error.hpp"
#include "adaptmt/retrieval.hpp"

#include "../support/fixtures.hpp"
#include "../support/oracles.hpp"

using namespace adaptmt;

namespace {

constexpr auto kDim = HashedTrigramEmbedder::kDefaultDimension;
constexpr auto kSeed = HashedTrigramEmbedder::kDefaultSeed;

}  // namespace

TEST_SUITE("retrieval") {
  TEST_CASE("trigrams carry boundary markers and lowercase") {
    CHECK(HashedTrigramEmbedder::trigrams("Ab c") == std::vector<std::string>{"#ab", "ab ", "b c", " c#"});
    CHECK(HashedTrigramEmbedder::trigrams("a") == std::vector<std::string>{"#a#"});
    CHECK(HashedTrigramEmbedder::trigrams("é!") == std::vector<std::string>{"#é!", "é!#"});
  }

  TEST_CASE("embedding matches the dense reference") {
    HashedTrigramEmbedder e;
    for (const std::string s : {"Press the power button.", "  spaced   out  ", "x"}) {
      const auto got = e.embed(s);
      const auto want = oracle::ascii_trigram_embed(s, kDim, kSeed);
      REQUIRE(got.size() == want.size());
      double diff = 0, norm = 0;
      for (std::size_t i = 0; i < got.size(); ++i) {
        diff = std::max(diff, std::abs(got[i] - want[i]));
        norm += got[i] * got[i];
      }
      CHECK(diff <= 1e-12);
      CHECK(std::abs(norm - 1.0) < 1e-12);
    }
  }

  TEST_CASE("distinct trigram sets do not collide into identical vectors") {
    HashedTrigramEmbedder e;
    CHECK(cosine(e.embed("abcabc"), e.embed("xyzxyz")) < 0.5);
    CHECK(cosine(e.embed("abc"), e.embed("ABC")) == doctest::Approx(1.0));
  }

  TEST_CASE("index ranks equal the oracle including exact ties") {
    auto rows = fixtures::corpus(200, 4);
    rows.emplace_back(rows[3].first, "duplicate target");
    const auto tm = fixtures::tm_from(rows);
    const auto index = build_index(tm);
    std::vector<std::vector<double>> matrix;
    for (const auto& p : tm.pairs()) matrix.push_back(oracle::ascii_trigram_embed(p.source, kDim, kSeed));

    RetrievalConfig cfg;
    cfg.top_k = 10;
    for (std::size_t q = 0; q < 20; ++q) {
      const auto query = q == 0 ? rows[3].first : rows[q * 9].first + " extra";
      const auto got = index->retrieve(query, cfg);
      const auto want = oracle::cosine_top_k(matrix, oracle::ascii_trigram_embed(query, kDim, kSeed), 10);
      REQUIRE(got.size() == want.size());
      for (std::size_t r = 0; r < got.size(); ++r) {
        CHECK(got[r].pair.id == want[r].row + 1);
        CHECK(got[r].score == doctest::Approx(std::clamp(want[r].score, 0.0, 1.0)).epsilon(1e-12));
      }
    }
    const auto dup = index->retrieve(rows[3].first, cfg);
    CHECK(dup[0].pair.id == 4);
    CHECK(dup[1].pair.id == 201);
    CHECK(dup[0].score == dup[1].score);
  }

  TEST_CASE("self exclusion skips only the own row with the same source") {
    const auto tm = fixtures::tm_from(fixtures::corpus(50, 8));
    const auto index = build_index(tm);
    const auto p = tm.pairs()[10];
    RetrievalConfig cfg;
    cfg.exclude_exact_self = true;
    const auto with = index->retrieve(p.source, cfg, p.id);
    for (const auto& m : with) CHECK(m.pair.id != p.id);
    const auto other = index->retrieve(p.source, cfg, tm.pairs()[11].id);
    CHECK(other[0].pair.id == p.id);
    cfg.exclude_exact_self = false;
    CHECK(index->retrieve(p.source, cfg, p.id)[0].pair.id == p.id);
  }

  TEST_CASE("config validation and thresholds") {
    RetrievalConfig cfg;
    cfg.top_k = 0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg.top_k = 11;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg.allow_large_top_k = true;
    CHECK_NOTHROW(cfg.validate());

    const auto tm = fixtures::tm_from(fixtures::corpus(30, 2));
    const auto index = build_index(tm);
    RetrievalConfig strict;
    strict.min_similarity = 0.99;
    const auto m = index->retrieve(tm.pairs()[0].source, strict);
    REQUIRE(m.size() == 1);
    CHECK(m[0].pair.id == 1);
    TranslationMemory empty("e", LanguagePair::make("en", "fr"));
    CHECK_THROWS_AS(build_index(empty), Error);
  }

  TEST_CASE("extend_index equals a full rebuild") {
    auto rows = fixtures::corpus(60, 6);
    auto tm = fixtures::tm_from({rows.begin(), rows.begin() + 40});
    const auto base = build_index(tm);
    std::vector<SegmentPair> added;
    for (std::size_t i = 40; i < rows.size(); ++i) added.push_back(tm.add(rows[i].first, rows[i].second).first);
    const auto extended = extend_index(*base, added, tm.version());
    const auto rebuilt = build_index(tm);
    REQUIRE(extended->size() == rebuilt->size());
    const auto q = HashedTrigramEmbedder().embed(rows[50].first + " z");
    CHECK(extended->scores(q) == rebuilt->scores(q));
    CHECK(extended->tm_version() == tm.version());
  }

  TEST_CASE("bucket histogram equals direct comparison") {
    const std::vector<double> scores = {1.0, 0.95, 0.9, 0.899, 0.8, 0.75, 0.7, 0.65, 0.6, 0.55, 0.5, 0.49, 0.0};
    const auto got = bucket_stats(std::span<const double>(scores));
    const auto want = oracle::buckets(scores);
    for (std::size_t i = 0; i < BucketHistogram::kBuckets; ++i) CHECK(got.counts[i] == want[i]);
    CHECK(got.total() == scores.size());
  }

  TEST_CASE("index handle swaps snapshots") {
    IndexHandle h;
    CHECK(h.get() == nullptr);
    const auto tm = fixtures::tm_from(fixtures::corpus(5, 1));
    auto idx = build_index(tm);
    h.set(idx);
    CHECK(h.get() == idx);
  }
}
