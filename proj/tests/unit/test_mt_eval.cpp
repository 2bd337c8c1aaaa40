#include "doctest.h"

#include "adaptmt/error.hpp"
#include "adaptmt/evaluation.hpp"
#include "adaptmt/mt_bridge.hpp"

#include "../support/fixtures.hpp"
#include "../support/stub_server.hpp"

using namespace adaptmt;

namespace {

double bleu1(const std::string& h, const std::string& r) {
  const std::vector<std::string> hs = {h}, rs = {r};
  return corpus_bleu(hs, rs).value;
}

}  // namespace

TEST_SUITE("mt_bridge") {
  TEST_CASE("fixture lookups fail per item") {
    auto mt = FixtureMtProvider::from_jsonl("{\"source\":\"hello\",\"target\":\"bonjour\"}\n");
    const std::vector<std::string> texts = {"hello", "unknown", "hello"};
    const auto out = mt_translate(texts, *mt);
    REQUIRE(out.size() == 3);
    CHECK(out[0].text == "bonjour");
    CHECK_FALSE(out[1].ok());
    CHECK(out[2].text == "bonjour");
    CHECK_THROWS_AS(mt_translate({}, *mt), Error);
  }

  TEST_CASE("http provider chunks and aligns") {
    stub::Server s;
    HttpMtProvider mt("stub", s.url("/translate"), LanguagePair::make("en", "fr"), 2);
    std::vector<std::string> texts = {"a", "b", "c", "d", "e"};
    const auto out = mt.translate(texts);
    REQUIRE(out.size() == 5);
    CHECK(out[4].text == "MT(e)");
    CHECK(s.mt_requests() == 3);
    CHECK(mt.healthy());
  }

  TEST_CASE("http failure marks every item") {
    stub::Server s;
    s.mt_status(500);
    HttpMtProvider mt("stub", s.url("/translate"), LanguagePair::make("en", "fr"));
    std::vector<std::string> texts = {"a", "b"};
    const auto out = mt.translate(texts);
    CHECK_FALSE(out[0].ok());
    CHECK_FALSE(out[1].ok());
  }
}

TEST_SUITE("evaluation") {
  TEST_CASE("tokenizer splits punctuation") {
    CHECK(eval_tokenize("Hello, world!") == std::vector<std::string>{"Hello", ",", "world", "!"});
  }

  TEST_CASE("hand-derived BLEU values") {
    CHECK(bleu1("the cat sat on the mat", "the cat sat on the mat") == 100.0);
    CHECK(bleu1("the cat sat on mat", "the cat sat on the mat") == doctest::Approx(65.11).epsilon(0.0002));
    CHECK(bleu1("Hello, world!", "Hello world!") == doctest::Approx(50.0).epsilon(0.0002));
    CHECK(bleu1("abc", "xyz") == 0.0);
    CHECK(bleu1("", "xyz") == 0.0);
    const std::vector<std::string> hs = {"the quick brown fox jumps", "a lazy dog sleeps today"};
    const std::vector<std::string> rs = {"the quick brown fox leaps", "the lazy dog sleeps today"};
    CHECK(corpus_bleu(hs, rs).value == doctest::Approx(100.0 * std::pow(4.0 / 15.0, 0.25)).epsilon(1e-9));
  }

  TEST_CASE("hand-derived chrF values") {
    const std::vector<std::string> h1 = {"abcd"}, r1 = {"abce"};
    CHECK(chrf(h1, r1).value == doctest::Approx(47.9167).epsilon(1e-4));
    CHECK(chrf(h1, r1, 6, 2).value == doctest::Approx(38.3333).epsilon(1e-4));
    const std::vector<std::string> h2 = {"ab"}, r2 = {"abc"};
    CHECK(chrf(h2, r2).value == doctest::Approx(63.6364).epsilon(1e-4));
    CHECK(chrf(h2, r2, 6, 2).value == doctest::Approx(42.4242).epsilon(1e-4));
    CHECK(chrf(r1, r1).value == 100.0);
  }

  TEST_CASE("input validation") {
    const std::vector<std::string> one = {"a"}, two = {"a", "b"}, none;
    CHECK_THROWS_AS(corpus_bleu(one, two), Error);
    CHECK_THROWS_AS(corpus_bleu(none, none), Error);
    CHECK_THROWS_AS(chrf(one, two), Error);
  }

  TEST_CASE("report rows and csv") {
    const std::vector<std::string> refs = {"a b c d", "e f g h"};
    const std::vector<RunOutputs> runs = {{"perfect", refs}, {"empty", {"", ""}}};
    const auto rep = report(runs, refs);
    REQUIRE(rep.rows.size() == 6);
    const auto csv = rep.to_csv();
    CHECK(csv.rfind("run_label,metric,value,n_segments,params\n", 0) == 0);
    CHECK(csv.find("perfect,bleu,100.00") != std::string::npos);
    CHECK(rep.to_table().find("perfect") != std::string::npos);
    const std::vector<RunOutputs> bad = {{"short", {"a"}}};
    CHECK_THROWS_AS(report(bad, refs), Error);
  }

  TEST_CASE("report output is byte-stable") {
    const std::vector<std::string> refs = {"the cat sat on the mat", "Hello world!", "the lazy dog sleeps today"};
    const std::vector<RunOutputs> runs = {
        {"few_shot_fuzzy", {"the cat sat on mat", "Hello, world!", "a lazy dog sleeps today"}},
        {"zero_shot", {"a cat is on a mat", "Hi world", "the dog sleeps"}}};
    const auto rep = report(runs, refs);
    CHECK(rep.to_csv() == fixtures::read_file(std::string(ADAPTMT_GOLDEN_DIR) + "/report.csv"));
    CHECK(rep.to_table() == fixtures::read_file(std::string(ADAPTMT_GOLDEN_DIR) + "/report.txt"));
    const std::vector<RunOutputs> twins = {runs[0], {"copy", runs[0].hypotheses}};
    const auto twin_rep = report(twins, refs);
    for (std::size_t i = 0; i < 3; ++i) CHECK(twin_rep.rows[i].score.value == twin_rep.rows[i + 3].score.value);
  }

  TEST_CASE("joint permutation leaves corpus scores unchanged") {
    std::vector<std::string> hs = {"the cat sat on mat", "Hello, world!", "a lazy dog sleeps today", "x y z"};
    std::vector<std::string> rs = {"the cat sat on the mat", "Hello world!", "the lazy dog sleeps today", "x y"};
    const auto b = corpus_bleu(hs, rs).value;
    const auto c = chrf(hs, rs, 6, 2).value;
    std::swap(hs[0], hs[3]);
    std::swap(rs[0], rs[3]);
    std::swap(hs[1], hs[2]);
    std::swap(rs[1], rs[2]);
    CHECK(corpus_bleu(hs, rs).value == doctest::Approx(b).epsilon(1e-12));
    CHECK(chrf(hs, rs, 6, 2).value == doctest::Approx(c).epsilon(1e-12));
  }

  TEST_CASE("appending an exact match never lowers chrF on the fixtures") {
    std::vector<std::string> hs = {"the cat sat on mat", "Hi world"};
    std::vector<std::string> rs = {"the cat sat on the mat", "Hello world!"};
    for (const std::string extra : {"abc", "the lazy dog", "Press the power button."}) {
      const auto before = chrf(hs, rs).value;
      hs.push_back(extra);
      rs.push_back(extra);
      CHECK(chrf(hs, rs).value >= before);
    }
  }
}
