#include "doctest.h"

#include <cstdlib>
#include <mutex>

#include "adaptmt/error.hpp"
#include "adaptmt/gateway.hpp"
#include "adaptmt/hash.hpp"

#include "../support/stub_server.hpp"

using namespace adaptmt;
using namespace std::chrono_literals;

namespace {

struct RecordingSleeper {
  std::shared_ptr<std::vector<std::chrono::milliseconds>> delays = std::make_shared<std::vector<std::chrono::milliseconds>>();
  std::shared_ptr<std::mutex> mutex = std::make_shared<std::mutex>();
  Gateway::Sleeper fn() {
    return [d = delays, m = mutex](std::chrono::milliseconds ms) {
      std::lock_guard lock(*m);
      d->push_back(ms);
    };
  }
};

std::shared_ptr<HttpCompletionProvider> http_provider(const stub::Server& s, std::string key_env = {}) {
  return std::make_shared<HttpCompletionProvider>(HttpProviderConfig{s.url("/v1/completions"), std::move(key_env), 5000ms});
}

}  // namespace

TEST_SUITE("gateway") {
  TEST_CASE("generation presets") {
    const auto t = GenerationConfig::translation();
    CHECK(t.top_p == 1.0);
    CHECK(t.temperature == 0.3);
    CHECK(t.batch_size == 20);
    CHECK(t.stop.empty());
    CHECK(GenerationConfig::term_extraction().temperature == 0.0);
    const auto g = GenerationConfig::greedy();
    CHECK(g.decoding == Decoding::greedy);
    CHECK(g.batch_size == 1);
    GenerationConfig bad;
    bad.top_p = 1.5;
    CHECK_THROWS_AS(bad.validate(), Error);
  }

  TEST_CASE("backoff doubles and caps") {
    RetryPolicy p;
    CHECK(p.backoff(1) == 1000ms);
    CHECK(p.backoff(2) == 2000ms);
    CHECK(p.backoff(3) == 4000ms);
    CHECK(p.backoff(20) == 60000ms);
  }

  TEST_CASE("chunking") {
    CHECK(chunk_sizes(45, 20) == std::vector<std::size_t>{20, 20, 5});
    CHECK(chunk_sizes(20, 20) == std::vector<std::size_t>{20});
    CHECK(chunk_sizes(0, 20).empty());
  }

  TEST_CASE("429 responses are retried with jittered backoff") {
    stub::Server s;
    s.script({429, 429, 503});
    RecordingSleeper sleeper;
    Gateway gw(http_provider(s), RetryPolicy{}, sleeper.fn());
    const auto c = gw.complete("prompt", GenerationConfig::translation());
    CHECK(c.text == " stub");
    CHECK(c.attempts == 4);
    CHECK(s.requests() == 4);
    REQUIRE(sleeper.delays->size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
      const auto base = RetryPolicy{}.backoff(static_cast<int>(i) + 1);
      CHECK((*sleeper.delays)[i] <= base);
      CHECK((*sleeper.delays)[i] >= base / 2);
    }
    CHECK(gw.stats().retries == 3);
  }

  TEST_CASE("Retry-After overrides the computed delay") {
    stub::Server s;
    s.script({429}, "7");
    RecordingSleeper sleeper;
    Gateway gw(http_provider(s), RetryPolicy{}, sleeper.fn());
    gw.complete("p", GenerationConfig::translation());
    REQUIRE(sleeper.delays->size() == 1);
    CHECK((*sleeper.delays)[0] == 7000ms);
  }

  TEST_CASE("attempts are capped") {
    stub::Server s;
    s.script({500, 500, 500, 500, 500, 500, 500});
    RecordingSleeper sleeper;
    Gateway gw(http_provider(s), RetryPolicy{}, sleeper.fn());
    try {
      gw.complete("p", GenerationConfig::translation());
      FAIL("expected ProviderError");
    } catch (const ProviderError& e) {
      CHECK(e.status() == 500);
      CHECK(e.stage() == "gateway");
    }
    CHECK(s.requests() == 6);
  }

  TEST_CASE("401 is terminal") {
    stub::Server s;
    s.script({401});
    RecordingSleeper sleeper;
    Gateway gw(http_provider(s), RetryPolicy{}, sleeper.fn());
    try {
      gw.complete("p", GenerationConfig::translation());
      FAIL("expected ProviderError");
    } catch (const ProviderError& e) {
      CHECK(e.terminal());
      CHECK(e.status() == 401);
    }
    CHECK(s.requests() == 1);
    CHECK(sleeper.delays->empty());
  }

  TEST_CASE("request body and bearer token from the environment") {
    stub::Server s;
    ::setenv("ADAPTMT_TEST_KEY", "sekret", 1);
    Gateway gw(http_provider(s, "ADAPTMT_TEST_KEY"));
    auto cfg = GenerationConfig::translation();
    cfg.stop = newline_stop();
    cfg.max_tokens = 33;
    gw.complete("Translate this", cfg);
    const auto body = nlohmann::json::parse(s.bodies().at(0));
    CHECK(body.at("prompt") == "Translate this");
    CHECK(body.at("top_p") == 1.0);
    CHECK(body.at("temperature") == 0.3);
    CHECK(body.at("max_tokens") == 33);
    CHECK(body.at("stop") == nlohmann::json::array({"\n"}));
    CHECK(s.auth_headers().at(0) == "Bearer sekret");
    ::unsetenv("ADAPTMT_TEST_KEY");
  }

  TEST_CASE("batches keep order and respect the parallelism bound") {
    stub::Server s;
    s.latency(30ms);
    s.respond([](const nlohmann::json& req) { return "out:" + req.at("prompt").get<std::string>(); });
    Gateway gw(http_provider(s));
    auto cfg = GenerationConfig::translation();
    cfg.max_parallel = 3;
    cfg.batch_size = 7;
    std::vector<std::string> prompts;
    for (int i = 0; i < 17; ++i) prompts.push_back("p" + std::to_string(i));
    const auto slots = gw.complete_batch(prompts, cfg);
    REQUIRE(slots.size() == 17);
    for (int i = 0; i < 17; ++i) CHECK(slots[i].completion->text == "out:p" + std::to_string(i));
    CHECK(s.max_in_flight() <= 3);
    CHECK(s.max_in_flight() >= 2);
    CHECK(gw.stats().chunks == 3);
    CHECK(gw.stats().max_in_flight <= 3);
  }

  TEST_CASE("a failed slot leaves the others intact") {
    auto fx = std::make_shared<FixtureProvider>();
    fx->add("good", "fine");
    fx->add("bad", "", 401);
    Gateway gw(fx);
    const std::vector<std::string> prompts = {"good", "bad", "good"};
    const auto slots = gw.complete_batch(prompts, GenerationConfig::translation());
    CHECK(slots[0].ok());
    CHECK_FALSE(slots[1].ok());
    CHECK(slots[1].status == 401);
    CHECK(slots[2].completion->text == "fine");
    CHECK_THROWS_AS(gw.complete_batch({}, GenerationConfig::translation()), Error);
  }

  TEST_CASE("fixture provider lookups and fallback") {
    auto fx = FixtureProvider::from_jsonl("{\"match\":\"" + prompt_hash("hello") +
                                          "\",\"response\":\" bonjour\"}\n{\"match\":\"*\",\"response\":\" ?\"}\n");
    Gateway gw(fx);
    CHECK(gw.complete("hello", {}).text == " bonjour");
    CHECK(gw.complete("other", {}).text == " ?");
    FixtureProvider strict;
    CHECK_THROWS_AS(strict.complete("x", {}), ProviderError);
  }

  TEST_CASE("echo provider returns the last example target") {
    const std::string prompt =
        "English: a\nFrench: A\nEnglish: b\nFrench: B\nEnglish: query\nFrench:";
    CHECK(EchoTopMatchProvider::last_example_target(prompt) == "B");
    CHECK_FALSE(EchoTopMatchProvider::last_example_target("English: q\nFrench:").has_value());
  }

  TEST_CASE("postprocessing modes") {
    Completion c;
    c.text = "  Bonjour.\nEnglish: next";
    CHECK(postprocess(c, PostprocessMode::truncate_newline).text == "Bonjour.");
    CHECK(postprocess(c, PostprocessMode::verbatim).text == c.text);
    c.text = " Bonjour. ";
    CHECK(postprocess(c, PostprocessMode::stop_newline).text == "Bonjour.");
    c.text = "\n\n  ";
    CHECK(postprocess(c, PostprocessMode::truncate_newline).empty);
  }

  TEST_CASE("dynamic max tokens") {
    CHECK(dynamic_max_new_tokens("a b c") == 6);
    std::string many;
    for (int i = 0; i < 300; ++i) many += "w ";
    CHECK(dynamic_max_new_tokens(many) == 250);
    CHECK(dynamic_max_new_tokens(many, 100) == 100);
  }
}
