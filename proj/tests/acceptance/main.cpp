// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <spdlog/spdlog.h>

#include "httplib.h"
#include "json.hpp"

#include "adaptmt/evaluation.hpp"
#include "adaptmt/gateway.hpp"
#include "adaptmt/pipeline.hpp"
#include "adaptmt/prompting.hpp"
#include "adaptmt/retrieval.hpp"
#include "adaptmt/service.hpp"
#include "adaptmt/terminology.hpp"
#include "adaptmt/text.hpp"

#include "../support/fixtures.hpp"
#include "../support/oracles.hpp"

using namespace adaptmt;
using json = nlohmann::json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double limit_ms;  // 0 for no time limit
  std::function<Outcome()> run;
};

// ---------------------------------------------------------------------------

Outcome golden_prompts() {
  int diffs = 0, total = 0;
  std::string first_diff;
  for (const auto kind : all_prompt_kinds()) {
    ++total;
    const auto got = render(fixtures::canonical(kind));
    const auto want = fixtures::golden(kind);
    if (got != want) {
      ++diffs;
      if (first_diff.empty()) first_diff = std::string(to_string(kind));
    }
  }
  return {diffs == 0, std::to_string(total) + " kinds, " + std::to_string(diffs) + " diffs" +
                          (first_diff.empty() ? "" : " (first: " + first_diff + ")")};
}

Outcome retrieval_oracle() {
  auto rows = fixtures::corpus(980, 11);
  // Same source, different target: exact ties resolved by insertion order.
  for (std::size_t i = 0; i < 20; ++i) rows.emplace_back(rows[i * 7].first, "alt " + rows[i * 7].second);
  const auto tm = fixtures::tm_from(rows);
  if (tm.size() != 1000) return {false, "synthetic TM has " + std::to_string(tm.size()) + " rows"};
  const auto index = build_index(tm);
  const auto pairs = tm.pairs();

  std::vector<std::string> queries;
  for (std::size_t i = 0; i < 30; ++i) queries.push_back(rows[i * 7].first);
  std::mt19937_64 rng(5);
  for (std::size_t i = 0; i < 40; ++i) {
    auto words = text::split_whitespace(rows[rng() % rows.size()].first);
    words[rng() % words.size()] = "zorblat";
    if (words.size() > 4) words.erase(words.begin() + static_cast<std::ptrdiff_t>(rng() % words.size()));
    queries.push_back(text::join(words, " "));
  }
  for (const auto& [s, t] : fixtures::corpus(30, 99)) queries.push_back(s);

  const auto dim = HashedTrigramEmbedder::kDefaultDimension;
  const auto seed = HashedTrigramEmbedder::kDefaultSeed;
  std::vector<std::vector<double>> matrix;
  for (const auto& p : pairs) matrix.push_back(oracle::ascii_trigram_embed(p.source, dim, seed));

  RetrievalConfig cfg;
  cfg.top_k = 10;
  double worst = 0;
  std::size_t compared = 0, ties = 0;
  for (const auto& q : queries) {
    const auto got = index->retrieve(q, cfg);
    const auto want = oracle::cosine_top_k(matrix, oracle::ascii_trigram_embed(q, dim, seed), 10);
    if (got.size() != want.size()) return {false, "result size differs for query '" + q + "'"};
    for (std::size_t r = 0; r < want.size(); ++r) {
      if (got[r].pair.id != pairs[want[r].row].id) {
        return {false, "rank " + std::to_string(r + 1) + " differs for query '" + q + "'"};
      }
      worst = std::max(worst, std::abs(got[r].score - std::clamp(want[r].score, 0.0, 1.0)));
      if (r > 0 && want[r].score == want[r - 1].score) ++ties;
      ++compared;
    }
  }
  char buf[160];
  std::snprintf(buf, sizeof buf, "%zu queries, %zu ranks compared, %zu exact ties, max |score diff| %.2e",
                queries.size(), compared, ties, worst);
  return {worst <= 1e-9 && ties > 0, buf};
}

Outcome closed_loop() {
  const auto rows = fixtures::corpus(500, 21);
  const auto tm = fixtures::tm_from(rows);
  Translator translator(tm.lang(), std::make_shared<Gateway>(std::make_shared<EchoTopMatchProvider>()));
  translator.set_index(build_index(tm));
  std::vector<std::string> sources, refs;
  for (const auto& [s, t] : rows) {
    sources.push_back(s);
    refs.push_back(t);
  }
  const auto results = translator.translate_batch(sources, StrategySpec::for_kind(PromptKind::few_shot_fuzzy, 5));
  std::vector<std::string> hyps;
  for (const auto& r : results) hyps.push_back(r.output);
  const auto bleu = corpus_bleu(hyps, refs);
  char buf[96];
  std::snprintf(buf, sizeof buf, "%zu segments, corpus BLEU %.4f", hyps.size(), bleu.value);
  return {bleu.value == 100.0, buf};
}

Outcome live_loop() {
  const std::string s = "Unplug the charger before cleaning the contacts.";
  const std::string t = "Débranchez le chargeur avant de nettoyer les contacts.";

  // library
  TranslationMemory tm("live", LanguagePair::make("en", "fr"));
  for (const auto& [src, tgt] : fixtures::corpus(50, 3)) tm.add(src, tgt);
  Translator translator(tm.lang(), std::make_shared<Gateway>(std::make_shared<EchoTopMatchProvider>()));
  auto index = build_index(tm);
  translator.set_index(index);
  const auto approved = tm.approve(s, t);
  translator.set_index(extend_index(*index, {approved}, tm.version()));
  const auto lib = translator.translate_segment(s, StrategySpec::for_kind(PromptKind::few_shot_fuzzy, 5));
  if (lib.output != t) return {false, "library returned '" + lib.output + "'"};

  // HTTP
  ServiceOptions opts;
  opts.provider = std::make_shared<EchoTopMatchProvider>();
  Service service(std::move(opts));
  const int port = service.start();
  httplib::Client client("127.0.0.1", port);
  auto created = client.Post("/v1/projects", R"({"lang":{"source":"en","target":"fr"}})", "application/json");
  if (!created || created->status != 201) return {false, "project creation failed"};
  const auto id = json::parse(created->body).at("project_id").get<std::string>();
  std::string tsv;
  for (const auto& [src, tgt] : fixtures::corpus(50, 3)) tsv += src + "\t" + tgt + "\n";
  auto ingested = client.Post("/v1/projects/" + id + "/tm", tsv, "text/tab-separated-values");
  if (!ingested || ingested->status != 200) return {false, "TM upload failed"};
  auto approve = client.Post("/v1/projects/" + id + "/approve", json{{"source", s}, {"target", t}}.dump(),
                             "application/json");
  if (!approve || approve->status != 200) return {false, "approve failed"};
  auto translated = client.Post("/v1/projects/" + id + "/translate",
                                json{{"source", s}, {"strategy", "few_shot_fuzzy"}}.dump(), "application/json");
  if (!translated || translated->status != 200) return {false, "translate failed"};
  const auto http_out = json::parse(translated->body).at("output").get<std::string>();
  service.stop();
  if (http_out != t) return {false, "HTTP returned '" + http_out + "'"};
  return {true, "library and HTTP both returned the approved target"};
}

Outcome glossary_oracle() {
  // Planted (src, tgt, occurrences) spread across 200 synthetic pairs.
  struct Plant {
    std::string src, tgt;
    int count;
  };
  const std::vector<Plant> plants = {
      {"virus", "virus", 1},                       // below min_freq
      {"of the", "de la", 9},                      // stopwords only
      {"x", "A", 3},                               // competing targets: A wins
      {"x", "B", 2},
      {"tie term", "zeta", 2},                     // tie: smaller target wins
      {"tie term", "alpha", 2},
      {"power button", "botón de encendido", 3},   // casing variants aggregate
      {"Power Button", "botón de encendido", 2},
      {"acute respiratory syndrome", "syndrome respiratoire aigu", 4},
      {"one two three four five", "un deux trois quatre cinq", 2},
      {"one two three four five six", "un deux trois quatre cinq six", 6},  // > max_ngram
      {"the fever", "la fièvre", 5},               // not stopword-only
      {"a", "un", 7},                              // single stopword
  };
  std::vector<TermPair> candidates;
  for (const auto& p : plants) {
    for (int i = 0; i < p.count; ++i) candidates.push_back({p.src, p.tgt, 1, ngram_length(p.src)});
  }
  // Background terms from 200 pairs: five per pair drawn from a fixed pool.
  std::mt19937_64 rng(8);
  std::vector<std::pair<std::string, std::string>> pool;
  for (const auto& [s, t] : fixtures::corpus(60, 17, 80)) {
    const auto sw = text::split_whitespace(s);
    const auto tw = text::split_whitespace(t);
    const auto n = 1 + rng() % 3;
    pool.emplace_back(oracle::lower(text::join({sw.begin() + 1, sw.begin() + 1 + static_cast<long>(n)}, " ")),
                      text::join({tw.begin() + 1, tw.begin() + 1 + static_cast<long>(n)}, " "));
  }
  for (int pair = 0; pair < 200; ++pair) {
    for (int j = 0; j < 5; ++j) {
      const auto& [s, t] = pool[rng() % pool.size()];
      candidates.push_back({s, t, 1, ngram_length(s)});
    }
  }
  std::shuffle(candidates.begin(), candidates.end(), rng);

  GlossaryConfig cfg;
  const auto got = compile_glossary(candidates, cfg);
  std::set<std::string> stop(cfg.stopwords.begin(), cfg.stopwords.end());
  const auto want = oracle::glossary(candidates, cfg.min_freq, cfg.max_ngram, stop);
  if (got.entries != want) {
    return {false, "glossary differs from oracle (" + std::to_string(got.entries.size()) + " vs " +
                       std::to_string(want.size()) + " entries)"};
  }
  auto find = [&](const std::string& src) -> const TermPair* {
    for (const auto& e : got.entries) {
      if (oracle::lower(e.src) == src) return &e;
    }
    return nullptr;
  };
  std::vector<std::string> problems;
  if (find("virus")) problems.push_back("freq-1 term kept");
  if (find("of the") || find("a")) problems.push_back("stopword term kept");
  if (!find("x") || find("x")->tgt != "A") problems.push_back("highest-frequency target not chosen");
  if (!find("tie term") || find("tie term")->tgt != "alpha") problems.push_back("target tie not broken");
  if (!find("power button") || find("power button")->freq != 5 || find("power button")->src != "power button") {
    problems.push_back("case-insensitive aggregation");
  }
  if (find("one two three four five six")) problems.push_back("6-gram kept");
  if (!find("the fever")) problems.push_back("mixed stopword term dropped");
  if (got.entries.empty() || got.entries.front().src != "one two three four five") problems.push_back("order");
  if (!problems.empty()) return {false, problems.front()};
  return {true, std::to_string(got.entries.size()) + " entries equal to oracle; planted cases hold"};
}

Outcome term_matching() {
  std::mt19937_64 rng(42);
  const std::vector<std::string> vocab = {"new", "york", "times", "power", "button", "reset", "device",
                                          "red", "fever", "acute", "data", "cable"};
  std::size_t nonempty = 0, checked_terms = 0;
  for (int c = 0; c < 1000; ++c) {
    std::vector<TermPair> cands;
    const int n_terms = 3 + static_cast<int>(rng() % 15);
    for (int i = 0; i < n_terms; ++i) {
      const int len = 1 + static_cast<int>(rng() % 6);
      std::vector<std::string> w;
      for (int j = 0; j < len; ++j) w.push_back(vocab[rng() % vocab.size()]);
      const auto src = text::join(w, " ");
      for (int k = 0; k < 2; ++k) cands.push_back({src, "t" + std::to_string(i), 1, len});
    }
    GlossaryConfig gcfg;
    gcfg.stopwords.clear();
    const auto glossary = compile_glossary(cands, gcfg);

    std::vector<std::string> seg;
    const int seg_len = 3 + static_cast<int>(rng() % 20);
    for (int j = 0; j < seg_len; ++j) {
      auto w = vocab[rng() % vocab.size()];
      if (rng() % 5 == 0) w[0] = static_cast<char>(w[0] - 32);
      if (rng() % 6 == 0) w = "(" + w;
      if (rng() % 6 == 0) w += rng() % 2 ? "," : ".";
      seg.push_back(w);
    }
    const auto source = text::join(seg, " ");
    const int max_terms = 1 + static_cast<int>(rng() % 10);
    const auto out = match_terms(source, glossary, max_terms);
    const auto toks = text::match_tokens(source);

    auto contains = [](const std::vector<std::string>& hay, const std::vector<std::string>& needle) {
      return !needle.empty() && std::search(hay.begin(), hay.end(), needle.begin(), needle.end()) != hay.end();
    };
    if (static_cast<int>(out.size()) > max_terms) return {false, "case " + std::to_string(c) + ": too many terms"};
    for (std::size_t i = 0; i < out.size(); ++i) {
      const auto t = text::match_tokens(out[i].src);
      if (t.empty() || t.size() > 5 || !contains(toks, t)) {
        return {false, "case " + std::to_string(c) + ": '" + out[i].src + "' is not a 1-5-gram of the source"};
      }
      if (i > 0 && out[i].ngram_len > out[i - 1].ngram_len) {
        return {false, "case " + std::to_string(c) + ": not longest-first"};
      }
      for (std::size_t j = 0; j < out.size(); ++j) {
        if (i != j && contains(text::match_tokens(out[j].src), t)) {
          return {false, "case " + std::to_string(c) + ": '" + out[i].src + "' overlaps '" + out[j].src + "'"};
        }
      }
      ++checked_terms;
    }
    // Greedy completeness: below the cap, every unselected occurring term overlaps a selected one.
    if (static_cast<int>(out.size()) < max_terms) {
      for (const auto& e : glossary.entries) {
        const auto t = text::match_tokens(e.src);
        if (t.size() > 5 || !contains(toks, t)) continue;
        const bool selected = std::any_of(out.begin(), out.end(), [&](const TermPair& o) { return o.src == e.src; });
        const bool overlaps = std::any_of(out.begin(), out.end(), [&](const TermPair& o) {
          const auto ot = text::match_tokens(o.src);
          return contains(ot, t) || contains(t, ot);
        });
        if (!selected && !overlaps) return {false, "case " + std::to_string(c) + ": missed '" + e.src + "'"};
      }
    }
    if (!out.empty()) ++nonempty;
  }
  return {nonempty > 500, "1000 cases, " + std::to_string(nonempty) + " with matches, " +
                              std::to_string(checked_terms) + " returned terms verified"};
}

Outcome budget_fuzz() {
  std::mt19937_64 rng(1234);
  const int multipliers[] = {8, 5, 4};
  const std::pair<const char*, int> targets[] = {{"ar", 8}, {"zh", 5}, {"fr", 4}};
  const PromptKind kinds[] = {PromptKind::few_shot_fuzzy, PromptKind::few_shot_fuzzy_terms,
                              PromptKind::few_shot_glossary_terms, PromptKind::few_shot_fuzzy_all_mt,
                              PromptKind::few_shot_fuzzy_new_mt};
  auto words = [&](int n) {
    std::string s;
    for (int i = 0; i < n; ++i) s += (i ? " " : "") + std::string(1 + rng() % 12, static_cast<char>('a' + rng() % 26));
    return s;
  };
  BudgetConfig budget;
  std::size_t reduced = 0, rejected = 0;
  for (int c = 0; c < 1000; ++c) {
    const auto& [code, mult] = targets[c % 3];
    PromptRequest req;
    req.lang = LanguagePair::make("en", code);
    req.lang.length_multiplier = multipliers[c % 3];
    if (req.lang.length_multiplier != mult) return {false, "multiplier table mismatch"};
    req.kind = kinds[rng() % 5];
    req.source = words(1 + static_cast<int>(rng() % (rng() % 10 == 0 ? 900 : 120)));
    const int n_matches = 1 + static_cast<int>(rng() % 10);
    for (int i = 0; i < n_matches; ++i) {
      req.matches.push_back(fixtures::match(static_cast<SegmentId>(i + 1), words(1 + static_cast<int>(rng() % 400)),
                                            words(1 + static_cast<int>(rng() % 400)),
                                            static_cast<double>(rng() % 1000) / 1000.0));
    }
    if (needs_terms(req.kind)) {
      for (int i = 0; i < 1 + static_cast<int>(rng() % 10); ++i) req.terms.push_back({words(2), words(2), 1, 2});
      for (int i = 0; i < n_matches; ++i) req.match_terms.push_back({{words(1), words(1), 1, 1}});
    }
    if (needs_mt_new(req.kind)) req.mt_new = words(1 + static_cast<int>(rng() % 100));
    if (needs_mt_matches(req.kind)) {
      std::vector<std::string> mts;
      for (int i = 0; i < n_matches; ++i) mts.push_back(words(1 + static_cast<int>(rng() % 150)));
      req.mt_matches = mts;
    }

    FitResult fitted;
    try {
      fitted = fit(req, budget);
    } catch (const Error&) {
      // Only acceptable when the bare source cannot fit.
      PromptRequest bare;
      bare.kind = PromptKind::zero_shot;
      bare.lang = req.lang;
      bare.source = req.source;
      if (estimate_tokens(render(bare), budget) + output_budget(req.source, req.lang) <= budget.context_limit) {
        return {false, "case " + std::to_string(c) + ": rejected although the bare source fits"};
      }
      ++rejected;
      continue;
    }
    const int total = estimate_tokens(render(fitted.request), budget) + output_budget(req.source, req.lang);
    if (total > budget.context_limit) return {false, "case " + std::to_string(c) + ": " + std::to_string(total)};
    double min_kept = 2.0;
    for (const auto& m : fitted.request.matches) min_kept = std::min(min_kept, m.score);
    for (const auto& d : fitted.dropped_matches) {
      if (d.score > min_kept) return {false, "case " + std::to_string(c) + ": dropped a higher-scored match"};
    }
    if (fitted.changed()) ++reduced;
  }
  return {reduced > 100, "1000 requests, " + std::to_string(reduced) + " reduced, " + std::to_string(rejected) +
                             " rejected as source-too-long, 0 violations"};
}

Outcome default_constants() {
  std::vector<std::string> bad;
  const auto tr = GenerationConfig::translation();
  if (tr.top_p != 1.0) bad.push_back("translation top_p");
  if (tr.temperature != 0.3) bad.push_back("translation temperature");
  if (tr.batch_size != 20) bad.push_back("batch_size");
  if (!tr.stop.empty()) bad.push_back("stop not optional");
  if (newline_stop() != std::vector<std::string>{"\n"}) bad.push_back("newline stop");
  const auto te = GenerationConfig::term_extraction();
  if (te.temperature != 0.0 || te.top_p != 1.0) bad.push_back("term extraction decoding");
  const std::map<std::string, int> mult = {{"ar", 8}, {"zh", 5}, {"rw", 5}, {"fr", 4}, {"es", 4}};
  for (const auto& [code, m] : mult) {
    if (default_length_multiplier(code) != m) bad.push_back("multiplier " + code);
  }
  std::string long_src, ten;
  for (int i = 0; i < 200; ++i) long_src += "word ";
  for (int i = 0; i < 10; ++i) ten += "word ";
  if (dynamic_max_new_tokens(long_src) != 250 || dynamic_max_new_tokens(ten) != 20) bad.push_back("dynamic token cap");
  if (BudgetConfig{}.context_limit != 4097) bad.push_back("context limit");
  const GlossaryConfig g;
  if (g.min_freq != 2 || g.max_ngram != 5 || g.max_terms_per_segment != 5) bad.push_back("glossary defaults");
  if (StrategySpec{}.top_k != 5) bad.push_back("default k");
  if (!bad.empty()) return {false, bad.front()};
  return {true, "generation, multiplier, cap, budget and glossary defaults match"};
}

Outcome metric_fixtures() {
  struct Case {
    std::vector<std::string> hyps, refs;
    double bleu, chrf, chrfpp;  // negative: not checked
  };
  // Hand derivations:
  //  "the cat sat on mat" / "... on the mat": p = 5/5, 4/5, 3/4, 2/3 (add-one), BP = e^(1-6/5) -> 65.11
  //  "Hello, world!" / "Hello world!": p = 3/4, 2/4, 1/3, 1/2 -> 50.00
  //  two-segment corpus: p = 8/10, 7/9, 5/7, 3/5 -> (4/15)^(1/4) = 71.86
  //  "abcd" / "abce": chars P = R = (3/4 + 2/3 + 1/2 + 0) / 4 -> 47.92; plus word unigram 0 -> 38.33
  //  "ab" / "abc": P = 1, R = (2/3 + 1/2) / 2, F2 -> 63.64; with word unigram -> 42.42
  const std::vector<Case> cases = {
      {{"the cat sat on the mat"}, {"the cat sat on the mat"}, 100.0, 100.0, 100.0},
      {{"the cat sat on mat"}, {"the cat sat on the mat"}, 65.11, -1, -1},
      {{"Hello, world!"}, {"Hello world!"}, 50.00, -1, -1},
      {{"the quick brown fox jumps", "a lazy dog sleeps today"},
       {"the quick brown fox leaps", "the lazy dog sleeps today"},
       71.86, -1, -1},
      {{"abcd"}, {"abce"}, -1, 47.917, 38.333},
      {{"ab"}, {"abc"}, -1, 63.636, 42.424},
      {{"xyz"}, {"abc"}, 0.0, 0.0, 0.0},
  };
  double worst = 0;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const auto& c = cases[i];
    const double got[] = {corpus_bleu(c.hyps, c.refs).value, chrf(c.hyps, c.refs).value,
                          chrf(c.hyps, c.refs, 6, 2).value};
    const double want[] = {c.bleu, c.chrf, c.chrfpp};
    for (int m = 0; m < 3; ++m) {
      if (want[m] < 0) continue;
      const bool exact = want[m] == 100.0 || want[m] == 0.0;
      const double diff = std::abs(got[m] - want[m]);
      worst = std::max(worst, diff);
      if (exact ? diff != 0.0 : diff > 0.1) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "fixture %zu metric %d: %.4f vs %.4f", i + 1, m, got[m], want[m]);
        return {false, buf};
      }
    }
  }
  char buf[96];
  std::snprintf(buf, sizeof buf, "%zu fixtures, max deviation %.4f, identity exactly 100", cases.size(), worst);
  return {true, buf};
}

Outcome throughput() {
  const auto rows = fixtures::corpus(3070, 2023);
  const auto tm = fixtures::tm_from(rows);
  auto provider = std::make_shared<FixtureProvider>();
  provider->set_fallback(" sortie fixe");
  Translator translator(tm.lang(), std::make_shared<Gateway>(provider));
  translator.set_index(build_index(tm));
  const auto results = translator.run_experiment(tm, StrategySpec::for_kind(PromptKind::few_shot_fuzzy, 5));
  std::size_t complete = 0;
  for (const auto& r : results) {
    const bool full_k = r.matches_used.size() == 5;
    const auto round_trip = result_from_json(to_json(r));
    if (r.ok && full_k && !r.prompt_used.empty() && rerender(round_trip) == r.prompt_used &&
        r.output == "sortie fixe" && r.self_id.has_value()) {
      ++complete;
    }
  }
  return {results.size() == 3070 && complete == 3070,
          std::to_string(results.size()) + " results, " + std::to_string(complete) + " audit-complete"};
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::err);
  const std::vector<Criterion> criteria = {
      {1, "golden prompt fidelity", 1000, golden_prompts},
      {2, "retrieval oracle equivalence", 10000, retrieval_oracle},
      {3, "closed-loop adaptation", 30000, closed_loop},
      {4, "live-loop property", 5000, live_loop},
      {5, "glossary oracle equivalence", 5000, glossary_oracle},
      {6, "term-matching constraints", 0, term_matching},
      {7, "budget invariant", 0, budget_fuzz},
      {8, "default-constant conformance", 0, default_constants},
      {9, "metric fixtures", 0, metric_fixtures},
      {10, "throughput smoke", 60000, throughput},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = c.limit_ms == 0 || ms < c.limit_ms;
    const bool pass = o.pass && in_time;
    if (!pass) ++failed;
    char timing[64];
    if (c.limit_ms > 0) {
      std::snprintf(timing, sizeof timing, "%.0f ms, limit %.0f ms", ms, c.limit_ms);
    } else {
      std::snprintf(timing, sizeof timing, "%.0f ms", ms);
    }
    std::printf("%s [%2d] %s: %s (%s)%s\n", pass ? "PASS" : "FAIL", c.id, c.name.c_str(), o.detail.c_str(), timing,
                in_time ? "" : " TIME LIMIT EXCEEDED");
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed;
}
