#include "adaptmt/pipeline.hpp"

#include <chrono>

#include <spdlog/spdlog.h>

#include "adaptmt/error.hpp"
#include "adaptmt/hash.hpp"
#include "adaptmt/text.hpp"

namespace adaptmt {

using json = nlohmann::json;

std::string_view to_string(TermSource s) {
  switch (s) {
    case TermSource::none: return "none";
    case TermSource::fuzzy_terms: return "fuzzy_terms";
    case TermSource::glossary: return "glossary";
  }
  return "none";
}

std::string_view to_string(MtMode m) {
  switch (m) {
    case MtMode::none: return "none";
    case MtMode::new_only: return "new_only";
    case MtMode::all: return "all";
  }
  return "none";
}

namespace {

TermSource implied_term_source(PromptKind kind) {
  switch (kind) {
    case PromptKind::few_shot_fuzzy_terms: return TermSource::fuzzy_terms;
    case PromptKind::zero_shot_glossary_terms:
    case PromptKind::few_shot_glossary_terms: return TermSource::glossary;
    default: return TermSource::none;
  }
}

MtMode implied_mt_mode(PromptKind kind) {
  switch (kind) {
    case PromptKind::few_shot_fuzzy_new_mt: return MtMode::new_only;
    case PromptKind::few_shot_fuzzy_all_mt: return MtMode::all;
    default: return MtMode::none;
  }
}

double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

std::string describe_ids(const std::vector<FuzzyMatch>& matches) {
  std::string out;
  for (const auto& m : matches) {
    if (!out.empty()) out += ",";
    out += std::to_string(m.pair.id);
  }
  return out;
}

json terms_json(const std::vector<TermPair>& terms) {
  json arr = json::array();
  for (const auto& t : terms) {
    arr.push_back({{"src", t.src}, {"tgt", t.tgt}, {"freq", t.freq}, {"ngram_len", t.ngram_len}});
  }
  return arr;
}

std::vector<TermPair> terms_from(const json& arr) {
  std::vector<TermPair> out;
  for (const auto& t : arr) {
    out.push_back({t.at("src").get<std::string>(), t.at("tgt").get<std::string>(), t.value("freq", 1),
                   t.value("ngram_len", 1)});
  }
  return out;
}

}  // namespace

void StrategySpec::validate() const {
  if (kind == PromptKind::term_extraction) throw Error("config", "term_extraction is not a translation strategy");
  if (needs_matches(kind) && kind != PromptKind::few_shot_random) {
    if (top_k < 1) throw Error("config", "few-shot strategies need top_k >= 1");
  }
  if (term_source != implied_term_source(kind)) {
    throw Error("config", "term_source " + std::string(to_string(term_source)) + " does not fit " +
                              std::string(to_string(kind)));
  }
  if (mt_mode != implied_mt_mode(kind)) {
    throw Error("config", "mt_mode " + std::string(to_string(mt_mode)) + " does not fit " +
                              std::string(to_string(kind)));
  }
  if (term_source != TermSource::none && max_terms < 1) throw Error("config", "max_terms must be >= 1");
  generation.validate();
}

StrategySpec StrategySpec::for_kind(PromptKind kind, int top_k, int max_terms) {
  StrategySpec s;
  s.kind = kind;
  s.top_k = top_k;
  s.max_terms = max_terms;
  s.term_source = implied_term_source(kind);
  s.mt_mode = implied_mt_mode(kind);
  return s;
}

// -- term store ---------------------------------------------------------------

std::optional<std::vector<TermPair>> TermStore::get(SegmentId id) const {
  std::lock_guard lock(mutex_);
  const auto it = terms_.find(id);
  if (it == terms_.end()) return std::nullopt;
  return it->second;
}

void TermStore::put(SegmentId id, std::vector<TermPair> terms) {
  std::lock_guard lock(mutex_);
  terms_[id] = std::move(terms);
}

std::size_t TermStore::size() const {
  std::lock_guard lock(mutex_);
  return terms_.size();
}

std::vector<TermPair> TermStore::all_terms() const {
  std::lock_guard lock(mutex_);
  std::vector<TermPair> out;
  for (const auto& [id, terms] : terms_) out.insert(out.end(), terms.begin(), terms.end());
  return out;
}

// -- results ------------------------------------------------------------------

json to_json(const TranslationResult& r, const ResultJsonOptions& opts) {
  json matches = json::array();
  for (const auto& m : r.matches_used) {
    matches.push_back({{"id", m.pair.id},
                       {"score", m.score},
                       {"source", m.pair.source},
                       {"target", m.pair.target},
                       {"origin", std::string(to_string(m.pair.origin))}});
  }
  json match_terms = json::array();
  for (const auto& terms : r.match_terms_used) match_terms.push_back(terms_json(terms));
  json j = {{"schema", kResultSchema},
            {"source", r.source},
            {"output", r.output},
            {"ok", r.ok},
            {"kind_requested", std::string(to_string(r.kind_requested))},
            {"kind_used", std::string(to_string(r.kind_used))},
            {"lang",
             {{"source", r.lang.source_lang},
              {"target", r.lang.target_lang},
              {"multiplier", r.lang.length_multiplier}}},
            {"display_names", {{"source", r.source_name}, {"target", r.target_name}}},
            {"matches_used", std::move(matches)},
            {"terms_used", terms_json(r.terms_used)},
            {"match_terms_used", std::move(match_terms)},
            {"mt_used", r.mt_used ? json(*r.mt_used) : json(nullptr)},
            {"mt_matches_used", r.mt_matches_used ? json(*r.mt_matches_used) : json(nullptr)},
            {"provider", r.provider},
            {"mt_provider", r.mt_provider},
            {"finish_reason", r.finish_reason},
            {"attempts", r.attempts},
            {"warnings", r.warnings}};
  if (r.self_id) j["self_id"] = *r.self_id;
  if (!r.ok) j["error"] = {{"stage", r.error_stage}, {"message", r.error}};
  if (opts.include_prompt) j["prompt_used"] = r.prompt_used;
  if (opts.include_timing) {
    j["timing_ms"] = {{"retrieve", r.timing.retrieve_ms}, {"terms", r.timing.terms_ms},
                      {"mt", r.timing.mt_ms},             {"prompt", r.timing.prompt_ms},
                      {"generate", r.timing.generate_ms}, {"total", r.timing.total_ms}};
  }
  return j;
}

TranslationResult result_from_json(const json& j) {
  if (j.value("schema", std::string()) != kResultSchema) {
    throw Error("pipeline", "unsupported result schema '" + j.value("schema", std::string()) + "'");
  }
  TranslationResult r;
  r.source = j.at("source").get<std::string>();
  r.output = j.value("output", std::string());
  r.ok = j.value("ok", true);
  r.kind_requested = prompt_kind_from_string(j.at("kind_requested").get<std::string>());
  r.kind_used = prompt_kind_from_string(j.at("kind_used").get<std::string>());
  const auto& lang = j.at("lang");
  r.lang = LanguagePair{lang.at("source").get<std::string>(), lang.at("target").get<std::string>(),
                        lang.value("multiplier", 4)};
  r.source_name = j.at("display_names").at("source").get<std::string>();
  r.target_name = j.at("display_names").at("target").get<std::string>();
  if (j.contains("self_id")) r.self_id = j["self_id"].get<SegmentId>();
  for (const auto& m : j.at("matches_used")) {
    SegmentPair p;
    p.id = m.at("id").get<SegmentId>();
    p.source = m.at("source").get<std::string>();
    p.target = m.at("target").get<std::string>();
    p.origin = origin_from_string(m.value("origin", std::string("fixture")));
    r.matches_used.push_back({std::move(p), m.at("score").get<double>()});
  }
  r.terms_used = terms_from(j.at("terms_used"));
  for (const auto& t : j.value("match_terms_used", json::array())) r.match_terms_used.push_back(terms_from(t));
  if (j.contains("mt_used") && !j["mt_used"].is_null()) r.mt_used = j["mt_used"].get<std::string>();
  if (j.contains("mt_matches_used") && !j["mt_matches_used"].is_null()) {
    r.mt_matches_used = j["mt_matches_used"].get<std::vector<std::string>>();
  }
  r.provider = j.value("provider", std::string());
  r.mt_provider = j.value("mt_provider", std::string());
  r.finish_reason = j.value("finish_reason", std::string());
  r.attempts = j.value("attempts", 0);
  r.warnings = j.value("warnings", std::vector<std::string>{});
  if (j.contains("error")) {
    r.error_stage = j["error"].value("stage", std::string());
    r.error = j["error"].value("message", std::string());
  }
  r.prompt_used = j.value("prompt_used", std::string());
  if (j.contains("timing_ms")) {
    const auto& t = j["timing_ms"];
    r.timing = {t.value("retrieve", 0.0), t.value("terms", 0.0),    t.value("mt", 0.0),
                t.value("prompt", 0.0),   t.value("generate", 0.0), t.value("total", 0.0)};
  }
  return r;
}

PromptRequest request_from_result(const TranslationResult& r) {
  PromptRequest req;
  req.kind = r.kind_used;
  req.lang = r.lang;
  req.source = r.source;
  req.matches = r.matches_used;
  req.terms = r.terms_used;
  req.match_terms = r.match_terms_used;
  req.mt_new = r.mt_used;
  req.mt_matches = r.mt_matches_used;
  req.display_names = {{r.lang.source_lang, r.source_name}, {r.lang.target_lang, r.target_name}};
  return req;
}

std::string rerender(const TranslationResult& r) { return render(request_from_result(r)); }

// -- sampling -------------------------------------------------------------------

std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k > n) throw Error("pipeline", "cannot draw " + std::to_string(k) + " of " + std::to_string(n));
  std::mt19937_64 rng(seed);
  auto bounded = [&rng](std::uint64_t range) {
    const std::uint64_t threshold = (0 - range) % range;
    for (;;) {
      const std::uint64_t x = rng();
      if (x >= threshold) return x % range;
    }
  };
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = i + static_cast<std::size_t>(bounded(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  return idx;
}

// -- translator -----------------------------------------------------------------

Translator::Translator(LanguagePair lang, std::shared_ptr<Gateway> gateway, TranslatorOptions opts)
    : lang_(std::move(lang)), gateway_(std::move(gateway)), opts_(std::move(opts)) {
  lang_.validate();
  opts_.budget.validate();
  if (!gateway_) throw Error("pipeline", "translator needs a gateway");
}

void Translator::set_index(std::shared_ptr<const Index> index) {
  std::lock_guard lock(mutex_);
  index_ = std::move(index);
}

void Translator::set_glossary(std::shared_ptr<const Glossary> glossary) {
  std::lock_guard lock(mutex_);
  glossary_ = std::move(glossary);
}

void Translator::set_mt(std::shared_ptr<MtProvider> mt) {
  std::lock_guard lock(mutex_);
  mt_ = std::move(mt);
}

void Translator::set_term_store(std::shared_ptr<TermStore> store) {
  std::lock_guard lock(mutex_);
  term_store_ = std::move(store);
}

std::shared_ptr<const Index> Translator::index() const {
  std::lock_guard lock(mutex_);
  return index_;
}

std::vector<TermPair> Translator::terms_for_pair(const SegmentPair& pair, std::vector<std::string>& warnings) {
  std::shared_ptr<TermStore> store;
  {
    std::lock_guard lock(mutex_);
    store = term_store_;
  }
  if (store) {
    if (auto cached = store->get(pair.id)) return *cached;
  }
  std::vector<TermPair> terms;
  try {
    const auto lines = extract_terms(pair, lang_, *gateway_, opts_.extraction_generation, opts_.extraction_terms,
                                     opts_.extraction_separator, opts_.display_names);
    const auto parsed = parse_term_lines(lines, opts_.extraction_separator, pair.source, pair.target);
    for (const auto& p : parsed.terms) {
      if (p.src_present && p.tgt_present) terms.push_back(p.term);
    }
  } catch (const Error& e) {
    warnings.push_back("terms: extraction failed for pair " + std::to_string(pair.id) + ": " + e.what());
    return terms;
  }
  if (store) store->put(pair.id, terms);
  return terms;
}

Translator::Prepared Translator::prepare(const std::string& source, const StrategySpec& strategy,
                                         std::optional<SegmentId> self_id,
                                         std::optional<std::vector<FuzzyMatch>> fixed_examples) {
  strategy.validate();
  const auto t_start = std::chrono::steady_clock::now();
  Prepared p;
  auto& r = p.result;
  r.source = source;
  r.lang = lang_;
  r.kind_requested = strategy.kind;
  r.self_id = self_id;
  r.provider = gateway_->provider().name();
  p.generation = strategy.generation;
  p.postprocess = strategy.postprocess;

  std::shared_ptr<const Index> index;
  std::shared_ptr<const Glossary> glossary;
  std::shared_ptr<MtProvider> mt;
  {
    std::lock_guard lock(mutex_);
    index = index_;
    glossary = glossary_;
    mt = mt_;
  }

  auto fail = [&](std::string stage, std::string message) {
    r.ok = false;
    r.error_stage = std::move(stage);
    r.error = std::move(message);
    r.timing.total_ms = ms_since(t_start);
    return std::move(p);
  };

  if (text::trim(source).empty()) return fail("pipeline", "source must be non-empty");

  PromptRequest req;
  req.kind = strategy.kind;
  req.lang = lang_;
  req.source = source;
  req.display_names = opts_.display_names;

  auto degrade = [&](PromptKind to, const std::string& why) {
    r.warnings.push_back("degraded " + std::string(to_string(req.kind)) + " -> " + std::string(to_string(to)) +
                         ": " + why);
    req.kind = to;
  };

  // retrieve
  auto t0 = std::chrono::steady_clock::now();
  if (needs_matches(req.kind)) {
    if (fixed_examples) {
      req.matches = std::move(*fixed_examples);
    } else if (req.kind == PromptKind::few_shot_random && index && index->size() > 0) {
      std::vector<std::size_t> pool;
      for (std::size_t i = 0; i < index->size(); ++i) {
        if (!self_id || index->pairs()[i].id != *self_id) pool.push_back(i);
      }
      const auto k = std::min(pool.size(), static_cast<std::size_t>(strategy.top_k));
      for (const auto i : sample_without_replacement(pool.size(), k, strategy.seed ^ stable_hash64(source))) {
        req.matches.push_back({index->pairs()[pool[i]], 0.0});
      }
    } else if (!index || index->size() == 0) {
      r.warnings.push_back("retrieval: no index available");
    } else {
      try {
        RetrievalConfig rc;
        rc.top_k = strategy.top_k;
        rc.allow_large_top_k = true;
        rc.exclude_exact_self = self_id.has_value();
        req.matches = index->retrieve(source, rc, self_id);
      } catch (const Error& e) {
        return fail("retrieval", e.what());
      }
    }
    if (req.matches.empty()) {
      degrade(req.kind == PromptKind::few_shot_glossary_terms ? PromptKind::zero_shot_glossary_terms
                                                              : PromptKind::zero_shot,
              "no fuzzy matches");
    }
  }
  r.timing.retrieve_ms = ms_since(t0);

  // terms
  t0 = std::chrono::steady_clock::now();
  if (req.kind == PromptKind::few_shot_fuzzy_terms) {
    for (const auto& m : req.matches) req.match_terms.push_back(terms_for_pair(m.pair, r.warnings));
    req.terms = select_fuzzy_terms(source, req.match_terms, strategy.max_terms);
    if (req.terms.empty()) {
      req.match_terms.clear();
      degrade(PromptKind::few_shot_fuzzy, "no fuzzy-match terms occur in the source");
    }
  } else if (req.kind == PromptKind::few_shot_glossary_terms || req.kind == PromptKind::zero_shot_glossary_terms) {
    if (glossary) req.terms = match_terms(source, *glossary, strategy.max_terms);
    if (req.terms.empty()) {
      degrade(req.kind == PromptKind::zero_shot_glossary_terms ? PromptKind::zero_shot : PromptKind::few_shot_fuzzy,
              glossary ? "no glossary term occurs in the source" : "no glossary loaded");
    } else if (req.kind == PromptKind::few_shot_glossary_terms) {
      for (const auto& m : req.matches) req.match_terms.push_back(match_terms(m.pair.source, *glossary, strategy.max_terms));
    }
  }
  r.timing.terms_ms = ms_since(t0);

  // mt
  t0 = std::chrono::steady_clock::now();
  if (needs_mt_new(req.kind)) {
    std::vector<std::string> texts{source};
    if (needs_mt_matches(req.kind)) {
      for (const auto& m : req.matches) texts.push_back(m.pair.source);
    }
    std::string failure;
    std::vector<MtResult> out;
    if (!mt) {
      failure = "no MT provider configured";
    } else {
      r.mt_provider = mt->name();
      try {
        out = mt_translate(texts, *mt);
        for (const auto& o : out) {
          if (!o.ok()) {
            failure = o.error;
            break;
          }
        }
      } catch (const std::exception& e) {
        failure = e.what();
      }
    }
    if (!failure.empty()) {
      degrade(PromptKind::few_shot_fuzzy, "MT unavailable: " + failure);
    } else {
      req.mt_new = *out[0].text;
      if (needs_mt_matches(req.kind)) {
        std::vector<std::string> mts;
        for (std::size_t i = 1; i < out.size(); ++i) mts.push_back(*out[i].text);
        req.mt_matches = std::move(mts);
      }
    }
  }
  r.timing.mt_ms = ms_since(t0);

  // fit + render
  t0 = std::chrono::steady_clock::now();
  try {
    auto fitted = fit(req, opts_.budget);
    if (!fitted.dropped_matches.empty()) {
      r.warnings.push_back("budget: dropped " + std::to_string(fitted.dropped_matches.size()) +
                           " lowest-scored matches (ids " + describe_ids(fitted.dropped_matches) + ")");
    }
    if (!fitted.dropped_terms.empty()) {
      r.warnings.push_back("budget: dropped " + std::to_string(fitted.dropped_terms.size()) + " terms");
    }
    if (fitted.downgraded_from) {
      r.warnings.push_back("budget: degraded " + std::string(to_string(*fitted.downgraded_from)) + " -> " +
                           std::string(to_string(fitted.request.kind)));
    }
    req = std::move(fitted.request);
    p.prompt = render(req);
  } catch (const Error& e) {
    return fail("prompt", e.what());
  }
  r.timing.prompt_ms = ms_since(t0);

  r.kind_used = req.kind;
  r.prompt_used = p.prompt;
  r.source_name = resolve_display_name(req.display_names, lang_.source_lang);
  r.target_name = resolve_display_name(req.display_names, lang_.target_lang);
  r.matches_used = std::move(req.matches);
  r.terms_used = std::move(req.terms);
  r.match_terms_used = std::move(req.match_terms);
  r.mt_used = std::move(req.mt_new);
  r.mt_matches_used = std::move(req.mt_matches);
  p.generation.max_tokens =
      strategy.dynamic_max_tokens ? dynamic_max_new_tokens(source) : output_budget(source, lang_);
  r.timing.total_ms = ms_since(t_start);
  return p;
}

void Translator::finish(Prepared& p, const Completion& completion) {
  auto& r = p.result;
  const auto post = postprocess(completion, p.postprocess);
  r.output = post.text;
  r.finish_reason = std::string(to_string(completion.finish_reason));
  r.attempts = completion.attempts;
  if (post.empty) r.warnings.push_back("postprocess: empty translation");
}

void Translator::generate(Prepared& p) {
  if (!p.result.ok) return;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    finish(p, gateway_->complete(p.prompt, p.generation));
  } catch (const Error& e) {
    p.result.ok = false;
    p.result.error_stage = "gateway";
    p.result.error = e.what();
  }
  p.result.timing.generate_ms = ms_since(t0);
  p.result.timing.total_ms += p.result.timing.generate_ms;
}

TranslationResult Translator::translate_segment(const std::string& source, const StrategySpec& strategy,
                                                std::optional<SegmentId> self_id) {
  auto p = prepare(source, strategy, self_id);
  generate(p);
  return std::move(p.result);
}

TranslationResult Translator::translate_random_context(const std::string& source, const TranslationMemory& tm,
                                                       int k, std::uint64_t seed, const StrategySpec& strategy) {
  if (k < 0) throw Error("pipeline", "k must be >= 0");
  const auto pairs = tm.pairs();
  if (static_cast<std::size_t>(k) > pairs.size()) {
    throw Error("pipeline", "k=" + std::to_string(k) + " exceeds TM size " + std::to_string(pairs.size()));
  }
  auto spec = strategy;
  if (k == 0) {
    spec = StrategySpec::for_kind(PromptKind::zero_shot);
    spec.generation = strategy.generation;
    spec.postprocess = strategy.postprocess;
    spec.dynamic_max_tokens = strategy.dynamic_max_tokens;
    auto p = prepare(source, spec, std::nullopt);
    generate(p);
    return std::move(p.result);
  }
  spec.kind = PromptKind::few_shot_random;
  spec.term_source = TermSource::none;
  spec.mt_mode = MtMode::none;
  std::vector<FuzzyMatch> examples;
  for (const auto i : sample_without_replacement(pairs.size(), static_cast<std::size_t>(k), seed)) {
    examples.push_back({pairs[i], 0.0});
  }
  auto p = prepare(source, spec, std::nullopt, std::move(examples));
  generate(p);
  return std::move(p.result);
}

std::vector<TranslationResult> Translator::run_experiment(const TranslationMemory& dataset,
                                                          const StrategySpec& strategy, bool self_exclusion,
                                                          const Progress& progress) {
  std::vector<std::string> sources;
  std::vector<std::optional<SegmentId>> self_ids;
  for (const auto& pair : dataset.pairs()) {
    sources.push_back(pair.source);
    self_ids.push_back(self_exclusion ? std::optional(pair.id) : std::nullopt);
  }
  return translate_batch(sources, strategy, self_ids, progress);
}

std::vector<TranslationResult> Translator::translate_batch(std::span<const std::string> sources,
                                                           const StrategySpec& strategy,
                                                           std::span<const std::optional<SegmentId>> self_ids,
                                                           const Progress& progress) {
  strategy.validate();
  if (!self_ids.empty() && self_ids.size() != sources.size()) {
    throw Error("pipeline", "self_ids must be empty or aligned with sources");
  }
  std::vector<Prepared> prepared;
  prepared.reserve(sources.size());
  for (std::size_t i = 0; i < sources.size(); ++i) {
    prepared.push_back(prepare(sources[i], strategy, self_ids.empty() ? std::nullopt : self_ids[i]));
  }

  std::vector<std::size_t> pending;
  std::vector<std::string> prompts;
  for (std::size_t i = 0; i < prepared.size(); ++i) {
    if (prepared[i].result.ok) {
      pending.push_back(i);
      prompts.push_back(prepared[i].prompt);
    }
  }
  // Generation settings differ per segment only in max_tokens; batch with the
  // largest budget of each chunk.
  const auto batch = static_cast<std::size_t>(strategy.generation.batch_size);
  for (std::size_t start = 0; start < pending.size(); start += batch) {
    const auto end = std::min(pending.size(), start + batch);
    auto cfg = strategy.generation;
    cfg.max_tokens = 1;
    for (std::size_t i = start; i < end; ++i) {
      cfg.max_tokens = std::max(cfg.max_tokens, prepared[pending[i]].generation.max_tokens);
    }
    const auto t0 = std::chrono::steady_clock::now();
    const auto slots = gateway_->complete_batch(
        std::span<const std::string>(prompts).subspan(start, end - start), cfg);
    const double per_item = ms_since(t0) / static_cast<double>(end - start);
    for (std::size_t i = start; i < end; ++i) {
      auto& p = prepared[pending[i]];
      const auto& slot = slots[i - start];
      if (slot.ok()) {
        finish(p, *slot.completion);
      } else {
        p.result.ok = false;
        p.result.error_stage = "gateway";
        p.result.error = slot.error;
      }
      p.result.timing.generate_ms = per_item;
      p.result.timing.total_ms += per_item;
    }
    if (progress) progress(end, pending.size());
  }

  std::vector<TranslationResult> results;
  results.reserve(prepared.size());
  std::size_t failed = 0;
  for (auto& p : prepared) {
    if (!p.result.ok) ++failed;
    results.push_back(std::move(p.result));
  }
  spdlog::info("pipeline: {} segments, {} failed", results.size(), failed);
  return results;
}

}  // namespace adaptmt
