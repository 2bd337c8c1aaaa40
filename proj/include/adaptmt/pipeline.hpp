#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "adaptmt/gateway.hpp"
#include "adaptmt/mt_bridge.hpp"
#include "adaptmt/prompting.hpp"
#include "adaptmt/retrieval.hpp"
#include "adaptmt/terminology.hpp"
#include "adaptmt/tm.hpp"

namespace adaptmt {

enum class TermSource { none, fuzzy_terms, glossary };
enum class MtMode { none, new_only, all };

std::string_view to_string(TermSource s);
std::string_view to_string(MtMode m);

/// One translation strategy: prompt shape plus its retrieval, terminology,
/// MT and decoding settings.
struct StrategySpec {
  PromptKind kind = PromptKind::few_shot_fuzzy;
  int top_k = 5;
  TermSource term_source = TermSource::none;
  int max_terms = 5;
  MtMode mt_mode = MtMode::none;
  GenerationConfig generation = GenerationConfig::translation();
  PostprocessMode postprocess = PostprocessMode::truncate_newline;
  /// Use min(2 * words, 250) as max_tokens instead of the length multiplier.
  bool dynamic_max_tokens = false;
  /// Drives few_shot_random example draws (mixed with a hash of the source).
  std::uint64_t seed = 0;

  /// Throws Error("config") when the fields disagree with `kind`.
  void validate() const;

  /// Spec with term_source and mt_mode implied by `kind`.
  static StrategySpec for_kind(PromptKind kind, int top_k = 5, int max_terms = 5);
};

/// Per-segment term lists keyed by TM id.
class TermStore {
 public:
  std::optional<std::vector<TermPair>> get(SegmentId id) const;
  void put(SegmentId id, std::vector<TermPair> terms);
  std::size_t size() const;
  /// Every stored term, in id order.
  std::vector<TermPair> all_terms() const;

 private:
  mutable std::mutex mutex_;
  std::map<SegmentId, std::vector<TermPair>> terms_;
};

struct StageTiming {
  double retrieve_ms = 0;
  double terms_ms = 0;
  double mt_ms = 0;
  double prompt_ms = 0;
  double generate_ms = 0;
  double total_ms = 0;
};

/// Audit record for one translated segment. The recorded parts are enough to
/// re-render `prompt_used` byte for byte (see rerender()).
struct TranslationResult {
  std::string source;
  std::string output;
  std::string prompt_used;
  PromptKind kind_requested = PromptKind::zero_shot;
  PromptKind kind_used = PromptKind::zero_shot;
  LanguagePair lang;
  std::string source_name;  // display names the prompt was rendered with
  std::string target_name;
  std::optional<SegmentId> self_id;
  std::vector<FuzzyMatch> matches_used;
  std::vector<TermPair> terms_used;
  std::vector<std::vector<TermPair>> match_terms_used;
  std::optional<std::string> mt_used;
  std::optional<std::vector<std::string>> mt_matches_used;
  std::string provider;
  std::string mt_provider;
  std::string finish_reason;
  int attempts = 0;
  StageTiming timing;
  std::vector<std::string> warnings;
  bool ok = true;
  std::string error_stage;
  std::string error;
};

inline constexpr std::string_view kResultSchema = "adaptmt.translation_result/v1";

struct ResultJsonOptions {
  bool include_prompt = true;
  bool include_timing = true;
};

nlohmann::json to_json(const TranslationResult& r, const ResultJsonOptions& opts = {});
TranslationResult result_from_json(const nlohmann::json& j);

/// Rebuilds the prompt request from the recorded parts.
PromptRequest request_from_result(const TranslationResult& r);
std::string rerender(const TranslationResult& r);

struct TranslatorOptions {
  BudgetConfig budget;
  DisplayNames display_names = default_display_names();
  int extraction_terms = 5;
  std::string extraction_separator = "=";
  GenerationConfig extraction_generation = GenerationConfig::term_extraction();
};

/// Unbiased draw of `k` distinct indices from [0, n): partial Fisher-Yates
/// driven by std::mt19937_64(seed), with bounded values taken by rejection
/// (x mod range after discarding x < 2^64 mod range).
std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k, std::uint64_t seed);

/// Runs retrieve, terms, MT, fit, render, complete and postprocess for a
/// language pair. Thread-safe once configured.
class Translator {
 public:
  Translator(LanguagePair lang, std::shared_ptr<Gateway> gateway, TranslatorOptions opts = {});

  void set_index(std::shared_ptr<const Index> index);
  void set_glossary(std::shared_ptr<const Glossary> glossary);
  void set_mt(std::shared_ptr<MtProvider> mt);
  void set_term_store(std::shared_ptr<TermStore> store);

  const LanguagePair& lang() const { return lang_; }
  std::shared_ptr<const Index> index() const;
  Gateway& gateway() { return *gateway_; }
  const TranslatorOptions& options() const { return opts_; }

  /// Failures are recorded in the result (ok=false, error_stage) rather than
  /// thrown; only an invalid strategy throws.
  TranslationResult translate_segment(const std::string& source, const StrategySpec& strategy,
                                      std::optional<SegmentId> self_id = std::nullopt);

  /// Few-shot translation with `k` uniformly drawn TM pairs; k = 0 renders
  /// zero-shot. Throws Error("pipeline") when k exceeds the TM size.
  TranslationResult translate_random_context(const std::string& source, const TranslationMemory& tm, int k,
                                             std::uint64_t seed,
                                             const StrategySpec& strategy = StrategySpec::for_kind(
                                                 PromptKind::few_shot_random));

  using Progress = std::function<void(std::size_t done, std::size_t total)>;

  /// Translates every pair of `dataset` in order, batching the generation
  /// step through the gateway. With self_exclusion each segment's own TM row
  /// is excluded from its matches.
  std::vector<TranslationResult> run_experiment(const TranslationMemory& dataset, const StrategySpec& strategy,
                                                bool self_exclusion = true, const Progress& progress = {});

  /// Same batching over arbitrary sources; `self_ids` is empty or aligned.
  std::vector<TranslationResult> translate_batch(std::span<const std::string> sources, const StrategySpec& strategy,
                                                 std::span<const std::optional<SegmentId>> self_ids = {},
                                                 const Progress& progress = {});

 private:
  struct Prepared {
    TranslationResult result;
    std::string prompt;
    GenerationConfig generation;
    PostprocessMode postprocess = PostprocessMode::truncate_newline;
  };

  Prepared prepare(const std::string& source, const StrategySpec& strategy, std::optional<SegmentId> self_id,
                   std::optional<std::vector<FuzzyMatch>> fixed_examples = std::nullopt);
  void finish(Prepared& p, const Completion& completion);
  void generate(Prepared& p);
  std::vector<TermPair> terms_for_pair(const SegmentPair& pair, std::vector<std::string>& warnings);

  LanguagePair lang_;
  std::shared_ptr<Gateway> gateway_;
  TranslatorOptions opts_;
  mutable std::mutex mutex_;
  std::shared_ptr<const Index> index_;
  std::shared_ptr<const Glossary> glossary_;
  std::shared_ptr<MtProvider> mt_;
  std::shared_ptr<TermStore> term_store_;
};

}  // namespace adaptmt
