#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "adaptmt/retrieval.hpp"
#include "adaptmt/term_pair.hpp"
#include "adaptmt/tm.hpp"

namespace adaptmt {

enum class PromptKind {
  zero_shot,
  few_shot_fuzzy,
  few_shot_random,
  few_shot_fuzzy_new_mt,
  few_shot_fuzzy_all_mt,
  zero_shot_glossary_terms,
  few_shot_fuzzy_terms,
  few_shot_glossary_terms,
  term_extraction,
};

/// snake_case names, also used by the CLI `--strategy` flag and the HTTP API.
std::string_view to_string(PromptKind kind);
PromptKind prompt_kind_from_string(std::string_view name);
std::span<const PromptKind> all_prompt_kinds();

bool needs_matches(PromptKind kind);
bool needs_mt_new(PromptKind kind);
bool needs_mt_matches(PromptKind kind);
bool needs_terms(PromptKind kind);
/// Kinds that put a "Terms:" line above every example.
bool needs_match_terms(PromptKind kind);

using DisplayNames = std::map<std::string, std::string, std::less<>>;

/// en English, ar Arabic, zh Chinese, fr French, es Spanish, rw Kinyarwanda,
/// plus a handful of other common codes.
const DisplayNames& default_display_names();
/// Exact code first, then the primary subtag ("pt-BR" -> "pt"). Throws
/// Error("prompt") when neither is present.
const std::string& resolve_display_name(const DisplayNames& names, std::string_view code);

struct PromptRequest {
  PromptKind kind = PromptKind::zero_shot;
  LanguagePair lang;
  std::string source;
  /// Examples in any order; render() places the best match last.
  std::vector<FuzzyMatch> matches;
  /// Terms for the new segment ("Terms:" line above the query).
  std::vector<TermPair> terms;
  /// Per-example terms, aligned with `matches`.
  std::vector<std::vector<TermPair>> match_terms;
  std::optional<std::string> mt_new;
  /// MT of each example source, aligned with `matches`.
  std::optional<std::vector<std::string>> mt_matches;
  DisplayNames display_names = default_display_names();

  // term_extraction only
  std::string pair_target;
  int term_count = 5;
  std::string term_separator = "=";
};

/// "src1 = tgt1 - src2 = tgt2"
std::string format_terms(std::span<const TermPair> terms);

/// Byte-exact prompt text; lines joined by '\n', no trailing newline.
/// Throws Error("prompt") naming the first missing or misaligned field.
std::string render(const PromptRequest& req);

/// Source word count times the language length multiplier.
int output_budget(std::string_view source, const LanguagePair& lang);

struct BudgetConfig {
  int context_limit = 4097;
  double approx_chars_per_token = 4.0;

  void validate() const;
};

/// ceil(UTF-8 bytes / approx_chars_per_token).
int estimate_tokens(std::string_view prompt, const BudgetConfig& budget);

struct FitResult {
  PromptRequest request;
  std::vector<FuzzyMatch> dropped_matches;
  std::vector<TermPair> dropped_terms;
  /// Set when dropping every example or term forced a simpler kind.
  std::optional<PromptKind> downgraded_from;
  int prompt_tokens = 0;
  int output_tokens = 0;

  bool changed() const { return !dropped_matches.empty() || !dropped_terms.empty(); }
};

/// Shrinks `req` until estimate_tokens(render) + output_budget fits the
/// context limit: lowest-similarity examples go first, then trailing terms.
/// The source is never touched. Throws Error("prompt") when even the bare
/// source does not fit.
FitResult fit(const PromptRequest& req, const BudgetConfig& budget);

}  // namespace adaptmt
