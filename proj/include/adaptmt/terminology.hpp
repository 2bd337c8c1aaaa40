#pragma once

#include <filesystem>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "adaptmt/gateway.hpp"
#include "adaptmt/prompting.hpp"
#include "adaptmt/term_pair.hpp"
#include "adaptmt/tm.hpp"

namespace adaptmt {

/// Compiled term list: unique source terms, longest n-gram first, then by
/// descending frequency, then by source.
struct Glossary {
  std::vector<TermPair> entries;

  bool empty() const { return entries.empty(); }
  std::size_t size() const { return entries.size(); }
};

/// The bundled English function-word list, lowercased.
const std::set<std::string, std::less<>>& default_stopwords();

struct GlossaryConfig {
  int min_freq = 2;
  int max_ngram = 5;
  int max_terms_per_segment = 5;
  std::set<std::string, std::less<>> stopwords = default_stopwords();
  std::string separator = "=";
  /// Skip a matched term whose source lies inside an already selected one.
  bool suppress_overlaps = true;

  void validate() const;
};

/// Renders the extraction prompt for `pair`, completes it, and returns the
/// non-blank completion lines unparsed. Gateway errors propagate.
std::vector<std::string> extract_terms(const SegmentPair& pair, const LanguagePair& lang, Gateway& gateway,
                                       const GenerationConfig& cfg = GenerationConfig::term_extraction(),
                                       int n = 5, std::string_view separator = "=",
                                       const DisplayNames& names = default_display_names());

struct ParsedTerm {
  TermPair term;
  bool src_present = false;  // case-insensitive substring of the source sentence
  bool tgt_present = false;
};

struct ParsedTerms {
  std::vector<ParsedTerm> terms;
  std::size_t malformed = 0;
};

/// Strips "N." / "N)" prefixes, splits each line at the first separator and
/// trims both sides. Lines without the separator or with an empty side are
/// counted as malformed and dropped. Each term gets freq 1.
ParsedTerms parse_term_lines(std::span<const std::string> lines, std::string_view separator,
                             std::string_view source_sentence, std::string_view target_sentence);

/// Aggregates candidates case-insensitively on (src, tgt), then keeps one
/// target per source: the most frequent one, ties to the smallest target.
/// Drops empty sides, sources longer than max_ngram, stopword-only sources
/// and anything under min_freq. Surface casing is the most frequent one seen.
Glossary compile_glossary(std::span<const TermPair> candidates, const GlossaryConfig& cfg);

/// Glossary terms whose source equals (case-insensitively) a contiguous 1-5
/// token n-gram of `source` after edge punctuation stripping. Glossary order,
/// at most `max_terms`.
std::vector<TermPair> match_terms(std::string_view source, const Glossary& glossary, int max_terms,
                                  bool suppress_overlaps = true);

/// Terms gathered from the examples' own term lists (best example first) that
/// also occur in `source`.
std::vector<TermPair> select_fuzzy_terms(std::string_view source,
                                         std::span<const std::vector<TermPair>> per_match_terms,
                                         int max_terms, bool suppress_overlaps = true);

/// TSV src<TAB>tgt<TAB>freq<TAB>ngram_len, stored order.
void save_glossary(const Glossary& glossary, const std::filesystem::path& path);
std::string glossary_to_tsv(const Glossary& glossary);
Glossary load_glossary(const std::filesystem::path& path);
Glossary glossary_from_tsv(std::string_view content);

/// Candidate-term JSONL: {"src","tgt","freq"} per line (freq defaults to 1).
std::vector<TermPair> terms_from_jsonl(std::string_view content);
std::string terms_to_jsonl(std::span<const TermPair> terms);

int ngram_length(std::string_view term);

}  // namespace adaptmt
