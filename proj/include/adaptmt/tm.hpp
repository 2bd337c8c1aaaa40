#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "adaptmt/error.hpp"

namespace adaptmt {

/// Source/target language codes plus the output-token multiplier applied per
/// source word when budgeting generation length.
struct LanguagePair {
  std::string source_lang;
  std::string target_lang;
  int length_multiplier = 4;

  /// Throws Error("tm") on equal codes, empty codes or multiplier < 1.
  void validate() const;

  /// Pair with the default multiplier for `target_lang`.
  static LanguagePair make(std::string source_lang, std::string target_lang);
};

/// Output tokens per source word: ar 8; zh, rw 5; fr, es 4. Unlisted targets get 4.
int default_length_multiplier(std::string_view target_lang);
const std::map<std::string, int>& default_length_multipliers();

/// True for 2-3 letter primary subtags with optional alphanumeric subtags.
bool is_valid_language_code(std::string_view code);

enum class Origin { approved, machine, fixture };

std::string_view to_string(Origin origin);
Origin origin_from_string(std::string_view name);

using SegmentId = std::uint64_t;

struct SegmentPair {
  SegmentId id = 0;
  std::string source;
  std::string target;
  Origin origin = Origin::fixture;
  std::int64_t created_at = 0;  // unix seconds
};

enum class TmFormat { tsv, jsonl };

TmFormat tm_format_from_string(std::string_view name);

struct TmRecord {
  std::string source;
  std::string target;
  Origin origin = Origin::fixture;
};



/// Parses TSV or JSONL records, skipping blank lines. Without `errors` the
/// first malformed line throws RecordError; with it every malformed line is
/// collected and skipped.
std::vector<TmRecord> parse_tm_records(std::string_view content, TmFormat format,
                                       std::vector<RecordError>* errors = nullptr);

struct IngestReport {
  std::size_t read = 0;
  std::size_t kept = 0;
  std::size_t dropped = 0;
};

/// Dedup key: whitespace-normalized source and target, no case folding.
std::string dedup_key(std::string_view source, std::string_view target);

/// Insertion-ordered store of segment pairs, deduplicated on normalized
/// (source, target). Reads take a shared lock, writes an exclusive one.
///
/// When a journal is attached every accepted pair is appended to it as one
/// JSONL record before the write returns.
class TranslationMemory {
 public:
  TranslationMemory(std::string project_id, LanguagePair lang);
  TranslationMemory(TranslationMemory&&) noexcept;
  TranslationMemory& operator=(TranslationMemory&&) noexcept;
  TranslationMemory(const TranslationMemory&) = delete;
  TranslationMemory& operator=(const TranslationMemory&) = delete;
  ~TranslationMemory();

  const std::string& project_id() const noexcept { return project_id_; }
  const LanguagePair& lang() const noexcept { return lang_; }

  /// Adds a pair. Returns the stored pair and whether it was newly inserted;
  /// a duplicate returns the existing pair unchanged.
  /// Throws Error("tm") on empty source, or empty target for approved origin.
  std::pair<SegmentPair, bool> add(std::string_view source, std::string_view target,
                                   Origin origin = Origin::fixture);

  /// Live-loop entry point: add with origin=approved.
  SegmentPair approve(std::string_view source, std::string_view target);

  std::size_t size() const;
  bool empty() const { return size() == 0; }
  /// Bumped on every accepted insert.
  std::uint64_t version() const;

  std::vector<SegmentPair> pairs() const;
  std::optional<SegmentPair> find(SegmentId id) const;

  /// Appends accepted pairs to `path` from now on. Existing content is kept.
  void attach_journal(const std::filesystem::path& path);

  /// Replays a journal written by attach_journal. Returns the number of pairs
  /// restored.
  std::size_t replay_journal(const std::filesystem::path& path);

  /// Parses TSV or JSONL content into this TM. Throws RecordError naming the
  /// first malformed line; nothing is inserted in that case.
  IngestReport ingest_text(std::string_view content, TmFormat format);

 private:
  struct State;
  std::string project_id_;
  LanguagePair lang_;
  std::unique_ptr<State> state_;
};

/// Loads a TSV (source<TAB>target) or JSONL file into a new TM.
/// Throws Error("tm") for a missing or empty file, RecordError for bad rows.
TranslationMemory ingest(const std::filesystem::path& path, TmFormat format, LanguagePair lang,
                         IngestReport* report = nullptr);

/// Writes the TM. JSONL records carry id/source/target/origin/created_at.
/// Throws Error("tm") on an empty TM, unwritable path, or (TSV) fields
/// containing tabs or newlines.
void export_tm(const TranslationMemory& tm, const std::filesystem::path& path, TmFormat format);

}  // namespace adaptmt
