#include "adaptmt/tm.hpp"

#include <cctype>
#include <chrono>
#include <fstream>
#include <mutex>
#include <sstream>
#include <unordered_set>

#include "json.hpp"

#include "adaptmt/error.hpp"
#include "adaptmt/text.hpp"

namespace adaptmt {

using json = nlohmann::json;

const std::map<std::string, int>& default_length_multipliers() {
  static const std::map<std::string, int> table = {
      {"ar", 8}, {"zh", 5}, {"rw", 5}, {"fr", 4}, {"es", 4}};
  return table;
}

int default_length_multiplier(std::string_view target_lang) {
  const auto primary = std::string(target_lang.substr(0, target_lang.find_first_of("-_")));
  const auto& table = default_length_multipliers();
  const auto it = table.find(text::to_lower(primary));
  return it == table.end() ? 4 : it->second;
}

bool is_valid_language_code(std::string_view code) {
  if (code.empty()) return false;
  std::size_t i = 0;
  std::size_t n = 0;
  while (i < code.size() && std::isalpha(static_cast<unsigned char>(code[i]))) {
    ++i;
    ++n;
  }
  if (n < 2 || n > 3) return false;
  while (i < code.size()) {
    if (code[i] != '-' && code[i] != '_') return false;
    ++i;
    std::size_t len = 0;
    while (i < code.size() && std::isalnum(static_cast<unsigned char>(code[i]))) {
      ++i;
      ++len;
    }
    if (len < 1 || len > 8) return false;
  }
  return true;
}

void LanguagePair::validate() const {
  if (!is_valid_language_code(source_lang)) throw Error("tm", "invalid source language code '" + source_lang + "'");
  if (!is_valid_language_code(target_lang)) throw Error("tm", "invalid target language code '" + target_lang + "'");
  if (source_lang == target_lang) throw Error("tm", "source and target language are identical");
  if (length_multiplier < 1) throw Error("tm", "length multiplier must be >= 1");
}

LanguagePair LanguagePair::make(std::string source_lang, std::string target_lang) {
  LanguagePair lp{std::move(source_lang), std::move(target_lang), 4};
  lp.length_multiplier = default_length_multiplier(lp.target_lang);
  return lp;
}

std::string_view to_string(Origin origin) {
  switch (origin) {
    case Origin::approved: return "approved";
    case Origin::machine: return "machine";
    case Origin::fixture: return "fixture";
  }
  return "fixture";
}

Origin origin_from_string(std::string_view name) {
  if (name == "approved") return Origin::approved;
  if (name == "machine") return Origin::machine;
  if (name == "fixture") return Origin::fixture;
  throw Error("tm", "unknown origin '" + std::string(name) + "'");
}

TmFormat tm_format_from_string(std::string_view name) {
  if (name == "tsv") return TmFormat::tsv;
  if (name == "jsonl") return TmFormat::jsonl;
  throw Error("tm", "unknown TM format '" + std::string(name) + "' (expected tsv or jsonl)");
}

std::string dedup_key(std::string_view source, std::string_view target) {
  auto key = text::normalize_whitespace(source);
  key.push_back('\x1f');
  key += text::normalize_whitespace(target);
  return key;
}

namespace {

std::int64_t now_seconds() {
  return std::chrono::duration_cast<std::chrono::seconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

json to_json(const SegmentPair& p) {
  return json{{"id", p.id},
              {"source", p.source},
              {"target", p.target},
              {"origin", std::string(to_string(p.origin))},
              {"created_at", p.created_at}};
}

TmRecord parse_tsv_line(const std::string& line, std::size_t lineno) {
  const auto tab = line.find('\t');
  if (tab == std::string::npos) throw RecordError("tm", lineno, "expected source<TAB>target");
  if (line.find('\t', tab + 1) != std::string::npos) {
    throw RecordError("tm", lineno, "expected exactly two tab-separated columns");
  }
  TmRecord r{text::trim(line.substr(0, tab)), text::trim(line.substr(tab + 1)), Origin::fixture};
  if (r.source.empty()) throw RecordError("tm", lineno, "empty source");
  if (r.target.empty()) throw RecordError("tm", lineno, "empty target");
  return r;
}

TmRecord parse_jsonl_line(const std::string& line, std::size_t lineno) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw RecordError("tm", lineno, std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw RecordError("tm", lineno, "expected a JSON object");
  for (const char* key : {"source", "target"}) {
    if (!j.contains(key)) throw RecordError("tm", lineno, std::string("missing \"") + key + "\"");
    if (!j[key].is_string()) throw RecordError("tm", lineno, std::string("\"") + key + "\" must be a string");
  }
  TmRecord r{text::trim(j["source"].get<std::string>()), text::trim(j["target"].get<std::string>()),
           Origin::fixture};
  if (r.source.empty()) throw RecordError("tm", lineno, "empty source");
  if (r.target.empty()) throw RecordError("tm", lineno, "empty target");
  if (j.contains("origin")) {
    try {
      r.origin = origin_from_string(j["origin"].get<std::string>());
    } catch (const std::exception& e) {
      throw RecordError("tm", lineno, e.what());
    }
  }
  return r;
}

}  // namespace

std::vector<TmRecord> parse_tm_records(std::string_view content, TmFormat format,
                                       std::vector<RecordError>* errors) {
  std::vector<TmRecord> out;
  std::size_t lineno = 0;
  for (const auto& line : text::split_lines(content)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    try {
      out.push_back(format == TmFormat::tsv ? parse_tsv_line(line, lineno) : parse_jsonl_line(line, lineno));
    } catch (const RecordError& e) {
      if (!errors) throw;
      errors->push_back(e);
    }
  }
  return out;
}

struct TranslationMemory::State {
  mutable std::shared_mutex mutex;
  std::vector<SegmentPair> pairs;
  std::unordered_map<std::string, std::size_t> by_key;
  SegmentId next_id = 1;
  std::uint64_t version = 0;
  std::optional<std::ofstream> journal;
};

TranslationMemory::TranslationMemory(std::string project_id, LanguagePair lang)
    : project_id_(std::move(project_id)), lang_(std::move(lang)), state_(std::make_unique<State>()) {
  lang_.validate();
}

TranslationMemory::TranslationMemory(TranslationMemory&&) noexcept = default;
TranslationMemory& TranslationMemory::operator=(TranslationMemory&&) noexcept = default;
TranslationMemory::~TranslationMemory() = default;

std::pair<SegmentPair, bool> TranslationMemory::add(std::string_view source, std::string_view target,
                                                    Origin origin) {
  auto src = text::trim(source);
  auto tgt = text::trim(target);
  if (src.empty()) throw Error("tm", "source must be non-empty");
  if (tgt.empty() && origin == Origin::approved) throw Error("tm", "approved target must be non-empty");
  auto key = dedup_key(src, tgt);

  std::unique_lock lock(state_->mutex);
  if (const auto it = state_->by_key.find(key); it != state_->by_key.end()) {
    return {state_->pairs[it->second], false};
  }
  SegmentPair pair{state_->next_id++, std::move(src), std::move(tgt), origin, now_seconds()};
  if (state_->journal) {
    *state_->journal << to_json(pair).dump() << '\n';
    state_->journal->flush();
    if (!*state_->journal) throw Error("tm", "journal write failed");
  }
  state_->by_key.emplace(std::move(key), state_->pairs.size());
  state_->pairs.push_back(pair);
  ++state_->version;
  return {std::move(pair), true};
}

SegmentPair TranslationMemory::approve(std::string_view source, std::string_view target) {
  if (text::trim(target).empty()) throw Error("tm", "target must be non-empty");
  return add(source, target, Origin::approved).first;
}

std::size_t TranslationMemory::size() const {
  std::shared_lock lock(state_->mutex);
  return state_->pairs.size();
}

std::uint64_t TranslationMemory::version() const {
  std::shared_lock lock(state_->mutex);
  return state_->version;
}

std::vector<SegmentPair> TranslationMemory::pairs() const {
  std::shared_lock lock(state_->mutex);
  return state_->pairs;
}

std::optional<SegmentPair> TranslationMemory::find(SegmentId id) const {
  std::shared_lock lock(state_->mutex);
  // ids are dense and assigned in insertion order
  if (id == 0 || id > state_->pairs.size()) return std::nullopt;
  return state_->pairs[id - 1];
}

void TranslationMemory::attach_journal(const std::filesystem::path& path) {
  std::unique_lock lock(state_->mutex);
  state_->journal.emplace(path, std::ios::app);
  if (!*state_->journal) {
    state_->journal.reset();
    throw Error("tm", "cannot open journal " + path.string());
  }
}

std::size_t TranslationMemory::replay_journal(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) return 0;
  std::stringstream buf;
  buf << in.rdbuf();
  std::size_t restored = 0;
  for (const auto& r : parse_tm_records(buf.str(), TmFormat::jsonl)) {
    if (add(r.source, r.target, r.origin).second) ++restored;
  }
  return restored;
}

IngestReport TranslationMemory::ingest_text(std::string_view content, TmFormat format) {
  const auto records = parse_tm_records(content, format);
  IngestReport report;
  report.read = records.size();
  for (const auto& r : records) {
    if (add(r.source, r.target, r.origin).second) {
      ++report.kept;
    } else {
      ++report.dropped;
    }
  }
  return report;
}

TranslationMemory ingest(const std::filesystem::path& path, TmFormat format, LanguagePair lang,
                         IngestReport* report) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("tm", "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  const auto content = buf.str();
  if (text::trim(content).empty()) throw Error("tm", path.string() + " is empty");

  TranslationMemory tm(path.stem().string(), std::move(lang));
  const auto r = tm.ingest_text(content, format);
  if (report) *report = r;
  return tm;
}

void export_tm(const TranslationMemory& tm, const std::filesystem::path& path, TmFormat format) {
  const auto pairs = tm.pairs();
  if (pairs.empty()) throw Error("tm", "cannot export an empty TM");
  std::ostringstream out;
  for (const auto& p : pairs) {
    if (format == TmFormat::tsv) {
      for (const auto* field : {&p.source, &p.target}) {
        if (field->find_first_of("\t\n\r") != std::string::npos) {
          throw Error("tm", "pair " + std::to_string(p.id) + " contains a tab or newline; use jsonl");
        }
      }
      out << p.source << '\t' << p.target << '\n';
    } else {
      out << to_json(p).dump() << '\n';
    }
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw Error("tm", "cannot write " + path.string());
  file << out.str();
  if (!file) throw Error("tm", "write failed for " + path.string());
}

}  // namespace adaptmt
