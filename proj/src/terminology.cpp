#include "adaptmt/terminology.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_set>

#include <spdlog/spdlog.h>

#include "json.hpp"

#include "adaptmt/error.hpp"
#include "adaptmt/text.hpp"

namespace adaptmt {

using json = nlohmann::json;

const std::set<std::string, std::less<>>& default_stopwords() {
  static const std::set<std::string, std::less<>> words = {
      "a",       "about",   "above",   "after",  "again",   "against", "all",     "also",    "am",
      "an",      "and",     "any",     "are",    "as",      "at",      "be",      "because", "been",
      "before",  "being",   "below",   "between", "both",   "but",     "by",      "can",     "could",
      "did",     "do",      "does",    "doing",  "down",    "during",  "each",    "either",  "even",
      "ever",    "every",   "few",     "for",    "from",    "further", "had",     "has",     "have",
      "having",  "he",      "her",     "here",   "hers",    "herself", "him",     "himself", "his",
      "how",     "however", "i",       "if",     "in",      "into",    "is",      "it",      "its",
      "itself",  "just",    "less",    "may",    "me",      "might",   "more",    "most",    "much",
      "must",    "my",      "myself",  "neither", "no",     "nor",     "not",     "now",     "of",
      "off",     "on",      "once",    "one",    "only",    "or",      "other",   "ought",   "our",
      "ours",    "ourselves", "out",   "over",   "own",     "per",     "rather",  "same",    "shall",
      "she",     "should",  "since",   "so",     "some",    "such",    "than",    "that",    "the",
      "their",   "theirs",  "them",    "themselves", "then", "there",  "these",   "they",    "this",
      "those",   "though",  "through", "thus",   "to",      "too",     "under",   "unless",  "until",
      "up",      "upon",    "us",      "very",   "via",     "was",     "we",      "were",    "what",
      "whatever", "when",   "where",   "whether", "which",  "while",   "who",     "whom",    "whose",
      "why",     "will",    "with",    "within", "without", "would",   "yet",     "you",     "your",
      "yours",   "yourself", "yourselves",
  };
  return words;
}

void GlossaryConfig::validate() const {
  if (min_freq < 1) throw Error("terms", "min_freq must be >= 1");
  if (max_ngram < 1 || max_ngram > 5) throw Error("terms", "max_ngram must be in [1,5]");
  if (max_terms_per_segment < 1) throw Error("terms", "max_terms_per_segment must be >= 1");
  if (separator.empty()) throw Error("terms", "separator must be non-empty");
}

int ngram_length(std::string_view term) { return static_cast<int>(text::word_count(term)); }

std::vector<std::string> extract_terms(const SegmentPair& pair, const LanguagePair& lang, Gateway& gateway,
                                       const GenerationConfig& cfg, int n, std::string_view separator,
                                       const DisplayNames& names) {
  PromptRequest req;
  req.kind = PromptKind::term_extraction;
  req.lang = lang;
  req.source = pair.source;
  req.pair_target = pair.target;
  req.term_count = n;
  req.term_separator = std::string(separator);
  req.display_names = names;
  const auto completion = gateway.complete(render(req), cfg);

  std::vector<std::string> lines;
  for (auto& line : text::split_lines(completion.text)) {
    if (!text::trim(line).empty()) lines.push_back(std::move(line));
  }
  if (lines.empty()) spdlog::warn("terms: empty extraction for segment {}", pair.id);
  return lines;
}

namespace {

// "12." / "3)" prefixes.
std::string_view strip_enumeration(std::string_view line) {
  std::size_t i = 0;
  while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
  const auto digits_start = i;
  while (i < line.size() && line[i] >= '0' && line[i] <= '9') ++i;
  if (i > digits_start && i < line.size() && (line[i] == '.' || line[i] == ')')) {
    return line.substr(i + 1);
  }
  return line;
}

bool contains_ci(std::string_view haystack, std::string_view needle) {
  return text::to_lower(haystack).find(text::to_lower(needle)) != std::string::npos;
}

bool all_stopwords(std::string_view src, const std::set<std::string, std::less<>>& stopwords) {
  const auto tokens = text::match_tokens(src);
  return std::all_of(tokens.begin(), tokens.end(),
                     [&](const std::string& t) { return stopwords.count(t) > 0; });
}

// Most frequent surface form; ties go to the smallest string.
std::string best_surface(const std::map<std::string, int>& surfaces) {
  const std::string* best = nullptr;
  int best_count = 0;
  for (const auto& [surface, count] : surfaces) {
    if (count > best_count) {
      best = &surface;
      best_count = count;
    }
  }
  return best ? *best : std::string();
}

bool is_contiguous_subsequence(const std::vector<std::string>& needle, const std::vector<std::string>& hay) {
  if (needle.empty() || needle.size() > hay.size()) return false;
  return std::search(hay.begin(), hay.end(), needle.begin(), needle.end()) != hay.end();
}

}  // namespace

ParsedTerms parse_term_lines(std::span<const std::string> lines, std::string_view separator,
                             std::string_view source_sentence, std::string_view target_sentence) {
  ParsedTerms out;
  if (separator.empty()) throw Error("terms", "separator must be non-empty");
  for (const auto& raw : lines) {
    if (text::trim(raw).empty()) continue;
    const auto line = strip_enumeration(raw);
    const auto pos = line.find(separator);
    if (pos == std::string_view::npos) {
      ++out.malformed;
      continue;
    }
    auto src = text::normalize_whitespace(line.substr(0, pos));
    auto tgt = text::normalize_whitespace(line.substr(pos + separator.size()));
    if (src.empty() || tgt.empty()) {
      ++out.malformed;
      continue;
    }
    ParsedTerm pt;
    pt.src_present = contains_ci(source_sentence, src);
    pt.tgt_present = contains_ci(target_sentence, tgt);
    pt.term = TermPair{std::move(src), std::move(tgt), 1, 0};
    pt.term.ngram_len = ngram_length(pt.term.src);
    out.terms.push_back(std::move(pt));
  }
  return out;
}

Glossary compile_glossary(std::span<const TermPair> candidates, const GlossaryConfig& cfg) {
  cfg.validate();
  struct Aggregate {
    int freq = 0;
    std::map<std::string, int> src_surfaces;
    std::map<std::string, int> tgt_surfaces;
  };
  std::map<std::pair<std::string, std::string>, Aggregate> pairs;
  for (const auto& c : candidates) {
    auto src = text::normalize_whitespace(c.src);
    auto tgt = text::normalize_whitespace(c.tgt);
    if (src.empty() || tgt.empty() || c.freq < 1) continue;
    auto& agg = pairs[{text::to_lower(src), text::to_lower(tgt)}];
    agg.freq += c.freq;
    agg.src_surfaces[src] += c.freq;
    agg.tgt_surfaces[tgt] += c.freq;
  }

  std::map<std::string, TermPair> best_by_src;
  for (const auto& [key, agg] : pairs) {
    TermPair cand{best_surface(agg.src_surfaces), best_surface(agg.tgt_surfaces), agg.freq, 0};
    cand.ngram_len = ngram_length(cand.src);
    if (cand.ngram_len > cfg.max_ngram) continue;
    if (all_stopwords(cand.src, cfg.stopwords)) continue;
    auto [it, inserted] = best_by_src.try_emplace(key.first, cand);
    if (!inserted) {
      auto& cur = it->second;
      if (cand.freq > cur.freq || (cand.freq == cur.freq && cand.tgt < cur.tgt)) cur = std::move(cand);
    }
  }

  Glossary g;
  for (auto& [src_key, term] : best_by_src) {
    if (term.freq >= cfg.min_freq) g.entries.push_back(std::move(term));
  }
  std::sort(g.entries.begin(), g.entries.end(), [](const TermPair& a, const TermPair& b) {
    if (a.ngram_len != b.ngram_len) return a.ngram_len > b.ngram_len;
    if (a.freq != b.freq) return a.freq > b.freq;
    return a.src < b.src;
  });
  if (g.empty()) spdlog::warn("terms: compiled glossary is empty");
  return g;
}

std::vector<TermPair> match_terms(std::string_view source, const Glossary& glossary, int max_terms,
                                  bool suppress_overlaps) {
  std::vector<TermPair> out;
  if (max_terms < 1) return out;
  const auto tokens = text::match_tokens(source);
  std::unordered_set<std::string> ngrams;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    std::string gram;
    for (std::size_t n = 0; n < 5 && i + n < tokens.size(); ++n) {
      if (n) gram.push_back(' ');
      gram += tokens[i + n];
      ngrams.insert(gram);
    }
  }

  std::vector<std::vector<std::string>> selected;
  for (const auto& entry : glossary.entries) {
    auto key_tokens = text::match_tokens(entry.src);
    if (key_tokens.empty() || key_tokens.size() > 5) continue;
    if (!ngrams.count(text::join(key_tokens, " "))) continue;
    if (suppress_overlaps &&
        std::any_of(selected.begin(), selected.end(),
                    [&](const auto& sel) {
                      return is_contiguous_subsequence(key_tokens, sel) || is_contiguous_subsequence(sel, key_tokens);
                    })) {
      continue;
    }
    out.push_back(entry);
    selected.push_back(std::move(key_tokens));
    if (out.size() == static_cast<std::size_t>(max_terms)) break;
  }
  return out;
}

std::vector<TermPair> select_fuzzy_terms(std::string_view source,
                                         std::span<const std::vector<TermPair>> per_match_terms,
                                         int max_terms, bool suppress_overlaps) {
  Glossary pool;
  std::unordered_set<std::string> seen;
  for (const auto& terms : per_match_terms) {
    for (const auto& t : terms) {
      if (seen.insert(text::join(text::match_tokens(t.src), " ")).second) pool.entries.push_back(t);
    }
  }
  std::stable_sort(pool.entries.begin(), pool.entries.end(),
                   [](const TermPair& a, const TermPair& b) { return a.ngram_len > b.ngram_len; });
  return match_terms(source, pool, max_terms, suppress_overlaps);
}

std::string glossary_to_tsv(const Glossary& glossary) {
  std::ostringstream out;
  for (const auto& e : glossary.entries) {
    out << e.src << '\t' << e.tgt << '\t' << e.freq << '\t' << e.ngram_len << '\n';
  }
  return out.str();
}

void save_glossary(const Glossary& glossary, const std::filesystem::path& path) {
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw Error("terms", "cannot write " + path.string());
  file << glossary_to_tsv(glossary);
  if (!file) throw Error("terms", "write failed for " + path.string());
}

Glossary glossary_from_tsv(std::string_view content) {
  Glossary g;
  std::size_t lineno = 0;
  for (const auto& line : text::split_lines(content)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::size_t start = 0;
    for (;;) {
      const auto tab = line.find('\t', start);
      cols.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (cols.size() != 4) throw RecordError("terms", lineno, "expected src<TAB>tgt<TAB>freq<TAB>ngram_len");
    try {
      g.entries.push_back(TermPair{cols[0], cols[1], std::stoi(cols[2]), std::stoi(cols[3])});
    } catch (const std::logic_error&) {
      throw RecordError("terms", lineno, "freq and ngram_len must be integers");
    }
  }
  return g;
}

Glossary load_glossary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("terms", "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return glossary_from_tsv(buf.str());
}

std::vector<TermPair> terms_from_jsonl(std::string_view content) {
  std::vector<TermPair> out;
  std::size_t lineno = 0;
  for (const auto& line : text::split_lines(content)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    try {
      const auto j = json::parse(line);
      TermPair t{j.at("src").get<std::string>(), j.at("tgt").get<std::string>(), j.value("freq", 1), 0};
      t.ngram_len = ngram_length(t.src);
      out.push_back(std::move(t));
    } catch (const json::exception& e) {
      throw RecordError("terms", lineno, std::string("bad term record: ") + e.what());
    }
  }
  return out;
}

std::string terms_to_jsonl(std::span<const TermPair> terms) {
  std::string out;
  for (const auto& t : terms) {
    out += json{{"src", t.src}, {"tgt", t.tgt}, {"freq", t.freq}}.dump();
    out += '\n';
  }
  return out;
}

}  // namespace adaptmt
