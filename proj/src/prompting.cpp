#include "adaptmt/prompting.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "adaptmt/error.hpp"
#include "adaptmt/text.hpp"

namespace adaptmt {

namespace {

constexpr std::array kKinds = {
    PromptKind::zero_shot,
    PromptKind::few_shot_fuzzy,
    PromptKind::few_shot_random,
    PromptKind::few_shot_fuzzy_new_mt,
    PromptKind::few_shot_fuzzy_all_mt,
    PromptKind::zero_shot_glossary_terms,
    PromptKind::few_shot_fuzzy_terms,
    PromptKind::few_shot_glossary_terms,
    PromptKind::term_extraction,
};

// Field values are single template lines.
std::string one_line(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return out;
}

std::string terms_line(std::span<const TermPair> terms) {
  const auto body = format_terms(terms);
  return body.empty() ? std::string("Terms:") : "Terms: " + body;
}

const std::string& display_name(const PromptRequest& req, const std::string& code) {
  return resolve_display_name(req.display_names, code);
}

// Example order for rendering: ascending similarity; among equal scores the
// earlier-ranked example goes later so rank 1 sits next to the query.
std::vector<std::size_t> example_order(const std::vector<FuzzyMatch>& matches) {
  std::vector<std::size_t> order(matches.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (matches[a].score != matches[b].score) return matches[a].score < matches[b].score;
    return a > b;
  });
  return order;
}

void validate(const PromptRequest& req) {
  if (text::trim(req.source).empty()) throw Error("prompt", "missing required field 'source'");
  const auto kind = req.kind;
  if (needs_matches(kind) && req.matches.empty()) {
    throw Error("prompt", "missing required field 'matches' for " + std::string(to_string(kind)));
  }
  if (needs_mt_new(kind) && !req.mt_new) {
    throw Error("prompt", "missing required field 'mt_new' for " + std::string(to_string(kind)));
  }
  if (needs_mt_matches(kind)) {
    if (!req.mt_matches) {
      throw Error("prompt", "missing required field 'mt_matches' for " + std::string(to_string(kind)));
    }
    if (req.mt_matches->size() != req.matches.size()) {
      throw Error("prompt", "field 'mt_matches' is not aligned with 'matches'");
    }
  }
  if (needs_terms(kind) && req.terms.empty()) {
    throw Error("prompt", "missing required field 'terms' for " + std::string(to_string(kind)));
  }
  if (needs_match_terms(kind) && req.match_terms.size() != req.matches.size()) {
    throw Error("prompt", "field 'match_terms' is not aligned with 'matches'");
  }
  if (kind == PromptKind::term_extraction) {
    if (text::trim(req.pair_target).empty()) {
      throw Error("prompt", "missing required field 'pair_target' for term_extraction");
    }
    if (req.term_count < 1) throw Error("prompt", "field 'term_count' must be >= 1");
    if (req.term_separator.empty()) throw Error("prompt", "missing required field 'term_separator'");
  }
}

// Renders without presence checks; used by fit() on partially reduced requests.
std::string render_unchecked(const PromptRequest& req) {
  const auto& src_name = display_name(req, req.lang.source_lang);
  const auto& tgt_name = display_name(req, req.lang.target_lang);
  std::vector<std::string> lines;

  if (req.kind == PromptKind::term_extraction) {
    lines.push_back(src_name + ": " + one_line(req.source));
    lines.push_back(tgt_name + ": " + one_line(req.pair_target));
    lines.emplace_back();
    lines.push_back("Extract " + std::to_string(req.term_count) +
                    " terms from the above sentence pair. Type each " + src_name +
                    " term and its " + tgt_name + " equivalent in one line, separated by '" +
                    req.term_separator + "'.");
    lines.emplace_back();
    lines.emplace_back("1.");
    return text::join(lines, "\n");
  }

  const bool example_terms = needs_match_terms(req.kind) && req.match_terms.size() == req.matches.size();
  const bool example_mt = needs_mt_matches(req.kind) && req.mt_matches &&
                          req.mt_matches->size() == req.matches.size();
  if (needs_matches(req.kind)) {
    for (const auto i : example_order(req.matches)) {
      const auto& pair = req.matches[i].pair;
      if (example_terms) lines.push_back(terms_line(req.match_terms[i]));
      lines.push_back(src_name + ": " + one_line(pair.source));
      if (example_mt) lines.push_back("MT: " + one_line((*req.mt_matches)[i]));
      lines.push_back(tgt_name + ": " + one_line(pair.target));
    }
  }
  if (needs_terms(req.kind)) lines.push_back(terms_line(req.terms));
  lines.push_back(src_name + ": " + one_line(req.source));
  if (needs_mt_new(req.kind)) lines.push_back("MT: " + one_line(req.mt_new.value_or("")));
  lines.push_back(tgt_name + ":");
  return text::join(lines, "\n");
}

PromptKind downgrade_without_matches(PromptKind kind, bool has_terms) {
  switch (kind) {
    case PromptKind::few_shot_fuzzy_terms:
    case PromptKind::few_shot_glossary_terms:
      return has_terms ? PromptKind::zero_shot_glossary_terms : PromptKind::zero_shot;
    default:
      return PromptKind::zero_shot;
  }
}

}  // namespace

const std::string& resolve_display_name(const DisplayNames& names, std::string_view code) {
  if (const auto it = names.find(code); it != names.end()) return it->second;
  const auto primary = code.substr(0, code.find_first_of("-_"));
  if (const auto it = names.find(primary); it != names.end()) return it->second;
  throw Error("prompt", "no display name for language '" + std::string(code) + "'");
}

std::string_view to_string(PromptKind kind) {
  switch (kind) {
    case PromptKind::zero_shot: return "zero_shot";
    case PromptKind::few_shot_fuzzy: return "few_shot_fuzzy";
    case PromptKind::few_shot_random: return "few_shot_random";
    case PromptKind::few_shot_fuzzy_new_mt: return "few_shot_fuzzy_new_mt";
    case PromptKind::few_shot_fuzzy_all_mt: return "few_shot_fuzzy_all_mt";
    case PromptKind::zero_shot_glossary_terms: return "zero_shot_glossary_terms";
    case PromptKind::few_shot_fuzzy_terms: return "few_shot_fuzzy_terms";
    case PromptKind::few_shot_glossary_terms: return "few_shot_glossary_terms";
    case PromptKind::term_extraction: return "term_extraction";
  }
  return "zero_shot";
}

PromptKind prompt_kind_from_string(std::string_view name) {
  for (const auto kind : kKinds) {
    if (to_string(kind) == name) return kind;
  }
  throw Error("prompt", "unknown prompt kind '" + std::string(name) + "'");
}

std::span<const PromptKind> all_prompt_kinds() { return kKinds; }

bool needs_matches(PromptKind kind) {
  switch (kind) {
    case PromptKind::few_shot_fuzzy:
    case PromptKind::few_shot_random:
    case PromptKind::few_shot_fuzzy_new_mt:
    case PromptKind::few_shot_fuzzy_all_mt:
    case PromptKind::few_shot_fuzzy_terms:
    case PromptKind::few_shot_glossary_terms:
      return true;
    default:
      return false;
  }
}

bool needs_mt_new(PromptKind kind) {
  return kind == PromptKind::few_shot_fuzzy_new_mt || kind == PromptKind::few_shot_fuzzy_all_mt;
}

bool needs_mt_matches(PromptKind kind) { return kind == PromptKind::few_shot_fuzzy_all_mt; }

bool needs_terms(PromptKind kind) {
  return kind == PromptKind::zero_shot_glossary_terms || needs_match_terms(kind);
}

bool needs_match_terms(PromptKind kind) {
  return kind == PromptKind::few_shot_fuzzy_terms || kind == PromptKind::few_shot_glossary_terms;
}

const DisplayNames& default_display_names() {
  static const DisplayNames names = {
      {"ar", "Arabic"},  {"de", "German"},     {"en", "English"},    {"es", "Spanish"},
      {"fr", "French"},  {"hi", "Hindi"},      {"it", "Italian"},    {"ja", "Japanese"},
      {"ko", "Korean"},  {"nl", "Dutch"},      {"pt", "Portuguese"}, {"ru", "Russian"},
      {"rw", "Kinyarwanda"}, {"sw", "Swahili"}, {"tr", "Turkish"},   {"zh", "Chinese"},
  };
  return names;
}

std::string format_terms(std::span<const TermPair> terms) {
  std::string out;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (i) out += " - ";
    out += one_line(terms[i].src) + " = " + one_line(terms[i].tgt);
  }
  return out;
}

std::string render(const PromptRequest& req) {
  validate(req);
  return render_unchecked(req);
}

int output_budget(std::string_view source, const LanguagePair& lang) {
  return static_cast<int>(text::word_count(source)) * lang.length_multiplier;
}

void BudgetConfig::validate() const {
  if (context_limit <= 0) throw Error("prompt", "context_limit must be positive");
  if (!(approx_chars_per_token > 0.0)) throw Error("prompt", "approx_chars_per_token must be positive");
}

int estimate_tokens(std::string_view prompt, const BudgetConfig& budget) {
  return static_cast<int>(std::ceil(static_cast<double>(prompt.size()) / budget.approx_chars_per_token));
}

FitResult fit(const PromptRequest& req, const BudgetConfig& budget) {
  budget.validate();
  validate(req);
  FitResult result{req, {}, {}, std::nullopt, 0, output_budget(req.source, req.lang)};
  auto& cur = result.request;

  for (;;) {
    result.prompt_tokens = estimate_tokens(render_unchecked(cur), budget);
    if (result.prompt_tokens + result.output_tokens <= budget.context_limit) break;

    if (!cur.matches.empty()) {
      // The first example in render order is the weakest one.
      const auto victim = example_order(cur.matches).front();
      result.dropped_matches.push_back(cur.matches[victim]);
      cur.matches.erase(cur.matches.begin() + static_cast<std::ptrdiff_t>(victim));
      if (cur.mt_matches && victim < cur.mt_matches->size()) {
        cur.mt_matches->erase(cur.mt_matches->begin() + static_cast<std::ptrdiff_t>(victim));
      }
      if (victim < cur.match_terms.size()) {
        cur.match_terms.erase(cur.match_terms.begin() + static_cast<std::ptrdiff_t>(victim));
      }
      if (cur.matches.empty() && needs_matches(cur.kind)) {
        if (!result.downgraded_from) result.downgraded_from = cur.kind;
        cur.kind = downgrade_without_matches(cur.kind, !cur.terms.empty());
        cur.mt_new.reset();
        cur.mt_matches.reset();
        cur.match_terms.clear();
      }
      continue;
    }
    if (!cur.terms.empty()) {
      result.dropped_terms.push_back(cur.terms.back());
      cur.terms.pop_back();
      if (cur.terms.empty() && cur.kind == PromptKind::zero_shot_glossary_terms) {
        if (!result.downgraded_from) result.downgraded_from = cur.kind;
        cur.kind = PromptKind::zero_shot;
      }
      continue;
    }
    throw Error("prompt", "source too long: " + std::to_string(result.prompt_tokens) + " prompt + " +
                              std::to_string(result.output_tokens) + " output tokens exceed the " +
                              std::to_string(budget.context_limit) + "-token context");
  }
  return result;
}

}  // namespace adaptmt
