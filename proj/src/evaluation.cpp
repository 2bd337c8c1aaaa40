#include "adaptmt/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "adaptmt/error.hpp"
#include "adaptmt/text.hpp"

namespace adaptmt {

std::string_view to_string(Metric m) {
  switch (m) {
    case Metric::bleu: return "bleu";
    case Metric::chrf: return "chrf";
    case Metric::chrf_pp: return "chrf++";
  }
  return "bleu";
}

std::string MetricScore::params_string() const {
  std::string out;
  for (const auto& [k, v] : params) {
    if (!out.empty()) out += ';';
    out += k + "=" + v;
  }
  return out;
}

std::vector<std::string> eval_tokenize(std::string_view s) {
  std::string spaced;
  for (char32_t cp : text::decode_utf8(s)) {
    if (text::is_punctuation(cp)) {
      spaced.push_back(' ');
      text::append_utf8(spaced, cp);
      spaced.push_back(' ');
    } else {
      text::append_utf8(spaced, cp);
    }
  }
  return text::split_whitespace(spaced);
}

namespace {

void check_aligned(std::span<const std::string> hyps, std::span<const std::string> refs) {
  if (hyps.empty()) throw Error("eval", "no segments to score");
  if (hyps.size() != refs.size()) {
    throw Error("eval", "hypotheses (" + std::to_string(hyps.size()) + ") and references (" +
                            std::to_string(refs.size()) + ") differ in length");
  }
}

template <typename Seq>
std::map<Seq, int> ngram_counts(const std::vector<typename Seq::value_type>& units, int n) {
  std::map<Seq, int> counts;
  if (static_cast<int>(units.size()) < n) return counts;
  for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= units.size(); ++i) {
    ++counts[Seq(units.begin() + static_cast<std::ptrdiff_t>(i),
                 units.begin() + static_cast<std::ptrdiff_t>(i) + n)];
  }
  return counts;
}

struct OrderStats {
  double matches = 0;
  double hyp_total = 0;
  double ref_total = 0;
};

template <typename Seq>
void accumulate(OrderStats& s, const std::vector<typename Seq::value_type>& hyp,
                const std::vector<typename Seq::value_type>& ref, int n) {
  const auto h = ngram_counts<Seq>(hyp, n);
  const auto r = ngram_counts<Seq>(ref, n);
  for (const auto& [g, c] : h) {
    s.hyp_total += c;
    if (const auto it = r.find(g); it != r.end()) s.matches += std::min(c, it->second);
  }
  for (const auto& [g, c] : r) s.ref_total += c;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

MetricScore corpus_bleu(std::span<const std::string> hyps, std::span<const std::string> refs, int max_n) {
  check_aligned(hyps, refs);
  if (max_n < 1) throw Error("eval", "max_n must be >= 1");
  std::vector<OrderStats> stats(static_cast<std::size_t>(max_n));
  double hyp_len = 0;
  double ref_len = 0;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    const auto h = eval_tokenize(hyps[i]);
    const auto r = eval_tokenize(refs[i]);
    hyp_len += static_cast<double>(h.size());
    ref_len += static_cast<double>(r.size());
    for (int n = 1; n <= max_n; ++n) accumulate<std::vector<std::string>>(stats[n - 1], h, r, n);
  }

  MetricScore score;
  score.metric = Metric::bleu;
  score.params = {{"max_n", std::to_string(max_n)},
                  {"smoothing", "add-one(n>1)"},
                  {"tokenize", "punct-split+whitespace"}};
  if (hyp_len == 0 || stats[0].matches == 0) {
    score.value = 0.0;
    return score;
  }
  double log_sum = 0.0;
  for (int n = 1; n <= max_n; ++n) {
    const auto& s = stats[n - 1];
    const double p = n == 1 ? s.matches / s.hyp_total : (s.matches + 1.0) / (s.hyp_total + 1.0);
    log_sum += std::log(p);
  }
  const double bp = hyp_len >= ref_len ? 1.0 : std::exp(1.0 - ref_len / hyp_len);
  score.value = std::clamp(100.0 * bp * std::exp(log_sum / max_n), 0.0, 100.0);
  return score;
}

MetricScore chrf(std::span<const std::string> hyps, std::span<const std::string> refs, int char_n, int word_n,
                 double beta) {
  check_aligned(hyps, refs);
  if (char_n < 1 || word_n < 0 || !(beta > 0)) throw Error("eval", "invalid chrF parameters");
  std::vector<OrderStats> char_stats(static_cast<std::size_t>(char_n));
  std::vector<OrderStats> word_stats(static_cast<std::size_t>(word_n));
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    auto squeeze = [](std::string_view s) {
      std::u32string out;
      for (char32_t cp : text::decode_utf8(s)) {
        if (!text::is_space(cp)) out.push_back(cp);
      }
      return out;
    };
    const auto hc = squeeze(hyps[i]);
    const auto rc = squeeze(refs[i]);
    const std::vector<char32_t> hv(hc.begin(), hc.end());
    const std::vector<char32_t> rv(rc.begin(), rc.end());
    for (int n = 1; n <= char_n; ++n) accumulate<std::u32string>(char_stats[n - 1], hv, rv, n);
    if (word_n > 0) {
      const auto hw = text::split_whitespace(hyps[i]);
      const auto rw = text::split_whitespace(refs[i]);
      for (int n = 1; n <= word_n; ++n) accumulate<std::vector<std::string>>(word_stats[n - 1], hw, rw, n);
    }
  }

  double sum_p = 0;
  double sum_r = 0;
  int effective = 0;
  for (const auto* group : {&char_stats, &word_stats}) {
    for (const auto& s : *group) {
      if (s.hyp_total == 0 || s.ref_total == 0) continue;
      sum_p += s.matches / s.hyp_total;
      sum_r += s.matches / s.ref_total;
      ++effective;
    }
  }
  MetricScore score;
  score.metric = word_n > 0 ? Metric::chrf_pp : Metric::chrf;
  std::ostringstream b;
  b << beta;
  score.params = {{"char_order", std::to_string(char_n)}, {"word_order", std::to_string(word_n)}, {"beta", b.str()}};
  if (effective == 0) return score;
  const double p = sum_p / effective;
  const double r = sum_r / effective;
  const double b2 = beta * beta;
  if (p + r == 0) return score;
  score.value = std::clamp(100.0 * (1 + b2) * p * r / (b2 * p + r), 0.0, 100.0);
  return score;
}

std::string Report::to_csv() const {
  std::ostringstream out;
  out << "run_label,metric,value,n_segments,params\n";
  auto quote = [](const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
      if (c == '"') q += '"';
      q += c;
    }
    return q + "\"";
  };
  for (const auto& row : rows) {
    out << quote(row.run_label) << ',' << to_string(row.score.metric) << ',' << fmt(row.score.value) << ','
        << row.n_segments << ',' << quote(row.score.params_string()) << '\n';
  }
  return out.str();
}

std::string Report::to_table() const {
  std::vector<std::string> labels;
  std::vector<Metric> metrics;
  std::map<std::pair<std::string, Metric>, double> cells;
  for (const auto& row : rows) {
    if (std::find(labels.begin(), labels.end(), row.run_label) == labels.end()) labels.push_back(row.run_label);
    if (std::find(metrics.begin(), metrics.end(), row.score.metric) == metrics.end()) {
      metrics.push_back(row.score.metric);
    }
    cells[{row.run_label, row.score.metric}] = row.score.value;
  }
  std::size_t width = 3;
  for (const auto& l : labels) width = std::max(width, l.size());

  std::ostringstream out;
  auto pad = [](std::string s, std::size_t w) {
    if (s.size() < w) s.append(w - s.size(), ' ');
    return s;
  };
  auto rpad = [](std::string s, std::size_t w) {
    if (s.size() < w) s.insert(0, w - s.size(), ' ');
    return s;
  };
  out << pad("run", width);
  for (const auto m : metrics) out << "  " << rpad(std::string(to_string(m)), 8);
  out << '\n';
  for (const auto& l : labels) {
    out << pad(l, width);
    for (const auto m : metrics) {
      const auto it = cells.find({l, m});
      out << "  " << rpad(it == cells.end() ? "-" : fmt(it->second), 8);
    }
    out << '\n';
  }
  out << "note: built-in punctuation-split tokenization; scores are not comparable to spBLEU/SentencePiece.\n";
  return out.str();
}

Report report(std::span<const RunOutputs> runs, std::span<const std::string> refs) {
  Report rep;
  for (const auto& run : runs) {
    if (run.hypotheses.size() != refs.size()) {
      throw Error("eval", "run '" + run.label + "' has " + std::to_string(run.hypotheses.size()) +
                              " outputs for " + std::to_string(refs.size()) + " references");
    }
    rep.rows.push_back({run.label, corpus_bleu(run.hypotheses, refs), refs.size()});
    rep.rows.push_back({run.label, chrf(run.hypotheses, refs, 6, 0), refs.size()});
    rep.rows.push_back({run.label, chrf(run.hypotheses, refs, 6, 2), refs.size()});
  }
  return rep;
}

}  // namespace adaptmt
