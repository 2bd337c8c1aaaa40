#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace adaptmt {

enum class Metric { bleu, chrf, chrf_pp };

std::string_view to_string(Metric m);

struct MetricScore {
  Metric metric = Metric::bleu;
  double value = 0.0;  // [0, 100]
  std::map<std::string, std::string> params;

  /// "k=v;k=v" in key order.
  std::string params_string() const;
};

/// Splits every punctuation code point into its own token, then splits on
/// whitespace.
std::vector<std::string> eval_tokenize(std::string_view s);

/// Corpus BLEU: modified 1-4-gram precisions with add-one smoothing for
/// n > 1, geometric mean, brevity penalty. Throws Error("eval") on empty
/// input or a length mismatch.
MetricScore corpus_bleu(std::span<const std::string> hyps, std::span<const std::string> refs, int max_n = 4);

/// Corpus chrF: character n-grams 1..char_n (whitespace removed) plus word
/// n-grams 1..word_n (word_n = 2 is chrF++). Matches, hypothesis and
/// reference counts are summed over the corpus per order; precision and
/// recall are averaged over the orders where both sides have n-grams, then
/// combined as F-beta.
MetricScore chrf(std::span<const std::string> hyps, std::span<const std::string> refs, int char_n = 6,
                 int word_n = 0, double beta = 2.0);

struct RunOutputs {
  std::string label;
  std::vector<std::string> hypotheses;
};

/// Rows are (run, metric); the CSV columns are run_label, metric, value,
/// n_segments, params.
struct Report {
  struct Row {
    std::string run_label;
    MetricScore score;
    std::size_t n_segments = 0;
  };
  std::vector<Row> rows;

  std::string to_csv() const;
  /// Fixed-width table: one line per run, one column per metric.
  std::string to_table() const;
};

/// Scores every run with BLEU, chrF and chrF++. Throws Error("eval") if any
/// run is not aligned with `refs`.
Report report(std::span<const RunOutputs> runs, std::span<const std::string> refs);

}  // namespace adaptmt
