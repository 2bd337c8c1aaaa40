#pragma once

#include <string>

namespace adaptmt {

/// A bilingual term with its corpus frequency and source n-gram length.
struct TermPair {
  std::string src;
  std::string tgt;
  int freq = 1;
  int ngram_len = 1;

  friend bool operator==(const TermPair&, const TermPair&) = default;
};

}  // namespace adaptmt
