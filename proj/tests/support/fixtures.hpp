#pragma once

#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "adaptmt/prompting.hpp"
#include "adaptmt/retrieval.hpp"
#include "adaptmt/text.hpp"
#include "adaptmt/tm.hpp"

#ifndef ADAPTMT_GOLDEN_DIR
#error "ADAPTMT_GOLDEN_DIR must be defined"
#endif

namespace fixtures {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string golden(adaptmt::PromptKind kind) {
  return read_file(std::string(ADAPTMT_GOLDEN_DIR) + "/" + std::string(adaptmt::to_string(kind)) + ".txt");
}

inline adaptmt::FuzzyMatch match(adaptmt::SegmentId id, std::string src, std::string tgt, double score) {
  return {adaptmt::SegmentPair{id, std::move(src), std::move(tgt), adaptmt::Origin::fixture, 0}, score};
}

inline const std::string kSource = "Press the power button to restart the device.";

/// The canonical request behind tests/golden/<kind>.txt. Matches are given
/// best first, as retrieval returns them.
inline adaptmt::PromptRequest canonical(adaptmt::PromptKind kind) {
  using adaptmt::PromptKind;
  adaptmt::PromptRequest r;
  r.kind = kind;
  r.source = kSource;
  const std::string m1 = "Press the power button to turn off the device.";
  const std::string m2 = "Press the reset button to restart the router.";
  switch (kind) {
    case PromptKind::zero_shot:
      r.lang = adaptmt::LanguagePair::make("en", "ar");
      break;
    case PromptKind::few_shot_fuzzy:
      r.lang = adaptmt::LanguagePair::make("en", "ar");
      r.matches = {match(1, m1, "اضغط على زر الطاقة لإيقاف تشغيل الجهاز.", 0.9),
                   match(2, m2, "اضغط على زر إعادة الضبط لإعادة تشغيل الموجه.", 0.7)};
      break;
    case PromptKind::few_shot_random:
      r.lang = adaptmt::LanguagePair::make("en", "ar");
      r.matches = {match(1, m1, "اضغط على زر الطاقة لإيقاف تشغيل الجهاز.", 0.0),
                   match(2, m2, "اضغط على زر إعادة الضبط لإعادة تشغيل الموجه.", 0.0)};
      break;
    case PromptKind::few_shot_fuzzy_new_mt:
    case PromptKind::few_shot_fuzzy_all_mt:
      r.lang = adaptmt::LanguagePair::make("en", "zh");
      r.matches = {match(1, m1, "按下电源按钮关闭设备。", 0.9), match(2, m2, "按下重置按钮重新启动路由器。", 0.7)};
      r.mt_new = "按下电源按钮重启设备。";
      if (kind == PromptKind::few_shot_fuzzy_all_mt) {
        r.mt_matches = std::vector<std::string>{"按电源按钮关掉设备。", "按复位按钮重启路由器。"};
      }
      break;
    case PromptKind::zero_shot_glossary_terms:
    case PromptKind::few_shot_fuzzy_terms:
    case PromptKind::few_shot_glossary_terms:
      r.lang = adaptmt::LanguagePair::make("en", "es");
      if (kind != PromptKind::zero_shot_glossary_terms) {
        r.matches = {match(1, m1, "Pulse el botón de encendido para apagar el dispositivo.", 0.9),
                     match(2, m2, "Pulse el botón de reinicio para reiniciar el router.", 0.7)};
        r.match_terms = {{{"power button", "botón de encendido", 1, 2}, {"device", "dispositivo", 1, 1}},
                         {{"reset button", "botón de reinicio", 1, 2}, {"router", "router", 1, 1}}};
      }
      r.terms = {{"power button", "botón de encendido", 1, 2}, {"device", "dispositivo", 1, 1}};
      if (kind == PromptKind::few_shot_glossary_terms) {
        r.terms = {{"power button", "botón de encendido", 3, 2},
                   {"restart", "reiniciar", 2, 1},
                   {"device", "dispositivo", 2, 1}};
      }
      break;
    case PromptKind::term_extraction:
      r.lang = adaptmt::LanguagePair::make("en", "fr");
      r.pair_target = "Appuyez sur le bouton d'alimentation pour redémarrer l'appareil.";
      r.term_count = 5;
      r.term_separator = "=";
      break;
  }
  return r;
}

// -- synthetic corpora -------------------------------------------------------

inline std::vector<std::string> vocabulary(std::size_t n, std::mt19937_64& rng) {
  static const char* syllables[] = {"ka", "lo", "mi", "ne", "ru", "sa", "to", "vi", "be", "da",
                                    "fe", "gi", "ho", "ju", "pa", "re", "si", "tu", "wo", "ze"};
  std::set<std::string> seen;
  std::vector<std::string> out;
  while (out.size() < n) {
    const int len = 1 + static_cast<int>(rng() % 3);
    std::string w;
    for (int i = 0; i < len; ++i) w += syllables[rng() % 20];
    if (seen.insert(w).second) out.push_back(w);
  }
  return out;
}

/// `n` distinct source sentences (case-insensitively) with a target derived
/// word by word. Deterministic for a seed.
inline std::vector<std::pair<std::string, std::string>> corpus(std::size_t n, std::uint64_t seed,
                                                              std::size_t vocab = 400) {
  std::mt19937_64 rng(seed);
  const auto src_vocab = vocabulary(vocab, rng);
  std::set<std::string> seen;
  std::vector<std::pair<std::string, std::string>> out;
  while (out.size() < n) {
    const int len = 4 + static_cast<int>(rng() % 10);
    std::string s, t;
    for (int i = 0; i < len; ++i) {
      const auto& w = src_vocab[rng() % src_vocab.size()];
      s += (i ? " " : "") + (i == 0 ? std::string(1, static_cast<char>(w[0] - 32)) + w.substr(1) : w);
      t += (i ? " " : "") + std::string("x") + w;
    }
    s += ".";
    t += ".";
    if (seen.insert(adaptmt::text::to_lower(s)).second) out.emplace_back(s, t);
  }
  return out;
}

inline adaptmt::TranslationMemory tm_from(const std::vector<std::pair<std::string, std::string>>& rows,
                                          adaptmt::LanguagePair lang = adaptmt::LanguagePair::make("en", "fr")) {
  adaptmt::TranslationMemory tm("fixture", lang);
  for (const auto& [s, t] : rows) tm.add(s, t);
  return tm;
}

}  // namespace fixtures
