#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "json.hpp"

#include "adaptmt/gateway.hpp"
#include "adaptmt/mt_bridge.hpp"
#include "adaptmt/pipeline.hpp"
#include "adaptmt/prompting.hpp"
#include "adaptmt/terminology.hpp"
#include "adaptmt/tm.hpp"

namespace adaptmt {

struct ProviderConfig {
  ProviderKind kind = ProviderKind::echo_top_match;
  std::filesystem::path fixtures;
  std::string endpoint;
  std::string api_key_env;
  std::chrono::milliseconds timeout{60000};
};

struct MtConfig {
  std::string kind = "none";  // none | fixture | http
  std::string name;
  std::filesystem::path fixtures;
  std::string endpoint;
};

/// Run configuration, read from one JSON file:
///
///   {
///     "languages":     {"source": "en", "target": "fr", "multiplier": 4},
///     "multipliers":   {"ar": 8, "zh": 5, "rw": 5, "fr": 4, "es": 4},
///     "display_names": {"en": "English", "fr": "French"},
///     "provider":      {"kind": "fixture", "fixtures": "llm.jsonl"},
///     "mt":            {"kind": "fixture", "fixtures": "mt.jsonl"},
///     "generation":    {"model": "...", "top_p": 1, "temperature": 0.3, "stop": [],
///                       "decoding": "sampling", "batch_size": 20, "max_parallel": 4},
///     "strategy":      {"kind": "few_shot_fuzzy", "k": 5, "max_terms": 5,
///                       "postprocess": "truncate_newline", "dynamic_max_tokens": false},
///     "budget":        {"context_limit": 4097, "chars_per_token": 4.0},
///     "retry":         {"max_attempts": 6, "base_delay_ms": 1000, "factor": 2,
///                       "max_delay_ms": 60000},
///     "glossary":      {"path": "glossary.tsv", "min_freq": 2, "max_ngram": 5},
///     "seed":          1
///   }
///
/// Every section is optional except "languages". Relative paths resolve
/// against the config file's directory. API keys are never read from the
/// file: "provider.api_key_env" names the environment variable instead.
struct AppConfig {
  LanguagePair lang = LanguagePair::make("en", "fr");
  DisplayNames display_names = default_display_names();
  ProviderConfig provider;
  MtConfig mt;
  StrategySpec strategy;
  BudgetConfig budget;
  RetryPolicy retry;
  GlossaryConfig glossary;
  std::optional<std::filesystem::path> glossary_path;
  std::uint64_t seed = 1;
  /// stable_hash64 of the canonical JSON dump, hex.
  std::string hash;
};

/// Throws Error("config") on any schema violation.
AppConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
AppConfig load_config(const std::filesystem::path& path);

/// Applies a "generation" object onto `cfg`.
void apply_generation(GenerationConfig& cfg, const nlohmann::json& j);
/// Applies a "strategy" object onto `spec` (kind, k, max_terms, ...).
void apply_strategy(StrategySpec& spec, const nlohmann::json& j);

std::shared_ptr<Provider> make_provider(const ProviderConfig& cfg);
/// nullptr for kind "none".
std::shared_ptr<MtProvider> make_mt_provider(const MtConfig& cfg, const LanguagePair& lang);

}  // namespace adaptmt
