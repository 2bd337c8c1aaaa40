#include "adaptmt/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "adaptmt/error.hpp"
#include "adaptmt/hash.hpp"

namespace adaptmt {

using json = nlohmann::json;

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  if (p.empty()) return {};
  std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

void reject_secrets(const json& j, const std::string& where) {
  if (!j.is_object()) return;
  for (const auto& [key, value] : j.items()) {
    if (key == "api_key" || key == "token" || key == "secret" || key == "password") {
      throw Error("config", where + "." + key + ": secrets belong in environment variables");
    }
    reject_secrets(value, where + "." + key);
  }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error("config", std::string("field '") + key + "' has the wrong type");
  }
}

}  // namespace

void apply_generation(GenerationConfig& cfg, const json& j) {
  if (!j.is_object()) throw Error("config", "'generation' must be an object");
  cfg.model = get_or(j, "model", cfg.model);
  cfg.top_p = get_or(j, "top_p", cfg.top_p);
  cfg.temperature = get_or(j, "temperature", cfg.temperature);
  cfg.stop = get_or(j, "stop", cfg.stop);
  cfg.max_tokens = get_or(j, "max_tokens", cfg.max_tokens);
  if (j.contains("decoding")) cfg.decoding = decoding_from_string(get_or<std::string>(j, "decoding", ""));
  cfg.batch_size = get_or(j, "batch_size", cfg.batch_size);
  cfg.max_parallel = get_or(j, "max_parallel", cfg.max_parallel);
  cfg.validate();
}

void apply_strategy(StrategySpec& spec, const json& j) {
  if (!j.is_object()) throw Error("config", "'strategy' must be an object");
  const auto generation = spec.generation;
  const auto postprocess = spec.postprocess;
  const auto dynamic = spec.dynamic_max_tokens;
  const auto seed = spec.seed;
  const auto kind = j.contains("kind") ? prompt_kind_from_string(get_or<std::string>(j, "kind", "")) : spec.kind;
  spec = StrategySpec::for_kind(kind, get_or(j, "k", spec.top_k), get_or(j, "max_terms", spec.max_terms));
  spec.generation = generation;
  spec.postprocess = j.contains("postprocess")
                         ? postprocess_mode_from_string(get_or<std::string>(j, "postprocess", ""))
                         : postprocess;
  spec.dynamic_max_tokens = get_or(j, "dynamic_max_tokens", dynamic);
  spec.seed = get_or(j, "seed", seed);
}

AppConfig config_from_json(const json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw Error("config", "config must be a JSON object");
  reject_secrets(j, "config");
  AppConfig cfg;
  try {
    if (!j.contains("languages")) throw Error("config", "missing 'languages'");
    const auto& langs = j["languages"];
    const auto source = get_or<std::string>(langs, "source", "");
    const auto target = get_or<std::string>(langs, "target", "");
    cfg.lang = LanguagePair::make(source, target);
    if (j.contains("multipliers")) {
      for (const auto& [code, value] : j["multipliers"].items()) {
        if (code == target) cfg.lang.length_multiplier = value.get<int>();
      }
    }
    cfg.lang.length_multiplier = get_or(langs, "multiplier", cfg.lang.length_multiplier);
    cfg.lang.validate();

    if (j.contains("display_names")) {
      for (const auto& [code, name] : j["display_names"].items()) cfg.display_names[code] = name.get<std::string>();
    }

    if (j.contains("provider")) {
      const auto& p = j["provider"];
      cfg.provider.kind = provider_kind_from_string(get_or<std::string>(p, "kind", "echo_top_match"));
      cfg.provider.fixtures = resolve(base_dir, get_or<std::string>(p, "fixtures", ""));
      cfg.provider.endpoint = get_or<std::string>(p, "endpoint", "");
      cfg.provider.api_key_env = get_or<std::string>(p, "api_key_env", "");
      cfg.provider.timeout = std::chrono::milliseconds(get_or<long long>(p, "timeout_ms", 60000));
      if (cfg.provider.kind == ProviderKind::http_openai_compatible && cfg.provider.endpoint.empty()) {
        throw Error("config", "provider kind http_openai_compatible requires 'endpoint'");
      }
      if (cfg.provider.kind == ProviderKind::fixture && cfg.provider.fixtures.empty()) {
        throw Error("config", "provider kind fixture requires 'fixtures'");
      }
    }

    if (j.contains("mt")) {
      const auto& m = j["mt"];
      cfg.mt.kind = get_or<std::string>(m, "kind", "none");
      cfg.mt.name = get_or<std::string>(m, "name", cfg.mt.kind);
      cfg.mt.fixtures = resolve(base_dir, get_or<std::string>(m, "fixtures", ""));
      cfg.mt.endpoint = get_or<std::string>(m, "endpoint", "");
      if (cfg.mt.kind != "none" && cfg.mt.kind != "fixture" && cfg.mt.kind != "http") {
        throw Error("config", "mt.kind must be none, fixture or http");
      }
    }

    if (j.contains("generation")) apply_generation(cfg.strategy.generation, j["generation"]);
    if (j.contains("strategy")) apply_strategy(cfg.strategy, j["strategy"]);
    cfg.strategy.validate();

    if (j.contains("budget")) {
      const auto& b = j["budget"];
      cfg.budget.context_limit = get_or(b, "context_limit", cfg.budget.context_limit);
      cfg.budget.approx_chars_per_token = get_or(b, "chars_per_token", cfg.budget.approx_chars_per_token);
    }
    cfg.budget.validate();

    if (j.contains("retry")) {
      const auto& r = j["retry"];
      cfg.retry.max_attempts = get_or(r, "max_attempts", cfg.retry.max_attempts);
      cfg.retry.base_delay = std::chrono::milliseconds(get_or<long long>(r, "base_delay_ms", cfg.retry.base_delay.count()));
      cfg.retry.factor = get_or(r, "factor", cfg.retry.factor);
      cfg.retry.max_delay = std::chrono::milliseconds(get_or<long long>(r, "max_delay_ms", cfg.retry.max_delay.count()));
      cfg.retry.jitter = get_or(r, "jitter", cfg.retry.jitter);
      if (cfg.retry.max_attempts < 1) throw Error("config", "retry.max_attempts must be >= 1");
    }

    if (j.contains("glossary")) {
      const auto& g = j["glossary"];
      cfg.glossary.min_freq = get_or(g, "min_freq", cfg.glossary.min_freq);
      cfg.glossary.max_ngram = get_or(g, "max_ngram", cfg.glossary.max_ngram);
      cfg.glossary.max_terms_per_segment = get_or(g, "max_terms", cfg.glossary.max_terms_per_segment);
      if (g.contains("path")) cfg.glossary_path = resolve(base_dir, get_or<std::string>(g, "path", ""));
      cfg.glossary.validate();
    }
    cfg.seed = get_or<std::uint64_t>(j, "seed", cfg.seed);
    if (!(j.contains("strategy") && j["strategy"].contains("seed"))) cfg.strategy.seed = cfg.seed;
  } catch (const json::exception& e) {
    throw Error("config", std::string("invalid config: ") + e.what());
  } catch (const Error& e) {
    if (e.stage() == "config") throw;
    throw Error("config", e.what());
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(stable_hash64(j.dump())));
  cfg.hash = buf;
  return cfg;
}

AppConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("config", "cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error("config", path.string() + ": " + e.what());
  }
  return config_from_json(j, path.parent_path());
}

std::shared_ptr<Provider> make_provider(const ProviderConfig& cfg) {
  switch (cfg.kind) {
    case ProviderKind::fixture:
      return FixtureProvider::from_file(cfg.fixtures);
    case ProviderKind::echo_top_match:
      return std::make_shared<EchoTopMatchProvider>();
    case ProviderKind::http_openai_compatible:
      return std::make_shared<HttpCompletionProvider>(
          HttpProviderConfig{cfg.endpoint, cfg.api_key_env, cfg.timeout});
  }
  throw Error("config", "unknown provider kind");
}

std::shared_ptr<MtProvider> make_mt_provider(const MtConfig& cfg, const LanguagePair& lang) {
  if (cfg.kind == "none") return nullptr;
  if (cfg.kind == "fixture") return FixtureMtProvider::from_file(cfg.fixtures);
  if (cfg.kind == "http") {
    if (cfg.endpoint.empty()) throw Error("config", "mt kind http requires 'endpoint'");
    return std::make_shared<HttpMtProvider>(cfg.name.empty() ? "http" : cfg.name, cfg.endpoint, lang);
  }
  throw Error("config", "unknown mt kind '" + cfg.kind + "'");
}

}  // namespace adaptmt
