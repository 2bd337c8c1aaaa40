#include "adaptmt/gateway.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <spdlog/spdlog.h>

#include "json.hpp"

#include "adaptmt/error.hpp"
#include "adaptmt/hash.hpp"
#include "adaptmt/http_client.hpp"
#include "adaptmt/text.hpp"

namespace adaptmt {

using json = nlohmann::json;

std::string_view to_string(Decoding d) { return d == Decoding::greedy ? "greedy" : "sampling"; }

Decoding decoding_from_string(std::string_view name) {
  if (name == "greedy") return Decoding::greedy;
  if (name == "sampling") return Decoding::sampling;
  throw Error("config", "unknown decoding '" + std::string(name) + "'");
}

void GenerationConfig::validate() const {
  if (!(top_p >= 0.0 && top_p <= 1.0)) throw Error("config", "top_p must be in [0,1]");
  if (!(temperature >= 0.0)) throw Error("config", "temperature must be >= 0");
  if (max_tokens < 1) throw Error("config", "max_tokens must be >= 1");
  if (batch_size < 1) throw Error("config", "batch_size must be >= 1");
  if (max_parallel < 1) throw Error("config", "max_parallel must be >= 1");
}

GenerationConfig GenerationConfig::translation() { return GenerationConfig{}; }

GenerationConfig GenerationConfig::term_extraction() {
  GenerationConfig cfg;
  cfg.temperature = 0.0;
  cfg.top_p = 1.0;
  return cfg;
}

GenerationConfig GenerationConfig::greedy() {
  GenerationConfig cfg;
  cfg.model = "bigscience/bloom";
  cfg.decoding = Decoding::greedy;
  cfg.temperature = 0.0;
  cfg.batch_size = 1;
  cfg.max_tokens = 250;
  return cfg;
}

std::vector<std::string> newline_stop() { return {"\n"}; }

std::string_view to_string(FinishReason r) {
  switch (r) {
    case FinishReason::stop: return "stop";
    case FinishReason::length: return "length";
    case FinishReason::other: return "other";
  }
  return "other";
}

namespace {

FinishReason finish_reason_from(std::string_view s) {
  if (s == "stop") return FinishReason::stop;
  if (s == "length") return FinishReason::length;
  return FinishReason::other;
}

bool is_transient(int status) { return status == 0 || status == 429 || status >= 500; }

}  // namespace

// -- fixture ----------------------------------------------------------------

FixtureProvider::FixtureProvider(std::map<std::string, Entry> entries) : entries_(std::move(entries)) {}

std::shared_ptr<FixtureProvider> FixtureProvider::from_jsonl(std::string_view content) {
  auto provider = std::make_shared<FixtureProvider>();
  std::size_t lineno = 0;
  for (const auto& line : text::split_lines(content)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    try {
      const auto j = json::parse(line);
      provider->add_hash(j.at("match").get<std::string>(), j.value("response", std::string()),
                         j.value("status", 200));
    } catch (const json::exception& e) {
      throw RecordError("gateway", lineno, std::string("bad fixture record: ") + e.what());
    }
  }
  return provider;
}

std::shared_ptr<FixtureProvider> FixtureProvider::from_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("config", "cannot open fixture file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return from_jsonl(buf.str());
}

void FixtureProvider::add(std::string_view prompt, std::string response, int status) {
  add_hash(prompt_hash(prompt), std::move(response), status);
}

void FixtureProvider::add_hash(std::string hash, std::string response, int status) {
  entries_[std::move(hash)] = Entry{std::move(response), status};
}

void FixtureProvider::set_fallback(std::string response, int status) {
  add_hash("*", std::move(response), status);
}

Completion FixtureProvider::complete(const std::string& prompt, const GenerationConfig&) {
  const auto hash = prompt_hash(prompt);
  auto it = entries_.find(hash);
  if (it == entries_.end()) it = entries_.find("*");
  if (it == entries_.end()) {
    throw ProviderError("gateway", 404, true, "no fixture for prompt hash " + hash);
  }
  if (it->second.status != 200) {
    throw ProviderError("gateway", it->second.status, !is_transient(it->second.status),
                        "fixture status " + std::to_string(it->second.status));
  }
  return Completion{it->second.response, FinishReason::stop, "fixture-" + hash, 1};
}

// -- echo -------------------------------------------------------------------

std::optional<std::string> EchoTopMatchProvider::last_example_target(std::string_view prompt) {
  const auto lines = text::split_lines(prompt);
  if (lines.size() < 2) return std::nullopt;
  const auto& cue = lines.back();
  if (cue.empty() || cue.back() != ':') return std::nullopt;
  const auto prefix = cue + " ";
  for (std::size_t i = lines.size() - 1; i-- > 0;) {
    if (lines[i].rfind(prefix, 0) == 0) return lines[i].substr(prefix.size());
  }
  return std::nullopt;
}

Completion EchoTopMatchProvider::complete(const std::string& prompt, const GenerationConfig&) {
  const auto id = "echo-" + prompt_hash(prompt);
  if (auto target = last_example_target(prompt)) {
    return Completion{" " + *target, FinishReason::stop, id, 1};
  }
  return Completion{"", FinishReason::other, id, 1};
}

// -- http -------------------------------------------------------------------

HttpCompletionProvider::HttpCompletionProvider(HttpProviderConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.endpoint.empty()) throw Error("config", "http provider requires an endpoint");
  http::parse_url(cfg_.endpoint);
}

std::string HttpCompletionProvider::request_body(const std::string& prompt, const GenerationConfig& cfg) {
  const bool greedy = cfg.decoding == Decoding::greedy;
  json body = {{"model", cfg.model},
               {"prompt", prompt},
               {"top_p", greedy ? 1.0 : cfg.top_p},
               {"temperature", greedy ? 0.0 : cfg.temperature},
               {"max_tokens", cfg.max_tokens}};
  if (!cfg.stop.empty()) body["stop"] = cfg.stop;
  return body.dump();
}

Completion HttpCompletionProvider::complete(const std::string& prompt, const GenerationConfig& cfg) {
  http::Headers headers;
  if (!cfg_.api_key_env.empty()) {
    const char* key = std::getenv(cfg_.api_key_env.c_str());
    if (!key || !*key) {
      throw ProviderError("gateway", 401, true, "environment variable " + cfg_.api_key_env + " is not set");
    }
    headers.emplace_back("Authorization", std::string("Bearer ") + key);
  }
  const auto res = http::post_json(cfg_.endpoint, request_body(prompt, cfg), headers, cfg_.timeout);
  if (res.status == 0) throw ProviderError("gateway", 0, false, "transport error: " + res.error);
  if (res.status == 401 || res.status == 403) {
    throw ProviderError("gateway", res.status, true, "authentication failed");
  }
  if (res.status != 200) {
    ProviderError err("gateway", res.status, !is_transient(res.status),
                      "HTTP " + std::to_string(res.status) + ": " + res.body.substr(0, 200));
    if (const auto ra = res.header("retry-after"); !ra.empty()) {
      char* end = nullptr;
      const double secs = std::strtod(ra.c_str(), &end);
      if (end != ra.c_str() && secs >= 0) {
        err.set_retry_after(std::chrono::milliseconds(static_cast<long long>(secs * 1000)));
      }
    }
    throw err;
  }
  try {
    const auto j = json::parse(res.body);
    const auto& choice = j.at("choices").at(0);
    Completion c;
    c.text = choice.at("text").get<std::string>();
    c.finish_reason = finish_reason_from(choice.value("finish_reason", std::string("stop")));
    c.request_id = j.value("id", std::string());
    return c;
  } catch (const json::exception& e) {
    throw ProviderError("gateway", res.status, true, std::string("malformed completion response: ") + e.what());
  }
}

std::string_view to_string(ProviderKind k) {
  switch (k) {
    case ProviderKind::http_openai_compatible: return "http_openai_compatible";
    case ProviderKind::fixture: return "fixture";
    case ProviderKind::echo_top_match: return "echo_top_match";
  }
  return "fixture";
}

ProviderKind provider_kind_from_string(std::string_view name) {
  if (name == "http_openai_compatible" || name == "http") return ProviderKind::http_openai_compatible;
  if (name == "fixture") return ProviderKind::fixture;
  if (name == "echo_top_match") return ProviderKind::echo_top_match;
  throw Error("config", "unknown provider kind '" + std::string(name) + "'");
}

// -- gateway ----------------------------------------------------------------

std::chrono::milliseconds RetryPolicy::backoff(int attempt) const {
  const double ms = static_cast<double>(base_delay.count()) * std::pow(factor, attempt - 1);
  return std::min(max_delay, std::chrono::milliseconds(static_cast<long long>(std::min(ms, 1e12))));
}

std::vector<std::size_t> chunk_sizes(std::size_t n, int batch_size) {
  if (batch_size < 1) throw Error("gateway", "batch_size must be >= 1");
  std::vector<std::size_t> out;
  const auto b = static_cast<std::size_t>(batch_size);
  for (std::size_t start = 0; start < n; start += b) out.push_back(std::min(b, n - start));
  return out;
}

Gateway::Gateway(std::shared_ptr<Provider> provider, RetryPolicy retry, Sleeper sleeper,
                 std::uint64_t jitter_seed)
    : provider_(std::move(provider)),
      retry_(retry),
      sleeper_(sleeper ? std::move(sleeper)
                       : Sleeper([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); })),
      jitter_state_(jitter_seed) {
  if (!provider_) throw Error("gateway", "no provider configured");
  if (retry_.max_attempts < 1) throw Error("config", "max_attempts must be >= 1");
}

std::chrono::milliseconds Gateway::jittered(std::chrono::milliseconds d) {
  const auto z = stable_hash64("", jitter_state_.fetch_add(1));
  const double u = static_cast<double>(z >> 11) * 0x1.0p-53;
  return std::chrono::milliseconds(
      static_cast<long long>(static_cast<double>(d.count()) * (1.0 - retry_.jitter * u)));
}

Completion Gateway::complete(const std::string& prompt, const GenerationConfig& cfg) {
  if (prompt.empty()) throw Error("gateway", "prompt must be non-empty");
  cfg.validate();
  ++requests_;
  for (int attempt = 1;; ++attempt) {
    ++attempts_;
    const auto now = ++in_flight_;
    auto seen = max_in_flight_.load();
    while (now > seen && !max_in_flight_.compare_exchange_weak(seen, now)) {
    }
    try {
      auto c = provider_->complete(prompt, cfg);
      --in_flight_;
      c.attempts = attempt;
      if (attempt > 1) spdlog::info("gateway: request succeeded after {} attempts", attempt);
      return c;
    } catch (const ProviderError& e) {
      --in_flight_;
      if (e.terminal() || attempt >= retry_.max_attempts) {
        ++failures_;
        if (e.terminal()) throw;
        throw ProviderError("gateway", e.status(), true,
                            "giving up after " + std::to_string(attempt) + " attempts: " + e.what());
      }
      const auto delay = e.retry_after() ? std::min(*e.retry_after(), retry_.max_delay)
                                         : jittered(retry_.backoff(attempt));
      spdlog::warn("gateway: attempt {} failed (status {}): {}; retrying in {} ms", attempt, e.status(),
                   e.what(), delay.count());
      ++retries_;
      sleeper_(delay);
    } catch (...) {
      --in_flight_;
      ++failures_;
      throw;
    }
  }
}

std::vector<BatchSlot> Gateway::complete_batch(std::span<const std::string> prompts,
                                               const GenerationConfig& cfg) {
  if (prompts.empty()) throw Error("gateway", "prompt list must be non-empty");
  cfg.validate();
  std::vector<BatchSlot> slots(prompts.size());
  std::size_t start = 0;
  for (const auto size : chunk_sizes(prompts.size(), cfg.batch_size)) {
    ++chunks_;
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t i; (i = next.fetch_add(1)) < size;) {
        auto& slot = slots[start + i];
        try {
          slot.completion = complete(prompts[start + i], cfg);
        } catch (const ProviderError& e) {
          slot.error = e.what();
          slot.status = e.status();
        } catch (const std::exception& e) {
          slot.error = e.what();
        }
      }
    };
    const auto workers = std::min<std::size_t>(static_cast<std::size_t>(cfg.max_parallel), size);
    if (workers <= 1) {
      worker();
    } else {
      std::vector<std::jthread> pool;
      pool.reserve(workers);
      for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    }
    start += size;
  }
  return slots;
}

GatewayStats Gateway::stats() const {
  return GatewayStats{requests_.load(), attempts_.load(), retries_.load(),
                      failures_.load(), chunks_.load(),   max_in_flight_.load()};
}

// -- post-processing --------------------------------------------------------

std::string_view to_string(PostprocessMode m) {
  switch (m) {
    case PostprocessMode::stop_newline: return "stop_newline";
    case PostprocessMode::truncate_newline: return "truncate_newline";
    case PostprocessMode::verbatim: return "verbatim";
  }
  return "verbatim";
}

PostprocessMode postprocess_mode_from_string(std::string_view name) {
  if (name == "stop_newline") return PostprocessMode::stop_newline;
  if (name == "truncate_newline") return PostprocessMode::truncate_newline;
  if (name == "verbatim") return PostprocessMode::verbatim;
  throw Error("config", "unknown postprocess mode '" + std::string(name) + "'");
}

Postprocessed postprocess(const Completion& raw, PostprocessMode mode) {
  Postprocessed out;
  switch (mode) {
    case PostprocessMode::verbatim:
      out.text = raw.text;
      break;
    case PostprocessMode::stop_newline:
      out.text = text::trim(raw.text);
      break;
    case PostprocessMode::truncate_newline: {
      const auto body = text::trim(raw.text);
      out.text = text::trim(body.substr(0, body.find('\n')));
      break;
    }
  }
  out.empty = text::trim(out.text).empty();
  if (out.empty) spdlog::warn("postprocess: empty translation (request {})", raw.request_id);
  return out;
}

int dynamic_max_new_tokens(std::string_view source, int cap) {
  return std::min(2 * static_cast<int>(text::word_count(source)), cap);
}

}  // namespace adaptmt
