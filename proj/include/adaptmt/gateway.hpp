#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace adaptmt {

enum class Decoding { sampling, greedy };

std::string_view to_string(Decoding d);
Decoding decoding_from_string(std::string_view name);

/// Decoding parameters for one completion call.
struct GenerationConfig {
  std::string model = "text-davinci-003";
  double top_p = 1.0;
  double temperature = 0.3;
  std::vector<std::string> stop;
  int max_tokens = 256;
  Decoding decoding = Decoding::sampling;
  int batch_size = 20;
  int max_parallel = 4;

  void validate() const;

  /// top_p 1, temperature 0.3, batch size 20.
  static GenerationConfig translation();
  /// top_p 1, temperature 0.
  static GenerationConfig term_extraction();
  /// Greedy decoding, batch size 1; max_tokens comes from dynamic_max_new_tokens().
  static GenerationConfig greedy();
};

/// The optional newline stop sequence.
std::vector<std::string> newline_stop();

enum class FinishReason { stop, length, other };

std::string_view to_string(FinishReason r);

struct Completion {
  std::string text;
  FinishReason finish_reason = FinishReason::stop;
  std::string request_id;
  int attempts = 1;
};

/// A text-completion backend. complete() throws ProviderError on failure;
/// `terminal()` distinguishes non-retryable errors.
class Provider {
 public:
  virtual ~Provider() = default;
  virtual std::string name() const = 0;
  virtual Completion complete(const std::string& prompt, const GenerationConfig& cfg) = 0;
};

/// Looks completions up by prompt_hash(prompt). Entries come from JSONL lines
/// {"match": "<prompt-hash>", "response": "...", "status": 200}; "match": "*"
/// is the fallback for unlisted prompts. Non-200 statuses raise ProviderError.
class FixtureProvider final : public Provider {
 public:
  struct Entry {
    std::string response;
    int status = 200;
  };

  FixtureProvider() = default;
  explicit FixtureProvider(std::map<std::string, Entry> entries);
  static std::shared_ptr<FixtureProvider> from_file(const std::filesystem::path& path);
  static std::shared_ptr<FixtureProvider> from_jsonl(std::string_view content);

  void add(std::string_view prompt, std::string response, int status = 200);
  void add_hash(std::string hash, std::string response, int status = 200);
  void set_fallback(std::string response, int status = 200);

  std::string name() const override { return "fixture"; }
  Completion complete(const std::string& prompt, const GenerationConfig& cfg) override;

 private:
  std::map<std::string, Entry> entries_;
};

/// Answers every translation prompt with the target side of its final
/// in-context example: the last "<TargetName>: ..." line before the query.
class EchoTopMatchProvider final : public Provider {
 public:
  std::string name() const override { return "echo_top_match"; }
  Completion complete(const std::string& prompt, const GenerationConfig& cfg) override;

  /// The extraction itself; nullopt when the prompt has no example.
  static std::optional<std::string> last_example_target(std::string_view prompt);
};

struct HttpProviderConfig {
  std::string endpoint;  // full URL of the completions route
  /// Environment variable holding the bearer token; empty for none.
  std::string api_key_env;
  std::chrono::milliseconds timeout{60000};
};

/// OpenAI-compatible completions over HTTP. Body:
/// {"model","prompt","top_p","temperature","max_tokens","stop"}; greedy
/// decoding is sent as temperature 0, top_p 1.
class HttpCompletionProvider final : public Provider {
 public:
  explicit HttpCompletionProvider(HttpProviderConfig cfg);

  std::string name() const override { return "http_openai_compatible"; }
  Completion complete(const std::string& prompt, const GenerationConfig& cfg) override;

  static std::string request_body(const std::string& prompt, const GenerationConfig& cfg);

 private:
  HttpProviderConfig cfg_;
};

enum class ProviderKind { http_openai_compatible, fixture, echo_top_match };

std::string_view to_string(ProviderKind k);
ProviderKind provider_kind_from_string(std::string_view name);

struct RetryPolicy {
  int max_attempts = 6;
  std::chrono::milliseconds base_delay{1000};
  double factor = 2.0;
  std::chrono::milliseconds max_delay{60000};
  /// Fraction of each delay that is randomized: delay * (1 - jitter * U[0,1)).
  double jitter = 0.5;

  /// Backoff before attempt `attempt + 1`, before jitter.
  std::chrono::milliseconds backoff(int attempt) const;
};

/// One output slot of complete_batch: a completion or the error that ended it.
struct BatchSlot {
  std::optional<Completion> completion;
  std::string error;
  int status = 0;

  bool ok() const { return completion.has_value(); }
};

struct GatewayStats {
  std::uint64_t requests = 0;
  std::uint64_t attempts = 0;
  std::uint64_t retries = 0;
  std::uint64_t failures = 0;
  std::uint64_t chunks = 0;
  std::uint64_t max_in_flight = 0;
};

/// Sizes of the chunks `n` prompts are split into.
std::vector<std::size_t> chunk_sizes(std::size_t n, int batch_size);

/// Thread-safe front end over a Provider: retry with exponential backoff and
/// jitter, bounded-parallel batches, request counters.
class Gateway {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  explicit Gateway(std::shared_ptr<Provider> provider, RetryPolicy retry = {},
                   Sleeper sleeper = nullptr, std::uint64_t jitter_seed = 0x9a7e3a1ULL);

  const Provider& provider() const { return *provider_; }
  const RetryPolicy& retry_policy() const { return retry_; }

  /// Returns the provider output verbatim. Retries on HTTP 429/5xx and
  /// transport failures up to the attempt cap; throws ProviderError otherwise.
  Completion complete(const std::string& prompt, const GenerationConfig& cfg);

  /// Positionally aligned completions. Prompts are processed in chunks of
  /// cfg.batch_size with at most cfg.max_parallel requests in flight; a failed
  /// slot does not affect the others. Throws Error("gateway") on an empty list.
  std::vector<BatchSlot> complete_batch(std::span<const std::string> prompts, const GenerationConfig& cfg);

  GatewayStats stats() const;

 private:
  std::chrono::milliseconds jittered(std::chrono::milliseconds d);

  std::shared_ptr<Provider> provider_;
  RetryPolicy retry_;
  Sleeper sleeper_;
  std::atomic<std::uint64_t> jitter_state_;
  std::atomic<std::uint64_t> requests_{0}, attempts_{0}, retries_{0}, failures_{0}, chunks_{0};
  std::atomic<std::uint64_t> in_flight_{0}, max_in_flight_{0};
};

enum class PostprocessMode { stop_newline, truncate_newline, verbatim };

std::string_view to_string(PostprocessMode m);
PostprocessMode postprocess_mode_from_string(std::string_view name);

struct Postprocessed {
  std::string text;
  bool empty = false;  // empty-translation warning
};

/// stop_newline: trim only (the provider already stopped at "\n");
/// truncate_newline: keep what precedes the first newline after leading
/// whitespace, then trim; verbatim: unchanged.
Postprocessed postprocess(const Completion& raw, PostprocessMode mode);

/// min(2 * source words, cap).
int dynamic_max_new_tokens(std::string_view source, int cap = 250);

}  // namespace adaptmt
