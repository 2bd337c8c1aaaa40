#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "adaptmt/tm.hpp"

namespace adaptmt {

/// One translated text, or the error for that position.
struct MtResult {
  std::optional<std::string> text;
  std::string error;

  bool ok() const { return text.has_value(); }
};

/// External encoder-decoder MT system. Results are positionally aligned with
/// the inputs; failures are reported per item, never thrown.
class MtProvider {
 public:
  virtual ~MtProvider() = default;
  virtual std::string name() const = 0;
  virtual std::vector<MtResult> translate(std::span<const std::string> texts) = 0;
};

/// Table lookup; fixture files are JSONL {"source": "...", "target": "..."}.
/// Unknown texts fail per item.
class FixtureMtProvider final : public MtProvider {
 public:
  explicit FixtureMtProvider(std::map<std::string, std::string> table = {}, std::string name = "fixture");
  static std::shared_ptr<FixtureMtProvider> from_file(const std::filesystem::path& path);
  static std::shared_ptr<FixtureMtProvider> from_jsonl(std::string_view content);

  void add(std::string source, std::string target);
  std::string name() const override { return name_; }
  std::vector<MtResult> translate(std::span<const std::string> texts) override;

 private:
  std::map<std::string, std::string> table_;
  std::string name_;
};

/// POST {"texts": [...], "source": "en", "target": "fr"} ->
/// {"translations": [...]}. Texts are sent in chunks of `batch_size`.
class HttpMtProvider final : public MtProvider {
 public:
  HttpMtProvider(std::string name, std::string endpoint, LanguagePair lang, int batch_size = 20,
                 std::chrono::milliseconds timeout = std::chrono::milliseconds(30000));

  std::string name() const override { return name_; }
  std::vector<MtResult> translate(std::span<const std::string> texts) override;

  /// GET on the endpoint origin's /health; true on HTTP 200.
  bool healthy() const;

 private:
  std::string name_;
  std::string endpoint_;
  LanguagePair lang_;
  int batch_size_;
  std::chrono::milliseconds timeout_;
};

/// Throws Error("mt") on an empty list.
std::vector<MtResult> mt_translate(std::span<const std::string> texts, MtProvider& provider);

}  // namespace adaptmt
