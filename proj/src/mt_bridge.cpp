#include "adaptmt/mt_bridge.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

#include "adaptmt/error.hpp"
#include "adaptmt/http_client.hpp"
#include "adaptmt/text.hpp"

namespace adaptmt {

using json = nlohmann::json;

FixtureMtProvider::FixtureMtProvider(std::map<std::string, std::string> table, std::string name)
    : table_(std::move(table)), name_(std::move(name)) {}

std::shared_ptr<FixtureMtProvider> FixtureMtProvider::from_jsonl(std::string_view content) {
  auto p = std::make_shared<FixtureMtProvider>();
  std::size_t lineno = 0;
  for (const auto& line : text::split_lines(content)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    try {
      const auto j = json::parse(line);
      p->add(j.at("source").get<std::string>(), j.at("target").get<std::string>());
    } catch (const json::exception& e) {
      throw RecordError("mt", lineno, std::string("bad MT fixture record: ") + e.what());
    }
  }
  return p;
}

std::shared_ptr<FixtureMtProvider> FixtureMtProvider::from_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("config", "cannot open MT fixture file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return from_jsonl(buf.str());
}

void FixtureMtProvider::add(std::string source, std::string target) {
  table_[text::normalize_whitespace(source)] = std::move(target);
}

std::vector<MtResult> FixtureMtProvider::translate(std::span<const std::string> texts) {
  std::vector<MtResult> out;
  out.reserve(texts.size());
  for (const auto& t : texts) {
    const auto it = table_.find(text::normalize_whitespace(t));
    if (it == table_.end()) {
      out.push_back({std::nullopt, "no MT fixture for '" + t + "'"});
    } else {
      out.push_back({it->second, {}});
    }
  }
  return out;
}

HttpMtProvider::HttpMtProvider(std::string name, std::string endpoint, LanguagePair lang, int batch_size,
                               std::chrono::milliseconds timeout)
    : name_(std::move(name)),
      endpoint_(std::move(endpoint)),
      lang_(std::move(lang)),
      batch_size_(batch_size),
      timeout_(timeout) {
  http::parse_url(endpoint_);
  if (batch_size_ < 1) throw Error("config", "MT batch size must be >= 1");
}

bool HttpMtProvider::healthy() const {
  const auto res = http::get(http::parse_url(endpoint_).origin() + "/health", {}, timeout_);
  return res.status == 200;
}

std::vector<MtResult> HttpMtProvider::translate(std::span<const std::string> texts) {
  std::vector<MtResult> out(texts.size());
  for (std::size_t start = 0; start < texts.size(); start += static_cast<std::size_t>(batch_size_)) {
    const auto end = std::min(texts.size(), start + static_cast<std::size_t>(batch_size_));
    const json body = {{"texts", std::vector<std::string>(texts.begin() + static_cast<std::ptrdiff_t>(start),
                                                          texts.begin() + static_cast<std::ptrdiff_t>(end))},
                       {"source", lang_.source_lang},
                       {"target", lang_.target_lang}};
    const auto res = http::post_json(endpoint_, body.dump(), {}, timeout_);
    std::string error;
    std::vector<std::string> translations;
    if (res.status != 200) {
      error = res.status == 0 ? "MT transport error: " + res.error : "MT HTTP " + std::to_string(res.status);
    } else {
      try {
        translations = json::parse(res.body).at("translations").get<std::vector<std::string>>();
        if (translations.size() != end - start) error = "MT response is not aligned with the request";
      } catch (const json::exception& e) {
        error = std::string("malformed MT response: ") + e.what();
      }
    }
    for (std::size_t i = start; i < end; ++i) {
      if (error.empty()) {
        out[i].text = std::move(translations[i - start]);
      } else {
        out[i].error = error;
      }
    }
  }
  return out;
}

std::vector<MtResult> mt_translate(std::span<const std::string> texts, MtProvider& provider) {
  if (texts.empty()) throw Error("mt", "text list must be non-empty");
  auto out = provider.translate(texts);
  if (out.size() != texts.size()) throw Error("mt", "provider " + provider.name() + " broke alignment");
  return out;
}

}  // namespace adaptmt
