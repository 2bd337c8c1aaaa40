#include "adaptmt/service.hpp"

#include <atomic>
#include <fstream>
#include <mutex>
#include <sstream>

#include <spdlog/spdlog.h>

#include "httplib.h"
#include "json.hpp"

#include "adaptmt/config.hpp"
#include "adaptmt/error.hpp"
#include "adaptmt/retrieval.hpp"
#include "adaptmt/text.hpp"

namespace adaptmt {

using json = nlohmann::json;
namespace fs = std::filesystem;

struct Project {
  Project(std::string project_id, LanguagePair pair, StrategySpec spec)
      : id(std::move(project_id)), lang(pair), strategy(std::move(spec)), tm(id, lang) {}

  std::string id;
  LanguagePair lang;
  StrategySpec strategy;
  TranslationMemory tm;
  std::unique_ptr<Translator> translator;
  std::shared_ptr<TermStore> term_store = std::make_shared<TermStore>();
  fs::path dir;

  std::mutex writer;  // serializes ingest / approve / term writes
  mutable std::mutex data_mutex;
  std::vector<TermPair> candidates;
  std::shared_ptr<const Glossary> glossary;
  std::atomic<bool> extracting{false};
  std::thread extraction;

  ~Project() {
    if (extraction.joinable()) extraction.join();
  }
};

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message, const std::string& stage = {}) {
  json body = {{"error", message}};
  if (!stage.empty()) body["stage"] = stage;
  send_json(res, status, body);
}

json pair_json(const SegmentPair& p) {
  return {{"id", p.id}, {"source", p.source}, {"target", p.target}, {"origin", to_string(p.origin)}};
}

json strategy_json(const StrategySpec& s) {
  return {{"kind", to_string(s.kind)},
          {"k", s.top_k},
          {"max_terms", s.max_terms},
          {"postprocess", to_string(s.postprocess)},
          {"dynamic_max_tokens", s.dynamic_max_tokens},
          {"seed", s.seed}};
}

json term_json(const TermPair& t) {
  return {{"src", t.src}, {"tgt", t.tgt}, {"freq", t.freq}, {"ngram_len", t.ngram_len}};
}

std::optional<json> parse_body(const httplib::Request& req, httplib::Response& res, bool allow_empty = false) {
  if (req.body.empty() && allow_empty) return json::object();
  try {
    auto j = json::parse(req.body);
    if (!j.is_object()) {
      send_error(res, 400, "request body must be a JSON object");
      return std::nullopt;
    }
    return j;
  } catch (const json::exception& e) {
    send_error(res, 400, std::string("invalid JSON: ") + e.what());
    return std::nullopt;
  }
}

TmFormat detect_format(const httplib::Request& req) {
  if (req.has_param("format")) return tm_format_from_string(req.get_param_value("format"));
  const auto type = req.get_header_value("Content-Type");
  if (type.find("json") != std::string::npos) return TmFormat::jsonl;
  if (type.find("tab-separated") != std::string::npos) return TmFormat::tsv;
  for (const auto& line : text::split_lines(req.body)) {
    const auto t = text::trim(line);
    if (!t.empty()) return t.front() == '{' ? TmFormat::jsonl : TmFormat::tsv;
  }
  return TmFormat::tsv;
}

void write_file(const fs::path& path, const std::string& content) {
  const auto tmp = fs::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("service", "cannot write " + tmp.string());
    out << content;
  }
  fs::rename(tmp, path);
}

void append_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw Error("service", "cannot append to " + path.string());
  out << content;
  out.flush();
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void save_project_meta(const Project& p) {
  if (p.dir.empty()) return;
  json meta = {{"project_id", p.id},
               {"lang", {{"source", p.lang.source_lang}, {"target", p.lang.target_lang},
                         {"multiplier", p.lang.length_multiplier}}},
               {"strategy", strategy_json(p.strategy)}};
  write_file(p.dir / "project.json", meta.dump(2) + "\n");
}

// Index covering every TM pair, extended from the current one when possible.
void refresh_index(Project& p, std::vector<SegmentPair> added) {
  auto current = p.translator->index();
  if (!current) {
    if (!p.tm.empty()) p.translator->set_index(build_index(p.tm));
    return;
  }
  if (added.empty()) return;
  p.translator->set_index(extend_index(*current, std::move(added), p.tm.version()));
}

int status_for_stage(const std::string& stage) {
  if (stage == "gateway" || stage == "mt") return 502;
  if (stage == "prompt" || stage == "budget") return 422;
  return 500;
}

}  // namespace

Service::Service(ServiceOptions opts) : opts_(std::move(opts)) {
  if (!opts_.provider) opts_.provider = std::make_shared<EchoTopMatchProvider>();
  gateway_ = std::make_shared<Gateway>(opts_.provider, opts_.retry, opts_.sleeper);
  opts_.default_strategy.validate();
  server_ = std::make_unique<httplib::Server>();
  if (!opts_.data_dir.empty()) load_projects();
  routes();
}

Service::~Service() { stop(); }

std::size_t Service::project_count() const {
  std::shared_lock lock(mutex_);
  return projects_.size();
}

std::shared_ptr<Project> Service::find(const std::string& id) const {
  std::shared_lock lock(mutex_);
  const auto it = projects_.find(id);
  return it == projects_.end() ? nullptr : it->second;
}

std::shared_ptr<Project> Service::create_project(const LanguagePair& lang, const StrategySpec& strategy) {
  std::unique_lock lock(mutex_);
  const auto id = "p" + std::to_string(next_project_++);
  auto p = std::make_shared<Project>(id, lang, strategy);
  p->translator = std::make_unique<Translator>(lang, gateway_, opts_.translator);
  p->translator->set_term_store(p->term_store);
  if (opts_.mt) p->translator->set_mt(opts_.mt);
  if (!opts_.data_dir.empty()) {
    p->dir = opts_.data_dir / "projects" / id;
    fs::create_directories(p->dir);
    save_project_meta(*p);
    p->tm.attach_journal(p->dir / "tm.jsonl");
  }
  projects_[id] = p;
  return p;
}

void Service::load_projects() {
  const auto root = opts_.data_dir / "projects";
  if (!fs::exists(root)) return;
  for (const auto& entry : fs::directory_iterator(root)) {
    const auto meta_path = entry.path() / "project.json";
    if (!fs::exists(meta_path)) continue;
    try {
      const auto meta = json::parse(read_file(meta_path));
      const auto& l = meta.at("lang");
      LanguagePair lang{l.at("source").get<std::string>(), l.at("target").get<std::string>(),
                        l.at("multiplier").get<int>()};
      lang.validate();
      auto strategy = opts_.default_strategy;
      if (meta.contains("strategy")) apply_strategy(strategy, meta["strategy"]);
      const auto id = meta.at("project_id").get<std::string>();

      auto p = std::make_shared<Project>(id, lang, strategy);
      p->dir = entry.path();
      p->translator = std::make_unique<Translator>(lang, gateway_, opts_.translator);
      p->translator->set_term_store(p->term_store);
      if (opts_.mt) p->translator->set_mt(opts_.mt);
      const auto journal = p->dir / "tm.jsonl";
      if (fs::exists(journal)) p->tm.replay_journal(journal);
      p->tm.attach_journal(journal);
      if (!p->tm.empty()) p->translator->set_index(build_index(p->tm));
      if (fs::exists(p->dir / "terms.jsonl")) p->candidates = terms_from_jsonl(read_file(p->dir / "terms.jsonl"));
      if (fs::exists(p->dir / "glossary.tsv")) {
        p->glossary = std::make_shared<const Glossary>(load_glossary(p->dir / "glossary.tsv"));
        p->translator->set_glossary(p->glossary);
      }
      if (id.size() > 1 && id[0] == 'p') {
        try {
          next_project_ = std::max<std::uint64_t>(next_project_, std::stoull(id.substr(1)) + 1);
        } catch (const std::exception&) {
        }
      }
      spdlog::info("service: restored project {} ({} pairs)", id, p->tm.size());
      projects_[id] = std::move(p);
    } catch (const std::exception& e) {
      spdlog::error("service: cannot restore {}: {}", entry.path().string(), e.what());
    }
  }
}

void Service::routes() {
  auto& srv = *server_;

  srv.set_pre_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
    if (opts_.bearer_token.empty() || req.path.rfind("/v1/", 0) != 0) return httplib::Server::HandlerResponse::Unhandled;
    if (req.get_header_value("Authorization") == "Bearer " + opts_.bearer_token) {
      return httplib::Server::HandlerResponse::Unhandled;
    }
    send_error(res, 401, "missing or invalid bearer token");
    return httplib::Server::HandlerResponse::Handled;
  });

  srv.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const Error& e) {
      send_error(res, 500, e.what(), e.stage());
    } catch (const std::exception& e) {
      send_error(res, 500, e.what());
    }
  });

  const auto health = [](const httplib::Request&, httplib::Response& res) { send_json(res, 200, {{"status", "ok"}}); };
  srv.Get("/health", health);
  srv.Get("/v1/health", health);

  srv.Post("/v1/projects", [this](const httplib::Request& req, httplib::Response& res) {
    auto body = parse_body(req, res);
    if (!body) return;
    LanguagePair lang;
    try {
      const json l = body->value("lang", json::object());
      if (!l.is_object()) throw Error("tm", "'lang' must be an object {source, target}");
      lang = LanguagePair::make(l.value("source", std::string()), l.value("target", std::string()));
      if (body->contains("multipliers")) {
        for (const auto& [code, m] : (*body)["multipliers"].items()) {
          if (code == lang.target_lang) lang.length_multiplier = m.get<int>();
        }
      }
      if (l.contains("multiplier")) lang.length_multiplier = l["multiplier"].get<int>();
      lang.validate();
    } catch (const std::exception& e) {
      send_error(res, 400, e.what(), "tm");
      return;
    }
    auto strategy = opts_.default_strategy;
    try {
      if (body->contains("strategy")) apply_strategy(strategy, (*body)["strategy"]);
      strategy.validate();
    } catch (const std::exception& e) {
      send_error(res, 400, e.what(), "config");
      return;
    }
    const auto p = create_project(lang, strategy);
    send_json(res, 201, {{"project_id", p->id}});
  });

  srv.Get("/v1/projects", [this](const httplib::Request&, httplib::Response& res) {
    json out = json::array();
    std::shared_lock lock(mutex_);
    for (const auto& [id, p] : projects_) out.push_back(id);
    send_json(res, 200, {{"projects", out}});
  });

  srv.Get(R"(/v1/projects/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    const auto p = find(req.matches[1]);
    if (!p) return send_error(res, 404, "unknown project");
    std::size_t glossary_size = 0;
    {
      std::lock_guard lock(p->data_mutex);
      if (p->glossary) glossary_size = p->glossary->entries.size();
    }
    const auto index = p->translator->index();
    send_json(res, 200,
              {{"project_id", p->id},
               {"lang", {{"source", p->lang.source_lang}, {"target", p->lang.target_lang},
                         {"multiplier", p->lang.length_multiplier}}},
               {"strategy", strategy_json(p->strategy)},
               {"tm_size", p->tm.size()},
               {"tm_version", p->tm.version()},
               {"index_version", index ? index->tm_version() : 0},
               {"glossary_size", glossary_size}});
  });

  srv.Get(R"(/v1/projects/([^/]+)/tm)", [this](const httplib::Request& req, httplib::Response& res) {
    const auto p = find(req.matches[1]);
    if (!p) return send_error(res, 404, "unknown project");
    const auto pairs = p->tm.pairs();
    std::size_t offset = 0, limit = pairs.size();
    try {
      if (req.has_param("offset")) offset = std::stoul(req.get_param_value("offset"));
      if (req.has_param("limit")) limit = std::stoul(req.get_param_value("limit"));
    } catch (const std::exception&) {
      return send_error(res, 400, "offset and limit must be non-negative integers");
    }
    json out = json::array();
    for (std::size_t i = offset; i < pairs.size() && out.size() < limit; ++i) out.push_back(pair_json(pairs[i]));
    send_json(res, 200, {{"pairs", out}, {"total", pairs.size()}});
  });

  srv.Post(R"(/v1/projects/([^/]+)/tm)", [this](const httplib::Request& req, httplib::Response& res) {
    const auto p = find(req.matches[1]);
    if (!p) return send_error(res, 404, "unknown project");
    TmFormat format;
    try {
      format = detect_format(req);
    } catch (const std::exception& e) {
      return send_error(res, 400, e.what(), "tm");
    }
    std::vector<RecordError> errors;
    const auto records = parse_tm_records(req.body, format, &errors);
    if (!errors.empty()) {
      json rows = json::array();
      for (const auto& e : errors) rows.push_back({{"line", e.line()}, {"error", e.what()}});
      return send_json(res, 422, {{"error", "malformed rows"}, {"stage", "tm"}, {"rows", rows}});
    }
    if (records.empty()) return send_error(res, 422, "no records in body", "tm");

    std::lock_guard lock(p->writer);
    IngestReport report;
    std::vector<SegmentPair> added;
    for (const auto& r : records) {
      ++report.read;
      try {
        auto [pair, inserted] = p->tm.add(r.source, r.target, r.origin);
        if (inserted) {
          ++report.kept;
          added.push_back(std::move(pair));
        } else {
          ++report.dropped;
        }
      } catch (const Error&) {
        ++report.dropped;
      }
    }
    refresh_index(*p, std::move(added));
    send_json(res, 200, {{"ingested", report.kept}, {"dropped", report.dropped}, {"read", report.read},
                         {"tm_size", p->tm.size()}});
  });

  srv.Get(R"(/v1/projects/([^/]+)/matches)", [this](const httplib::Request& req, httplib::Response& res) {
    const auto p = find(req.matches[1]);
    if (!p) return send_error(res, 404, "unknown project");
    const auto q = req.get_param_value("q");
    if (text::trim(q).empty()) return send_error(res, 400, "query 'q' must be non-empty", "retrieval");
    RetrievalConfig cfg;
    try {
      if (req.has_param("k")) cfg.top_k = std::stoi(req.get_param_value("k"));
    } catch (const std::exception&) {
      return send_error(res, 400, "k must be an integer", "retrieval");
    }
    if (cfg.top_k < 1) return send_error(res, 400, "k must be >= 1", "retrieval");
    cfg.allow_large_top_k = true;
    const auto index = p->translator->index();
    json out = json::array();
    if (index) {
      for (const auto& m : index->retrieve(q, cfg)) {
        auto j = pair_json(m.pair);
        j["score"] = m.score;
        out.push_back(std::move(j));
      }
    }
    send_json(res, 200, {{"matches", out}, {"tm_version", index ? index->tm_version() : 0}});
  });

  srv.Post(R"(/v1/projects/([^/]+)/translate)", [this](const httplib::Request& req, httplib::Response& res) {
    const auto p = find(req.matches[1]);
    if (!p) return send_error(res, 404, "unknown project");
    auto body = parse_body(req, res);
    if (!body) return;
    const auto source = body->value("source", std::string());
    if (text::trim(source).empty()) return send_error(res, 400, "'source' must be non-empty", "pipeline");
    auto strategy = p->strategy;
    try {
      if (body->contains("strategy")) {
        const auto& s = (*body)["strategy"];
        apply_strategy(strategy, s.is_string() ? json{{"kind", s}} : s);
      }
      strategy.validate();
    } catch (const std::exception& e) {
      return send_error(res, 400, e.what(), "config");
    }
    const bool debug = req.get_param_value("debug") == "1";
    const auto result = p->translator->translate_segment(source, strategy);
    auto j = to_json(result, {.include_prompt = debug, .include_timing = true});
    if (!result.ok) j["stage"] = result.error_stage;
    send_json(res, result.ok ? 200 : status_for_stage(result.error_stage), j);
  });

  srv.Post(R"(/v1/projects/([^/]+)/approve)", [this](const httplib::Request& req, httplib::Response& res) {
    const auto p = find(req.matches[1]);
    if (!p) return send_error(res, 404, "unknown project");
    auto body = parse_body(req, res);
    if (!body) return;
    const auto source = body->value("source", std::string());
    const auto target = body->value("target", std::string());
    if (text::trim(source).empty() || text::trim(target).empty()) {
      return send_error(res, 400, "'source' and 'target' must be non-empty", "tm");
    }
    std::lock_guard lock(p->writer);
    const auto before = p->tm.version();
    SegmentPair pair;
    try {
      pair = p->tm.approve(source, target);
    } catch (const Error& e) {
      return send_error(res, 400, e.what(), e.stage());
    }
    const bool created = p->tm.version() != before;
    if (created) refresh_index(*p, {pair});
    send_json(res, 200, {{"pair_id", pair.id}, {"created", created}});
  });

  srv.Post(R"(/v1/projects/([^/]+)/terms)", [this](const httplib::Request& req, httplib::Response& res) {
    const auto p = find(req.matches[1]);
    if (!p) return send_error(res, 404, "unknown project");
    std::vector<TermPair> terms;
    try {
      const auto t = text::trim(req.body);
      if (!t.empty() && t.front() == '{' && req.body.find("\"terms\"") != std::string::npos) {
        const auto j = json::parse(req.body);
        for (const auto& e : j.at("terms")) {
          TermPair tp{e.at("src").get<std::string>(), e.at("tgt").get<std::string>(), e.value("freq", 1), 1};
          tp.ngram_len = ngram_length(tp.src);
          terms.push_back(std::move(tp));
        }
      } else {
        terms = terms_from_jsonl(req.body);
      }
    } catch (const std::exception& e) {
      return send_error(res, 422, e.what(), "terms");
    }
    std::lock_guard lock(p->writer);
    std::size_t total = 0;
    {
      std::lock_guard data(p->data_mutex);
      p->candidates.insert(p->candidates.end(), terms.begin(), terms.end());
      total = p->candidates.size();
    }
    if (!p->dir.empty() && !terms.empty()) append_file(p->dir / "terms.jsonl", terms_to_jsonl(terms));
    send_json(res, 200, {{"added", terms.size()}, {"candidates", total}});
  });

  srv.Post(R"(/v1/projects/([^/]+)/terms/extract)", [this](const httplib::Request& req, httplib::Response& res) {
    const auto p = find(req.matches[1]);
    if (!p) return send_error(res, 404, "unknown project");
    auto body = parse_body(req, res, true);
    if (!body) return;
    const int n = body->value("n", opts_.translator.extraction_terms);
    const bool async = body->value("async", false);
    if (n < 1) return send_error(res, 400, "n must be >= 1", "terms");
    bool expected = false;
    if (!p->extracting.compare_exchange_strong(expected, true)) {
      return send_error(res, 409, "term extraction already running", "terms");
    }

    auto job = [this, p, n]() -> json {
      std::size_t done = 0, failed = 0, added = 0, malformed = 0;
      std::vector<TermPair> fresh;
      for (const auto& pair : p->tm.pairs()) {
        if (p->term_store->get(pair.id)) continue;
        try {
          const auto lines = extract_terms(pair, p->lang, *gateway_, opts_.translator.extraction_generation, n,
                                           opts_.translator.extraction_separator, opts_.translator.display_names);
          const auto parsed = parse_term_lines(lines, opts_.translator.extraction_separator, pair.source, pair.target);
          malformed += parsed.malformed;
          std::vector<TermPair> kept;
          for (const auto& t : parsed.terms) {
            if (t.src_present && t.tgt_present) kept.push_back(t.term);
          }
          added += kept.size();
          fresh.insert(fresh.end(), kept.begin(), kept.end());
          p->term_store->put(pair.id, std::move(kept));
          ++done;
        } catch (const std::exception& e) {
          ++failed;
          spdlog::warn("terms: extraction failed for pair {}: {}", pair.id, e.what());
        }
      }
      {
        std::lock_guard lock(p->writer);
        {
          std::lock_guard data(p->data_mutex);
          p->candidates.insert(p->candidates.end(), fresh.begin(), fresh.end());
        }
        if (!p->dir.empty() && !fresh.empty()) append_file(p->dir / "terms.jsonl", terms_to_jsonl(fresh));
      }
      p->extracting = false;
      return {{"pairs", done}, {"failed", failed}, {"terms", added}, {"malformed", malformed}};
    };

    if (async) {
      std::lock_guard lock(p->writer);
      if (p->extraction.joinable()) p->extraction.join();
      p->extraction = std::thread([job] { job(); });
      return send_json(res, 202, {{"status", "pending"}});
    }
    try {
      send_json(res, 200, job());
    } catch (...) {
      p->extracting = false;
      throw;
    }
  });

  srv.Post(R"(/v1/projects/([^/]+)/glossary/compile)", [this](const httplib::Request& req, httplib::Response& res) {
    const auto p = find(req.matches[1]);
    if (!p) return send_error(res, 404, "unknown project");
    if (p->extracting) return send_error(res, 409, "term extraction pending", "terms");
    auto body = parse_body(req, res, true);
    if (!body) return;
    auto cfg = opts_.glossary;
    try {
      cfg.min_freq = body->value("min_freq", cfg.min_freq);
      cfg.max_ngram = body->value("max_ngram", cfg.max_ngram);
      cfg.validate();
    } catch (const std::exception& e) {
      return send_error(res, 400, e.what(), "terms");
    }
    std::lock_guard lock(p->writer);
    std::vector<TermPair> candidates;
    {
      std::lock_guard data(p->data_mutex);
      candidates = p->candidates;
    }
    json warnings = json::array();
    if (candidates.empty()) warnings.push_back("no extracted terms; glossary is empty");
    auto glossary = std::make_shared<const Glossary>(compile_glossary(candidates, cfg));
    {
      std::lock_guard data(p->data_mutex);
      p->glossary = glossary;
    }
    p->translator->set_glossary(glossary);
    if (!p->dir.empty()) write_file(p->dir / "glossary.tsv", glossary_to_tsv(*glossary));
    json entries = json::array();
    for (const auto& t : glossary->entries) entries.push_back(term_json(t));
    send_json(res, 200, {{"entries", entries}, {"count", glossary->entries.size()}, {"warnings", warnings}});
  });

  srv.Get(R"(/v1/projects/([^/]+)/glossary)", [this](const httplib::Request& req, httplib::Response& res) {
    const auto p = find(req.matches[1]);
    if (!p) return send_error(res, 404, "unknown project");
    std::shared_ptr<const Glossary> glossary;
    {
      std::lock_guard data(p->data_mutex);
      glossary = p->glossary;
    }
    if (!glossary) return send_error(res, 404, "no glossary compiled", "terms");
    res.status = 200;
    res.set_content(glossary_to_tsv(*glossary), "text/tab-separated-values; charset=utf-8");
  });
}

int Service::start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = server_->bind_to_any_port(host);
    if (bound < 0) throw Error("service", "cannot bind " + host);
  } else if (!server_->bind_to_port(host, port)) {
    throw Error("service", "cannot bind " + host + ":" + std::to_string(port));
  }
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  spdlog::info("service: listening on {}:{}", host, bound);
  return bound;
}

void Service::listen(const std::string& host, int port) {
  spdlog::info("service: listening on {}:{}", host, port);
  if (!server_->listen(host, port)) throw Error("service", "cannot listen on " + host + ":" + std::to_string(port));
}

void Service::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
  std::shared_lock lock(mutex_);
  for (const auto& [id, p] : projects_) {
    std::thread job;
    {
      std::lock_guard writer(p->writer);
      job = std::move(p->extraction);
    }
    if (job.joinable()) job.join();
  }
}

}  // namespace adaptmt
