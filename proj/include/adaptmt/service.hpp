#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <shared_mutex>
#include <string>
#include <thread>

#include "adaptmt/gateway.hpp"
#include "adaptmt/mt_bridge.hpp"
#include "adaptmt/pipeline.hpp"
#include "adaptmt/terminology.hpp"

namespace httplib {
class Server;
}

namespace adaptmt {

struct ServiceOptions {
  /// Projects persist under data_dir/projects/<id>/; empty keeps state in memory.
  std::filesystem::path data_dir;
  std::shared_ptr<Provider> provider;
  RetryPolicy retry;
  Gateway::Sleeper sleeper;  // null sleeps for real
  std::shared_ptr<MtProvider> mt;
  StrategySpec default_strategy;
  TranslatorOptions translator;
  GlossaryConfig glossary;
  /// Required as "Authorization: Bearer <token>" on /v1 routes when non-empty.
  std::string bearer_token;
};

struct Project;

/// HTTP facade over projects: TM ingest and approval, retrieval, translation
/// and glossary operations under /v1. Health at GET /health.
class Service {
 public:
  explicit Service(ServiceOptions opts);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds and serves on a background thread. Port 0 picks a free port;
  /// returns the bound port. Throws Error("service") when binding fails.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  /// Serves on the calling thread until stop().
  void listen(const std::string& host, int port);
  void stop();

  std::size_t project_count() const;

 private:
  void routes();
  void load_projects();
  std::shared_ptr<Project> find(const std::string& id) const;
  std::shared_ptr<Project> create_project(const LanguagePair& lang, const StrategySpec& strategy);

  ServiceOptions opts_;
  std::shared_ptr<Gateway> gateway_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, std::shared_ptr<Project>> projects_;
  std::uint64_t next_project_ = 1;
};

}  // namespace adaptmt
