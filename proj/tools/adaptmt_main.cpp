#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <sstream>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "json.hpp"

#include "adaptmt/config.hpp"
#include "adaptmt/error.hpp"
#include "adaptmt/evaluation.hpp"
#include "adaptmt/hash.hpp"
#include "adaptmt/pipeline.hpp"
#include "adaptmt/retrieval.hpp"
#include "adaptmt/service.hpp"
#include "adaptmt/terminology.hpp"
#include "adaptmt/text.hpp"
#include "adaptmt/tm.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace adaptmt;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;
constexpr int kExitPartial = 3;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io", "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("io", "cannot write " + path.string());
  out << content;
  if (!out) throw Error("io", "write failed for " + path.string());
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string file_digest(const fs::path& path) { return hex64(stable_hash64(read_file(path))); }

TmFormat format_for(const fs::path& path, const std::string& flag) {
  if (!flag.empty()) return tm_format_from_string(flag);
  const auto ext = path.extension().string();
  return ext == ".jsonl" || ext == ".json" || ext == ".ndjson" ? TmFormat::jsonl : TmFormat::tsv;
}

std::string utc_now() {
  const auto t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Run manifest written next to every artifact.
class Manifest {
 public:
  Manifest(std::string command, int argc, char** argv) : start_(std::chrono::steady_clock::now()) {
    j_["command"] = std::move(command);
    j_["argv"] = std::vector<std::string>(argv, argv + argc);
    j_["started_at"] = utc_now();
    j_["inputs"] = json::object();
    j_["outputs"] = json::array();
  }

  void config(const fs::path& path, const AppConfig& cfg) {
    j_["config"] = {{"path", path.string()}, {"hash", cfg.hash}};
    j_["seed"] = cfg.seed;
    j_["provider"] = to_string(cfg.provider.kind);
    j_["mt_provider"] = cfg.mt.kind;
    j_["lang"] = {{"source", cfg.lang.source_lang},
                  {"target", cfg.lang.target_lang},
                  {"multiplier", cfg.lang.length_multiplier}};
  }
  void input(const std::string& role, const fs::path& path) {
    j_["inputs"][role] = {{"path", path.string()}, {"digest", file_digest(path)}};
  }
  void output(const fs::path& path) { j_["outputs"].push_back(path.string()); }
  json& operator[](const char* key) { return j_[key]; }

  void write(const fs::path& path) {
    const auto ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
    j_["timing_ms"] = {{"total", ms}};
    write_file(path, j_.dump(2) + "\n");
  }

 private:
  json j_;
  std::chrono::steady_clock::time_point start_;
};

fs::path manifest_path(const fs::path& out, const std::string& flag) {
  return flag.empty() ? fs::path(out.string() + ".manifest.json") : fs::path(flag);
}

// Reads sources (and optional references) from TSV source<TAB>target rows,
// JSONL {"source", "target"?} rows, or plain text, one segment per line.
struct Segments {
  std::vector<std::string> sources;
  std::vector<std::string> targets;  // empty when the file has none
};

Segments read_segments(const fs::path& path) {
  Segments s;
  const auto content = read_file(path);
  const auto ext = path.extension().string();
  std::size_t line_no = 0;
  for (const auto& line : text::split_lines(content)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    if (ext == ".jsonl" || ext == ".ndjson") {
      json j;
      try {
        j = json::parse(line);
      } catch (const json::exception& e) {
        throw RecordError("io", line_no, e.what());
      }
      s.sources.push_back(j.value("source", std::string()));
      if (j.contains("target")) s.targets.push_back(j["target"].get<std::string>());
    } else if (ext == ".tsv") {
      const auto tab = line.find('\t');
      s.sources.push_back(std::string(line.substr(0, tab)));
      if (tab != std::string::npos) s.targets.push_back(std::string(line.substr(tab + 1)));
    } else {
      s.sources.push_back(std::string(line));
    }
  }
  if (!s.targets.empty() && s.targets.size() != s.sources.size()) {
    throw Error("io", path.string() + ": some rows lack a target");
  }
  return s;
}

// Per-segment term file: {"id", "source", "terms": [{"src","tgt"}]} per line.
void load_segment_terms(const fs::path& path, const TranslationMemory& tm, TermStore& store) {
  std::size_t line_no = 0, loaded = 0;
  for (const auto& line : text::split_lines(read_file(path))) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw RecordError("terms", line_no, e.what());
    }
    if (!j.contains("id") || !j.contains("terms")) throw RecordError("terms", line_no, "expected {id, source, terms}");
    const auto id = j["id"].get<SegmentId>();
    const auto pair = tm.find(id);
    if (!pair || (j.contains("source") && text::normalize_whitespace(j["source"].get<std::string>()) !=
                                               text::normalize_whitespace(pair->source))) {
      spdlog::warn("terms: line {} does not match TM segment {}; skipped", line_no, id);
      continue;
    }
    std::vector<TermPair> terms;
    for (const auto& t : j["terms"]) {
      TermPair tp{t.at("src").get<std::string>(), t.at("tgt").get<std::string>(), t.value("freq", 1), 1};
      tp.ngram_len = ngram_length(tp.src);
      terms.push_back(std::move(tp));
    }
    store.put(id, std::move(terms));
    ++loaded;
  }
  spdlog::info("terms: loaded term lists for {} segments", loaded);
}

// Candidate terms from either term-file shape.
std::vector<TermPair> load_candidates(const fs::path& path) {
  std::vector<TermPair> out;
  std::size_t line_no = 0;
  for (const auto& line : text::split_lines(read_file(path))) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw RecordError("terms", line_no, e.what());
    }
    const auto add = [&](const json& t) {
      TermPair tp{t.at("src").get<std::string>(), t.at("tgt").get<std::string>(), t.value("freq", 1), 1};
      tp.ngram_len = ngram_length(tp.src);
      out.push_back(std::move(tp));
    };
    if (j.contains("terms")) {
      for (const auto& t : j["terms"]) add(t);
    } else {
      add(j);
    }
  }
  return out;
}

AppConfig require_config(const std::string& path) {
  if (path.empty()) throw Error("config", "--config is required for this command");
  return load_config(path);
}

std::shared_ptr<Gateway> make_gateway(const AppConfig& cfg) {
  return std::make_shared<Gateway>(make_provider(cfg.provider), cfg.retry, nullptr, cfg.seed);
}

}  // namespace

int main(int argc, char** argv) {
  auto logger = spdlog::stderr_color_mt("adaptmt");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("%^%l%$ %v");

  CLI::App app{"Adaptive machine translation with fuzzy matches, terminology and LLM prompting.\n"
               "Config: one JSON file; see README for the schema. API keys are read from the\n"
               "environment variable named by provider.api_key_env, never from the file."};
  app.require_subcommand(1);
  std::string config_path, log_level = "info";
  app.add_option("-c,--config", config_path, "Config file (JSON)");
  app.add_option("--log-level", log_level, "trace|debug|info|warn|error|off")->capture_default_str();

  // ingest
  auto* ingest_cmd = app.add_subcommand("ingest", "Load a TSV/JSONL TM, deduplicate and export it as JSONL");
  std::string ingest_input, ingest_format, ingest_out, ingest_manifest;
  ingest_cmd->add_option("-i,--input", ingest_input, "TM file")->required()->check(CLI::ExistingFile);
  ingest_cmd->add_option("--format", ingest_format, "tsv|jsonl (default: by extension)");
  ingest_cmd->add_option("-o,--out", ingest_out, "Output JSONL")->required();
  ingest_cmd->add_option("--manifest", ingest_manifest, "Manifest path (default: <out>.manifest.json)");

  // translate
  auto* tr_cmd = app.add_subcommand("translate", "Translate segments with a prompting strategy");
  std::string tr_tm, tr_tm_format, tr_input, tr_out, tr_strategy, tr_terms, tr_glossary, tr_manifest;
  std::optional<int> tr_k, tr_max_terms;
  std::optional<std::uint64_t> tr_seed;
  std::optional<double> tr_top_p, tr_temperature;
  std::optional<int> tr_multiplier;
  bool tr_timing = false, tr_no_prompt = false, tr_dynamic = false;
  tr_cmd->add_option("--tm", tr_tm, "TM / context dataset (TSV or JSONL)")->required()->check(CLI::ExistingFile);
  tr_cmd->add_option("--tm-format", tr_tm_format, "tsv|jsonl (default: by extension)");
  tr_cmd->add_option("-i,--input", tr_input,
                     "Segments to translate (.tsv/.jsonl/.txt); without it every TM segment is "
                     "translated with its own row excluded from retrieval")
      ->check(CLI::ExistingFile);
  tr_cmd->add_option("-o,--out", tr_out, "Results JSONL")->required();
  tr_cmd->add_option("--strategy", tr_strategy,
                     "zero_shot|few_shot_fuzzy|few_shot_random|few_shot_fuzzy_new_mt|few_shot_fuzzy_all_mt|"
                     "zero_shot_glossary_terms|few_shot_fuzzy_terms|few_shot_glossary_terms");
  tr_cmd->add_option("-k,--k", tr_k, "Number of in-context examples");
  tr_cmd->add_option("--max-terms", tr_max_terms, "Terms per segment");
  tr_cmd->add_option("--seed", tr_seed, "Seed for random example selection");
  tr_cmd->add_option("--top-p", tr_top_p, "Nucleus sampling top-p");
  tr_cmd->add_option("--temperature", tr_temperature, "Sampling temperature");
  tr_cmd->add_option("--multiplier", tr_multiplier, "Output tokens per source word");
  tr_cmd->add_flag("--dynamic-max-tokens", tr_dynamic, "max_tokens = min(2 x words, 250)");
  tr_cmd->add_option("--terms", tr_terms, "Per-segment term lists from `terms extract`")->check(CLI::ExistingFile);
  tr_cmd->add_option("--glossary", tr_glossary, "Glossary TSV (overrides config)")->check(CLI::ExistingFile);
  tr_cmd->add_flag("--timing", tr_timing, "Include per-stage timings in results");
  tr_cmd->add_flag("--no-prompt", tr_no_prompt, "Omit prompt_used from results");
  tr_cmd->add_option("--manifest", tr_manifest, "Manifest path (default: <out>.manifest.json)");

  // terms extract
  auto* terms_cmd = app.add_subcommand("terms", "Terminology commands");
  terms_cmd->require_subcommand(1);
  auto* extract_cmd = terms_cmd->add_subcommand("extract", "Extract bilingual terms from every TM pair");
  std::string ex_tm, ex_format, ex_out, ex_manifest;
  int ex_n = 5;
  extract_cmd->add_option("--tm", ex_tm, "TM file")->required()->check(CLI::ExistingFile);
  extract_cmd->add_option("--format", ex_format, "tsv|jsonl (default: by extension)");
  extract_cmd->add_option("-n,--n", ex_n, "Terms requested per pair")->capture_default_str();
  extract_cmd->add_option("-o,--out", ex_out, "Per-segment terms JSONL")->required();
  extract_cmd->add_option("--manifest", ex_manifest, "Manifest path");

  // glossary build
  auto* glossary_cmd = app.add_subcommand("glossary", "Glossary commands");
  glossary_cmd->require_subcommand(1);
  auto* build_cmd = glossary_cmd->add_subcommand("build", "Compile a glossary from extracted terms");
  std::string gb_terms, gb_out, gb_manifest;
  std::optional<int> gb_min_freq, gb_max_ngram;
  build_cmd->add_option("--terms", gb_terms, "Terms JSONL")->required()->check(CLI::ExistingFile);
  build_cmd->add_option("--min-freq", gb_min_freq, "Minimum frequency (default 2)");
  build_cmd->add_option("--max-ngram", gb_max_ngram, "Longest source n-gram (default 5)");
  build_cmd->add_option("-o,--out", gb_out, "Glossary TSV")->required();
  build_cmd->add_option("--manifest", gb_manifest, "Manifest path");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Score result files with BLEU, chrF and chrF++");
  std::vector<std::string> ev_runs;
  std::string ev_refs, ev_csv, ev_format = "csv";
  eval_cmd->add_option("--runs", ev_runs, "Results JSONL files")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--refs", ev_refs, "References (.tsv source/target, .jsonl or .txt)")
      ->required()
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--csv", ev_csv, "Also write the CSV report here");
  eval_cmd->add_option("--format", ev_format, "stdout format: csv|table")->capture_default_str();

  // stats
  auto* stats_cmd = app.add_subcommand("stats", "Fuzzy-match similarity histogram");
  std::string st_tm, st_format, st_queries;
  int st_k = 1;
  bool st_json = false;
  stats_cmd->add_option("--tm", st_tm, "TM file")->required()->check(CLI::ExistingFile);
  stats_cmd->add_option("--format", st_format, "tsv|jsonl (default: by extension)");
  stats_cmd->add_option("--queries", st_queries, "Query segments; default is the TM with self-exclusion")
      ->check(CLI::ExistingFile);
  stats_cmd->add_option("-k,--k", st_k, "Matches counted per query")->capture_default_str();
  stats_cmd->add_flag("--json", st_json, "JSON output");

  // serve
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP service");
  std::string sv_host = "127.0.0.1", sv_data, sv_token_env;
  int sv_port = 8080;
  serve_cmd->add_option("--host", sv_host)->capture_default_str();
  serve_cmd->add_option("--port", sv_port)->capture_default_str();
  serve_cmd->add_option("--data-dir", sv_data, "Persistence directory (default: in memory)");
  serve_cmd->add_option("--token-env", sv_token_env, "Environment variable holding the bearer token");

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    if (*ingest_cmd) {
      const auto cfg = require_config(config_path);
      Manifest manifest("ingest", argc, argv);
      manifest.config(config_path, cfg);
      manifest.input("tm", ingest_input);
      IngestReport report;
      const auto tm = ingest(ingest_input, format_for(ingest_input, ingest_format), cfg.lang, &report);
      export_tm(tm, ingest_out, TmFormat::jsonl);
      manifest["counts"] = {{"read", report.read}, {"kept", report.kept}, {"dropped", report.dropped}};
      manifest.output(ingest_out);
      manifest.write(manifest_path(ingest_out, ingest_manifest));
      std::cout << json{{"read", report.read}, {"ingested", report.kept}, {"dropped", report.dropped}}.dump()
                << "\n";
      return 0;
    }

    if (*tr_cmd) {
      auto cfg = require_config(config_path);
      auto strategy = cfg.strategy;
      json overrides = json::object();
      if (!tr_strategy.empty()) overrides["kind"] = tr_strategy;
      if (tr_k) overrides["k"] = *tr_k;
      if (tr_max_terms) overrides["max_terms"] = *tr_max_terms;
      if (tr_seed) overrides["seed"] = *tr_seed;
      if (tr_dynamic) overrides["dynamic_max_tokens"] = true;
      apply_strategy(strategy, overrides);
      if (tr_top_p) strategy.generation.top_p = *tr_top_p;
      if (tr_temperature) strategy.generation.temperature = *tr_temperature;
      strategy.generation.validate();
      strategy.validate();
      if (tr_multiplier) cfg.lang.length_multiplier = *tr_multiplier;
      cfg.lang.validate();
      if (!tr_glossary.empty()) cfg.glossary_path = tr_glossary;
      if (strategy.term_source == TermSource::glossary && !cfg.glossary_path) {
        throw Error("config", std::string(to_string(strategy.kind)) + " needs a glossary (--glossary or config)");
      }
      if (strategy.mt_mode != MtMode::none && cfg.mt.kind == "none") {
        throw Error("config", std::string(to_string(strategy.kind)) + " needs an MT provider in the config");
      }

      Manifest manifest("translate", argc, argv);
      manifest.config(config_path, cfg);
      manifest["strategy"] = {{"kind", to_string(strategy.kind)},
                              {"k", strategy.top_k},
                              {"max_terms", strategy.max_terms},
                              {"seed", strategy.seed},
                              {"top_p", strategy.generation.top_p},
                              {"temperature", strategy.generation.temperature},
                              {"model", strategy.generation.model},
                              {"postprocess", to_string(strategy.postprocess)},
                              {"dynamic_max_tokens", strategy.dynamic_max_tokens}};
      manifest.input("tm", tr_tm);

      const auto tm = ingest(tr_tm, format_for(tr_tm, tr_tm_format), cfg.lang);
      TranslatorOptions topts;
      topts.budget = cfg.budget;
      topts.display_names = cfg.display_names;
      topts.extraction_separator = cfg.glossary.separator;
      Translator translator(cfg.lang, make_gateway(cfg), topts);
      translator.set_index(build_index(tm));
      auto store = std::make_shared<TermStore>();
      if (!tr_terms.empty()) {
        manifest.input("terms", tr_terms);
        load_segment_terms(tr_terms, tm, *store);
      }
      translator.set_term_store(store);
      if (cfg.glossary_path) {
        manifest.input("glossary", *cfg.glossary_path);
        translator.set_glossary(std::make_shared<const Glossary>(load_glossary(*cfg.glossary_path)));
      }
      if (auto mt = make_mt_provider(cfg.mt, cfg.lang)) translator.set_mt(mt);

      const auto progress = [](std::size_t done, std::size_t total) {
        spdlog::debug("translate: {}/{}", done, total);
      };
      std::vector<TranslationResult> results;
      if (tr_input.empty()) {
        results = translator.run_experiment(tm, strategy, true, progress);
      } else {
        manifest.input("input", tr_input);
        const auto segs = read_segments(tr_input);
        results = translator.translate_batch(segs.sources, strategy, {}, progress);
      }

      std::string out;
      std::size_t failed = 0;
      for (const auto& r : results) {
        if (!r.ok) {
          ++failed;
          std::cerr << "error [" << r.error_stage << "]: " << r.error << "\n";
        }
        out += to_json(r, {.include_prompt = !tr_no_prompt, .include_timing = tr_timing}).dump() + "\n";
      }
      write_file(tr_out, out);
      const auto stats = translator.gateway().stats();
      manifest["counts"] = {{"segments", results.size()}, {"failed", failed}};
      manifest["gateway"] = {{"requests", stats.requests}, {"attempts", stats.attempts}, {"retries", stats.retries}};
      manifest.output(tr_out);
      manifest.write(manifest_path(tr_out, tr_manifest));
      spdlog::info("translate: wrote {} results to {}", results.size(), tr_out);
      return failed == 0 ? 0 : kExitPartial;
    }

    if (*extract_cmd) {
      const auto cfg = require_config(config_path);
      if (ex_n < 1) throw Error("config", "--n must be >= 1");
      Manifest manifest("terms extract", argc, argv);
      manifest.config(config_path, cfg);
      manifest.input("tm", ex_tm);
      const auto tm = ingest(ex_tm, format_for(ex_tm, ex_format), cfg.lang);
      auto gateway = make_gateway(cfg);
      std::string out;
      std::size_t failed = 0, kept_total = 0, malformed = 0;
      for (const auto& pair : tm.pairs()) {
        json terms = json::array();
        try {
          const auto lines = extract_terms(pair, cfg.lang, *gateway, GenerationConfig::term_extraction(), ex_n,
                                           cfg.glossary.separator, cfg.display_names);
          const auto parsed = parse_term_lines(lines, cfg.glossary.separator, pair.source, pair.target);
          malformed += parsed.malformed;
          for (const auto& t : parsed.terms) {
            if (!t.src_present || !t.tgt_present) continue;
            terms.push_back({{"src", t.term.src}, {"tgt", t.term.tgt}});
            ++kept_total;
          }
        } catch (const Error& e) {
          ++failed;
          std::cerr << "error [" << e.stage() << "]: pair " << pair.id << ": " << e.what() << "\n";
          continue;
        }
        out += json{{"id", pair.id}, {"source", pair.source}, {"terms", terms}}.dump() + "\n";
      }
      write_file(ex_out, out);
      manifest["counts"] = {{"pairs", tm.size()}, {"failed", failed}, {"terms", kept_total}, {"malformed", malformed}};
      manifest.output(ex_out);
      manifest.write(manifest_path(ex_out, ex_manifest));
      spdlog::info("terms: {} terms from {} pairs ({} failed)", kept_total, tm.size(), failed);
      return failed == 0 ? 0 : kExitPartial;
    }

    if (*build_cmd) {
      AppConfig cfg;
      if (!config_path.empty()) cfg = load_config(config_path);
      auto gcfg = cfg.glossary;
      if (gb_min_freq) gcfg.min_freq = *gb_min_freq;
      if (gb_max_ngram) gcfg.max_ngram = *gb_max_ngram;
      gcfg.validate();
      Manifest manifest("glossary build", argc, argv);
      if (!config_path.empty()) manifest.config(config_path, cfg);
      manifest.input("terms", gb_terms);
      manifest["glossary"] = {{"min_freq", gcfg.min_freq}, {"max_ngram", gcfg.max_ngram}};
      const auto candidates = load_candidates(gb_terms);
      const auto glossary = compile_glossary(candidates, gcfg);
      if (glossary.entries.empty()) spdlog::warn("glossary: no entries survived the filters");
      save_glossary(glossary, gb_out);
      manifest["counts"] = {{"candidates", candidates.size()}, {"entries", glossary.entries.size()}};
      manifest.output(gb_out);
      manifest.write(manifest_path(gb_out, gb_manifest));
      spdlog::info("glossary: {} entries from {} candidates", glossary.entries.size(), candidates.size());
      return 0;
    }

    if (*eval_cmd) {
      const auto refs_file = read_segments(ev_refs);
      const auto& refs = refs_file.targets.empty() ? refs_file.sources : refs_file.targets;
      std::vector<RunOutputs> runs;
      for (const auto& path : ev_runs) {
        RunOutputs run{fs::path(path).stem().string(), {}};
        std::size_t line_no = 0;
        for (const auto& line : text::split_lines(read_file(path))) {
          ++line_no;
          if (text::trim(line).empty()) continue;
          try {
            run.hypotheses.push_back(json::parse(line).value("output", std::string()));
          } catch (const json::exception& e) {
            throw RecordError("eval", line_no, path + ": " + e.what());
          }
        }
        runs.push_back(std::move(run));
      }
      const auto rep = report(runs, refs);
      if (!ev_csv.empty()) write_file(ev_csv, rep.to_csv());
      std::cout << (ev_format == "table" ? rep.to_table() : rep.to_csv());
      return 0;
    }

    if (*stats_cmd) {
      const auto cfg = require_config(config_path);
      const auto tm = ingest(st_tm, format_for(st_tm, st_format), cfg.lang);
      const auto index = build_index(tm);
      RetrievalConfig rc;
      rc.top_k = st_k;
      rc.validate();
      std::vector<double> scores;
      if (st_queries.empty()) {
        rc.exclude_exact_self = true;
        for (const auto& pair : tm.pairs()) {
          for (const auto& m : index->retrieve(pair.source, rc, pair.id)) scores.push_back(m.score);
        }
      } else {
        for (const auto& q : read_segments(st_queries).sources) {
          for (const auto& m : index->retrieve(q, rc)) scores.push_back(m.score);
        }
      }
      const auto hist = bucket_stats(std::span<const double>(scores));
      if (st_json) {
        json buckets = json::array();
        for (std::size_t i = 0; i < BucketHistogram::kBuckets; ++i) {
          buckets.push_back({{"range", BucketHistogram::labels()[i]}, {"count", hist.counts[i]}});
        }
        std::cout << json{{"k", st_k}, {"total", hist.total()}, {"buckets", buckets}}.dump(2) << "\n";
      } else {
        std::printf("%-12s %8s %8s\n", "similarity", "count", "percent");
        for (std::size_t i = 0; i < BucketHistogram::kBuckets; ++i) {
          const double pct = hist.total() ? 100.0 * static_cast<double>(hist.counts[i]) / hist.total() : 0.0;
          std::printf("%-12s %8zu %7.2f%%\n", std::string(BucketHistogram::labels()[i]).c_str(), hist.counts[i],
                      pct);
        }
        std::printf("%-12s %8zu\n", "total", hist.total());
      }
      return 0;
    }

    if (*serve_cmd) {
      const auto cfg = require_config(config_path);
      ServiceOptions opts;
      opts.data_dir = sv_data;
      opts.provider = make_provider(cfg.provider);
      opts.retry = cfg.retry;
      opts.mt = make_mt_provider(cfg.mt, cfg.lang);
      opts.default_strategy = cfg.strategy;
      opts.translator.budget = cfg.budget;
      opts.translator.display_names = cfg.display_names;
      opts.glossary = cfg.glossary;
      if (!sv_token_env.empty()) {
        const char* token = std::getenv(sv_token_env.c_str());
        if (!token || !*token) throw Error("config", "environment variable " + sv_token_env + " is empty");
        opts.bearer_token = token;
      }
      Service service(std::move(opts));
      service.listen(sv_host, sv_port);
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error [" << e.stage() << "]: " << e.what() << "\n";
    return e.stage() == "config" ? kExitConfig : kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error [internal]: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
