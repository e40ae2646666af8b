#include "exposcope/pipeline.hpp"

#include <algorithm>
#include <cstdlib>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "exposcope/checksum.hpp"
#include "exposcope/corpus.hpp"
#include "exposcope/error.hpp"
#include "exposcope/exposure.hpp"
#include "exposcope/index.hpp"
#include "exposcope/io.hpp"
#include "exposcope/parallel.hpp"

namespace exposcope {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void check_keys(const json& j, std::string_view where, std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) throw ConfigError(std::string(where) + " must be an object");
  for (const auto& [key, _] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError("unknown config key " + std::string(where) + "." + key);
    }
  }
}

template <typename T>
void read_opt(const json& j, const char* key, T& out, std::string_view where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key " + std::string(where) + "." + key + " has the wrong type");
  }
}

void read_path(const json& j, const char* key, fs::path& out, const fs::path& base, std::string_view where) {
  std::string s;
  if (!j.contains(key)) {
    if (!out.empty() && out.is_relative()) out = base / out;
    return;
  }
  read_opt(j, key, s, where);
  out = s.empty() ? fs::path() : fs::path(s);
  if (!out.empty() && out.is_relative()) out = base / out;
}

Date read_date(const json& j, const char* key, Date fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_string()) throw ConfigError(std::string("window.") + key + " must be a date string");
  auto d = parse_date(j.at(key).get<std::string>());
  if (!d) throw ConfigError(std::string("window.") + key + " is not a valid date");
  return *d;
}

std::string checksum_of(const fs::path& p) {
  if (fs::is_directory(p)) return file_checksum(p / "manifest.json");
  return file_checksum(p);
}

std::string params_hash(const json& params) {
  Fnv1a64 h;
  h.update(params.dump());
  return h.hex();
}

// Tracks per-stage manifests under <work>/stages.
class StageLedger {
 public:
  StageLedger(fs::path dir, bool force) : dir_(std::move(dir)), force_(force) {}

  struct Stage {
    std::string name;
    std::vector<fs::path> inputs;
    json params;
    std::vector<fs::path> outputs;
  };

  bool up_to_date(const Stage& s) const {
    const auto path = dir_ / (s.name + ".json");
    if (!fs::exists(path)) return false;
    auto m = json::parse(read_file(path), nullptr, false);
    if (m.is_discarded()) return false;
    if (m.value("params", "") != params_hash(s.params)) return false;
    if (m.value("inputs", json::object()) != checksums(s.inputs)) return false;
    for (const auto& o : s.outputs) {
      if (!fs::exists(o)) return false;
    }
    return m.value("outputs", json::object()) == checksums(s.outputs);
  }

  // Fails when outputs from an earlier, different run would be replaced.
  void guard(const Stage& s) const {
    if (force_) return;
    for (const auto& o : s.outputs) {
      if (fs::exists(o)) {
        throw ConfigError("stage " + s.name + ": " + o.string() +
                          " exists but does not match the current inputs; rerun with --force to rebuild it");
      }
    }
  }

  void record(const Stage& s) const {
    fs::create_directories(dir_);
    json m = {{"stage", s.name},
              {"params", params_hash(s.params)},
              {"inputs", checksums(s.inputs)},
              {"outputs", checksums(s.outputs)}};
    write_file_atomic(dir_ / (s.name + ".json"), m.dump(2) + "\n");
  }

 private:
  static json checksums(const std::vector<fs::path>& paths) {
    json j = json::object();
    for (const auto& p : paths) j[p.generic_string()] = fs::exists(p) ? checksum_of(p) : "";
    return j;
  }

  fs::path dir_;
  bool force_;
};

void prepare_output(const fs::path& out, bool force) {
  ensure_writable(out, force);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
}

std::vector<const EntityRecord*> scored_entities(const Catalog& c) {
  std::vector<const EntityRecord*> out;
  for (const auto& e : c.entities) {
    if (!e.unscoreable && e.exposure) out.push_back(&e);
  }
  return out;
}

std::map<std::string, std::string> read_title_overrides(const fs::path& path) {
  std::map<std::string, std::string> out;
  if (path.empty()) return out;
  auto j = json::parse(read_file(path), nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ConfigError("title overrides must be a JSON object: " + path.string());
  for (const auto& [qid, title] : j.items()) {
    if (!title.is_string()) throw ConfigError("title override for " + qid + " must be a string");
    out[qid] = title.get<std::string>();
  }
  return out;
}

std::string status_name(PageviewFetch::Status s) {
  switch (s) {
    case PageviewFetch::Status::Ok: return "ok";
    case PageviewFetch::Status::NotFound: return "not_found";
    case PageviewFetch::Status::Unavailable: return "unavailable";
  }
  return "unavailable";
}

std::uint64_t parse_u64(const std::string& s, std::string_view what) {
  std::size_t used = 0;
  std::uint64_t v = 0;
  try {
    if (!s.empty() && s[0] != '-') v = std::stoull(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (s.empty() || used != s.size()) throw IntegrityError("bad " + std::string(what) + ": " + s);
  return v;
}

template <typename F>
void for_each_csv(std::string_view text, std::string_view header, F&& fn) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line != header) throw IntegrityError("expected CSV header " + std::string(header));
  std::size_t no = 1;
  while (std::getline(in, line)) {
    ++no;
    if (line.empty()) continue;
    fn(split_csv_record(line), no);
  }
}

json elicit_params(const PipelineConfig& cfg) {
  auto j = cfg.to_json();
  return {{"elicitation", j["elicitation"]}, {"llm", j["llm"]}};
}

}  // namespace

// ---- config ----

TypeMappingConfig default_type_mapping() {
  TypeMappingConfig m;
  m.classes = {
      {"Q5", EntityType::Person},
      {"Q515", EntityType::Location},        {"Q6256", EntityType::Location},
      {"Q486972", EntityType::Location},     {"Q82794", EntityType::Location},
      {"Q43229", EntityType::Organization},  {"Q4830453", EntityType::Organization},
      {"Q783794", EntityType::Organization}, {"Q3918", EntityType::Organization},
      {"Q11424", EntityType::Art},           {"Q7725634", EntityType::Art},
      {"Q482994", EntityType::Art},          {"Q3305213", EntityType::Art},
      {"Q7366", EntityType::Art},            {"Q2424752", EntityType::Product},
      {"Q7397", EntityType::Product},        {"Q1420", EntityType::Product},
  };
  return m;
}

PipelineConfig PipelineConfig::from_json(const json& j, const fs::path& base_dir) {
  check_keys(j, "config",
             {"paths", "tokenizer", "index", "sampling", "aliases", "elicitation", "window", "pageviews", "bt", "llm"});
  PipelineConfig c;
  const json empty = json::object();
  auto section = [&](const char* key) -> const json& { return j.contains(key) ? j.at(key) : empty; };

  const auto& p = section("paths");
  check_keys(p, "paths",
             {"corpus", "index", "entities", "type_mapping", "title_overrides", "work", "cache", "journal", "reports"});
  read_path(p, "corpus", c.paths.corpus, base_dir, "paths");
  read_path(p, "index", c.paths.index, base_dir, "paths");
  read_path(p, "entities", c.paths.entities, base_dir, "paths");
  read_path(p, "type_mapping", c.paths.type_mapping, base_dir, "paths");
  read_path(p, "title_overrides", c.paths.title_overrides, base_dir, "paths");
  read_path(p, "work", c.paths.work, base_dir, "paths");
  read_path(p, "cache", c.paths.cache, base_dir, "paths");
  read_path(p, "journal", c.paths.journal, base_dir, "paths");
  read_path(p, "reports", c.paths.reports, base_dir, "paths");

  const auto& t = section("tokenizer");
  check_keys(t, "tokenizer", {"case_fold", "strip_punctuation"});
  read_opt(t, "case_fold", c.tokenizer.case_fold, "tokenizer");
  read_opt(t, "strip_punctuation", c.tokenizer.strip_punctuation, "tokenizer");

  const auto& ix = section("index");
  check_keys(ix, "index", {"shards", "threads"});
  read_opt(ix, "shards", c.shards, "index");
  read_opt(ix, "threads", c.threads, "index");

  const auto& s = section("sampling");
  check_keys(s, "sampling", {"per_type", "k", "seed", "language", "min_sitelinks", "types"});
  read_opt(s, "per_type", c.per_type, "sampling");
  read_opt(s, "k", c.k, "sampling");
  read_opt(s, "seed", c.seed, "sampling");
  read_opt(s, "language", c.ingest.language, "sampling");
  read_opt(s, "min_sitelinks", c.ingest.min_sitelinks, "sampling");
  if (s.contains("types")) {
    std::vector<std::string> names;
    read_opt(s, "types", names, "sampling");
    c.ingest.types.clear();
    for (const auto& n : names) {
      auto type = parse_entity_type(n);
      if (!type) throw ConfigError("sampling.types: unknown entity type " + n);
      c.ingest.types.push_back(*type);
    }
  }

  const auto& a = section("aliases");
  check_keys(a, "aliases", {"validate", "retries", "concurrency", "temperature", "max_tokens"});
  read_opt(a, "validate", c.validate_aliases, "aliases");
  read_opt(a, "retries", c.aliases.retries, "aliases");
  read_opt(a, "concurrency", c.aliases.concurrency, "aliases");
  read_opt(a, "temperature", c.aliases.decoding.temperature, "aliases");
  read_opt(a, "max_tokens", c.aliases.decoding.max_tokens, "aliases");

  const auto& e = section("elicitation");
  check_keys(e, "elicitation",
             {"trials", "orders", "retries", "concurrency", "temperature", "max_tokens", "include_aliases",
              "strict_json", "scope", "vote", "budget"});
  read_opt(e, "trials", c.elicit.trials, "elicitation");
  read_opt(e, "orders", c.orders, "elicitation");
  read_opt(e, "retries", c.elicit.retries, "elicitation");
  read_opt(e, "concurrency", c.elicit.concurrency, "elicitation");
  read_opt(e, "temperature", c.elicit.decoding.temperature, "elicitation");
  read_opt(e, "max_tokens", c.elicit.decoding.max_tokens, "elicitation");
  read_opt(e, "include_aliases", c.elicit.prompt.include_aliases, "elicitation");
  read_opt(e, "strict_json", c.elicit.strict_json, "elicitation");
  read_opt(e, "budget", c.elicit.budget, "elicitation");
  std::string scope = "type", vote = "majority";
  read_opt(e, "scope", scope, "elicitation");
  read_opt(e, "vote", vote, "elicitation");
  if (scope != "type" && scope != "global") throw ConfigError("elicitation.scope must be \"type\" or \"global\"");
  if (vote != "majority" && vote != "raw") throw ConfigError("elicitation.vote must be \"majority\" or \"raw\"");
  c.global_pairs = scope == "global";
  c.vote = vote == "raw" ? VoteMode::RawCounts : VoteMode::Majority;

  const auto& w = section("window");
  check_keys(w, "window", {"start", "end"});
  c.window.start = read_date(w, "start", c.window.start);
  c.window.end = read_date(w, "end", c.window.end);

  const auto& pv = section("pageviews");
  check_keys(pv, "pageviews",
             {"base_url", "project", "access", "agent", "user_agent", "requests_per_second", "max_attempts",
              "backoff_ms", "concurrency"});
  read_opt(pv, "base_url", c.endpoint.base_url, "pageviews");
  read_opt(pv, "project", c.endpoint.project, "pageviews");
  read_opt(pv, "access", c.endpoint.access, "pageviews");
  read_opt(pv, "agent", c.endpoint.agent, "pageviews");
  read_opt(pv, "user_agent", c.endpoint.user_agent, "pageviews");
  read_opt(pv, "requests_per_second", c.fetch.requests_per_second, "pageviews");
  read_opt(pv, "max_attempts", c.fetch.max_attempts, "pageviews");
  std::int64_t backoff = c.fetch.initial_backoff.count();
  read_opt(pv, "backoff_ms", backoff, "pageviews");
  c.fetch.initial_backoff = std::chrono::milliseconds(backoff);
  read_opt(pv, "concurrency", c.pageview_concurrency, "pageviews");

  const auto& b = section("bt");
  check_keys(b, "bt", {"epsilon", "tolerance", "max_iterations"});
  read_opt(b, "epsilon", c.bt.epsilon, "bt");
  read_opt(b, "tolerance", c.bt.tolerance, "bt");
  read_opt(b, "max_iterations", c.bt.max_iterations, "bt");

  const auto& l = section("llm");
  check_keys(l, "llm", {"client", "name", "script", "url", "model"});
  read_opt(l, "client", c.llm_client, "llm");
  read_opt(l, "name", c.model, "llm");
  read_path(l, "script", c.llm_script, base_dir, "llm");
  read_opt(l, "url", c.llm_url, "llm");
  read_opt(l, "model", c.llm_model, "llm");

  // Defaults that were not overridden still resolve against the config file.
  for (auto* path : {&c.paths.corpus, &c.paths.index, &c.paths.entities, &c.paths.work, &c.paths.cache,
                     &c.paths.reports}) {
    if (path->is_relative()) *path = base_dir / *path;
  }
  c.validate();
  return c;
}

PipelineConfig PipelineConfig::load(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("config file not found: " + path.string());
  auto j = json::parse(read_file(path), nullptr, false);
  if (j.is_discarded()) throw ConfigError("config file is not valid JSON: " + path.string());
  return from_json(j, fs::absolute(path).parent_path());
}

json PipelineConfig::to_json() const {
  std::vector<std::string> types;
  for (auto t : ingest.types) types.emplace_back(to_string(t));
  json tok;
  exposcope::to_json(tok, tokenizer);
  return {
      {"paths",
       {{"corpus", paths.corpus.generic_string()},
        {"index", paths.index.generic_string()},
        {"entities", paths.entities.generic_string()},
        {"type_mapping", paths.type_mapping.generic_string()},
        {"title_overrides", paths.title_overrides.generic_string()},
        {"work", paths.work.generic_string()},
        {"cache", paths.cache.generic_string()},
        {"journal", paths.journal.generic_string()},
        {"reports", paths.reports.generic_string()}}},
      {"tokenizer", tok},
      {"index", {{"shards", shards}, {"threads", threads}}},
      {"sampling",
       {{"per_type", per_type},
        {"k", k},
        {"seed", seed},
        {"language", ingest.language},
        {"min_sitelinks", ingest.min_sitelinks},
        {"types", types}}},
      {"aliases",
       {{"validate", validate_aliases},
        {"retries", aliases.retries},
        {"concurrency", aliases.concurrency},
        {"temperature", aliases.decoding.temperature},
        {"max_tokens", aliases.decoding.max_tokens}}},
      {"elicitation",
       {{"trials", elicit.trials},
        {"orders", orders},
        {"retries", elicit.retries},
        {"concurrency", elicit.concurrency},
        {"temperature", elicit.decoding.temperature},
        {"max_tokens", elicit.decoding.max_tokens},
        {"include_aliases", elicit.prompt.include_aliases},
        {"strict_json", elicit.strict_json},
        {"scope", global_pairs ? "global" : "type"},
        {"vote", vote == VoteMode::RawCounts ? "raw" : "majority"},
        {"budget", elicit.budget}}},
      {"window", {{"start", format_date(window.start)}, {"end", format_date(window.end)}}},
      {"pageviews",
       {{"base_url", endpoint.base_url},
        {"project", endpoint.project},
        {"access", endpoint.access},
        {"agent", endpoint.agent},
        {"user_agent", endpoint.user_agent},
        {"requests_per_second", fetch.requests_per_second},
        {"max_attempts", fetch.max_attempts},
        {"backoff_ms", fetch.initial_backoff.count()},
        {"concurrency", pageview_concurrency}}},
      {"bt", {{"epsilon", bt.epsilon}, {"tolerance", bt.tolerance}, {"max_iterations", bt.max_iterations}}},
      {"llm",
       {{"client", llm_client},
        {"name", model},
        {"script", llm_script.generic_string()},
        {"url", llm_url},
        {"model", llm_model}}},
  };
}

void PipelineConfig::validate() const {
  if (shards == 0) throw ConfigError("index.shards must be positive");
  if (per_type == 0) throw ConfigError("sampling.per_type must be positive");
  if (k == 0) throw ConfigError("sampling.k must be positive");
  if (2 * k > per_type) throw ConfigError("sampling.k must be at most half of sampling.per_type");
  if (ingest.types.empty()) throw ConfigError("sampling.types must name at least one type");
  if (elicit.trials < 1) throw ConfigError("elicitation.trials must be positive");
  if (orders != 1 && orders != 2) throw ConfigError("elicitation.orders must be 1 or 2");
  if (elicit.retries < 0 || aliases.retries < 0) throw ConfigError("retries must be non-negative");
  if (elicit.concurrency == 0 || aliases.concurrency == 0 || pageview_concurrency == 0) {
    throw ConfigError("concurrency must be positive");
  }
  if (fetch.max_attempts < 1) throw ConfigError("pageviews.max_attempts must be positive");
  if (!(fetch.requests_per_second > 0)) throw ConfigError("pageviews.requests_per_second must be positive");
  if (llm_client != "http" && llm_client != "oracle" && llm_client != "scripted") {
    throw ConfigError("llm.client must be http, oracle or scripted");
  }
  if (llm_client == "scripted" && llm_script.empty()) throw ConfigError("llm.script is required for the scripted client");
  if (model.empty() || model.find_first_of(",\n") != std::string::npos) {
    throw ConfigError("llm.name must be non-empty and free of commas");
  }
  window.validate();
  bt.validate();
}

fs::path PipelineConfig::journal() const {
  return paths.journal.empty() ? paths.work / "pairs.journal.jsonl" : paths.journal;
}

// ---- clients ----

std::unique_ptr<LlmClient> make_llm_client(const PipelineConfig& cfg, const RunContext& ctx, const Catalog* catalog) {
  if (ctx.llm != nullptr) {
    return std::make_unique<FunctionLlmClient>([llm = ctx.llm](const ChatRequest& r) { return llm->complete(r); });
  }
  if (cfg.llm_client == "oracle") {
    std::map<std::string, double> exposure;
    if (catalog != nullptr) {
      for (const auto& e : catalog->entities) {
        if (e.exposure) exposure[e.label] = std::max(exposure[e.label], static_cast<double>(*e.exposure));
      }
    }
    return std::make_unique<OracleLlmClient>(std::move(exposure));
  }
  if (cfg.llm_client == "scripted") {
    return std::make_unique<ScriptedLlmClient>(ScriptedLlmClient::from_file(cfg.llm_script));
  }
  if (ctx.offline) throw ConfigError("--offline forbids the http LLM client; configure llm.client oracle or scripted");
  HttpLlmConfig http;
  auto env = [](const char* name) {
    const char* v = std::getenv(name);
    return v ? std::string(v) : std::string();
  };
  http.url = cfg.llm_url.empty() ? env("EXPOSCOPE_LLM_URL") : cfg.llm_url;
  http.model = cfg.llm_model.empty() ? env("EXPOSCOPE_LLM_MODEL") : cfg.llm_model;
  http.api_key = env("EXPOSCOPE_LLM_KEY");
  if (http.url.empty()) throw ConfigError("no LLM endpoint: set llm.url or EXPOSCOPE_LLM_URL");
  if (http.model.empty()) throw ConfigError("no LLM model: set llm.model or EXPOSCOPE_LLM_MODEL");
  return std::make_unique<HttpLlmClient>(std::move(http));
}

// ---- stages ----

void stage_build_index(const PipelineConfig& cfg, const StageFiles& io, const RunContext& ctx) {
  ensure_writable(io.output, ctx.force);
  spdlog::info("tokenizing {}", io.input.string());
  auto tok = tokenize_corpus_file(io.input, cfg.tokenizer);
  spdlog::info("{} documents, {} tokens, {} skipped", tok.corpus.doc_count(), tok.corpus.token_count(),
               tok.corpus.skipped_ids.size());
  auto index = SuffixArrayIndex::build(tok.corpus, std::move(tok.vocabulary), cfg.tokenizer, cfg.shards, cfg.threads);
  index.write(io.output, ctx.force);
  spdlog::info("index written to {}", io.output.string());
}

IngestStats stage_ingest(const PipelineConfig& cfg, const StageFiles& io, const RunContext& ctx) {
  prepare_output(io.output, ctx.force);
  const auto mapping =
      cfg.paths.type_mapping.empty() ? default_type_mapping() : TypeMappingConfig::from_json_file(cfg.paths.type_mapping);
  IngestStats stats;
  auto catalog = ingest_wikidata(io.input, mapping, cfg.per_type, cfg.seed, cfg.ingest, &stats);
  normalize_catalog(catalog);
  write_catalog(io.output, catalog);
  spdlog::info("ingested {} records ({} malformed), kept {} entities", stats.records, stats.malformed,
               catalog.entities.size());
  return stats;
}

CatalogValidationSummary stage_validate_aliases(const PipelineConfig& cfg, const StageFiles& io, const RunContext& ctx) {
  prepare_output(io.output, ctx.force);
  auto catalog = read_catalog(io.input);
  CatalogValidationSummary summary;
  if (cfg.validate_aliases) {
    auto client = make_llm_client(cfg, ctx, &catalog);
    summary = validate_catalog_aliases(catalog, *client, cfg.aliases);
    for (const auto& q : summary.failed) spdlog::warn("alias validation failed for {}", q);
  } else {
    for (auto& e : catalog.entities) {
      if (!e.validated_aliases) e.validated_aliases = e.aliases;
    }
  }
  write_catalog(io.output, catalog);
  spdlog::info("aliases validated for {} entities, {} failed", summary.validated, summary.failed.size());
  return summary;
}

ScoreSummary stage_score(const PipelineConfig& cfg, const StageFiles& io, const fs::path& index_dir,
                         const RunContext& ctx) {
  prepare_output(io.output, ctx.force);
  auto catalog = read_catalog(io.input);
  const auto index = SuffixArrayIndex::open(index_dir);
  auto summary = score_exposure(catalog, index, cfg.tokenizer, std::max(1u, cfg.threads));
  for (const auto& q : summary.unscoreable) spdlog::warn("{} has no phrase that tokenizes; excluded", q);
  write_catalog(io.output, catalog);
  spdlog::info("scored {} entities", summary.scored);
  return summary;
}

void stage_select(const PipelineConfig& cfg, const StageFiles& io, const RunContext& ctx) {
  prepare_output(io.output, ctx.force);
  auto catalog = read_catalog(io.input);
  select_strata(catalog, cfg.k);
  write_catalog(io.output, catalog);
}

std::string serialize_pageview_rows(const std::vector<PageviewRow>& rows) {
  std::string out = "qid,title,status,views,missing_days\n";
  for (const auto& r : rows) {
    out += fmt::format("{},{},{},{},{}\n", csv_field(r.qid), csv_field(r.title), r.status,
                       r.views ? std::to_string(*r.views) : "", r.missing_days);
  }
  return out;
}

std::vector<PageviewRow> parse_pageview_rows(std::string_view text) {
  std::vector<PageviewRow> rows;
  for_each_csv(text, "qid,title,status,views,missing_days", [&](const std::vector<std::string>& f, std::size_t no) {
    if (f.size() != 5) throw IntegrityError("pageviews line " + std::to_string(no) + ": expected 5 fields");
    PageviewRow r{f[0], f[1], f[2], std::nullopt, 0};
    if (!f[3].empty()) r.views = parse_u64(f[3], "views");
    r.missing_days = static_cast<std::int64_t>(parse_u64(f[4], "missing_days"));
    rows.push_back(std::move(r));
  });
  return rows;
}

std::vector<PageviewRow> stage_pageviews(const PipelineConfig& cfg, const StageFiles& io, const RunContext& ctx) {
  prepare_output(io.output, ctx.force);
  const auto catalog = read_catalog(io.input);
  const auto overrides = read_title_overrides(cfg.paths.title_overrides);
  std::unique_ptr<PageviewClient> owned;
  PageviewClient* client = ctx.pageviews;
  if (client == nullptr && !ctx.offline) {
    owned = std::make_unique<HttpPageviewClient>(cfg.endpoint);
    client = owned.get();
  }
  PageviewFetcher fetcher(client, cfg.paths.cache, cfg.fetch);
  const auto entities = scored_entities(catalog);
  std::vector<PageviewRow> rows(entities.size());
  parallel_for(entities.size(), cfg.pageview_concurrency, [&](std::size_t i) {
    const auto& e = *entities[i];
    auto& row = rows[i];
    row.qid = e.qid;
    row.title = article_title(e, overrides);
    auto got = fetcher.fetch(row.title, cfg.window);
    row.status = status_name(got.status);
    if (got.status == PageviewFetch::Status::Ok) {
      row.views = aggregate_pageviews(got.series, cfg.window);
      row.missing_days = got.series.missing_days;
    } else {
      spdlog::warn("no pageviews for {} ({}): {}", e.qid, row.title, got.reason);
    }
  });
  write_file_atomic(io.output, serialize_pageview_rows(rows));
  return rows;
}

std::string serialize_direct_rows(const std::vector<DirectRow>& rows) {
  std::string out = "qid,mean,successes,reason\n";
  for (const auto& r : rows) {
    out += fmt::format("{},{},{},{}\n", csv_field(r.qid), r.mean ? fmt::format("{}", *r.mean) : "", r.successes,
                       csv_field(r.reason));
  }
  return out;
}

std::vector<DirectRow> parse_direct_rows(std::string_view text) {
  std::vector<DirectRow> rows;
  for_each_csv(text, "qid,mean,successes,reason", [&](const std::vector<std::string>& f, std::size_t no) {
    if (f.size() != 4) throw IntegrityError("direct line " + std::to_string(no) + ": expected 4 fields");
    DirectRow r{f[0], std::nullopt, static_cast<int>(parse_u64(f[2], "successes")), f[3]};
    if (!f[1].empty()) {
      try {
        r.mean = std::stod(f[1]);
      } catch (const std::exception&) {
        throw IntegrityError("direct line " + std::to_string(no) + ": bad mean");
      }
    }
    rows.push_back(std::move(r));
  });
  return rows;
}

std::vector<DirectRow> stage_direct(const PipelineConfig& cfg, const StageFiles& io, const RunContext& ctx) {
  prepare_output(io.output, ctx.force);
  const auto catalog = read_catalog(io.input);
  auto client = make_llm_client(cfg, ctx, &catalog);
  const auto entities = scored_entities(catalog);
  auto batch = elicit_direct_all(*client, entities, cfg.elicit);
  std::vector<DirectRow> rows;
  for (const auto* e : entities) {
    if (auto it = batch.results.find(e->qid); it != batch.results.end()) {
      rows.push_back({e->qid, it->second.mean, it->second.successes, ""});
    } else {
      const auto reason = batch.failed.count(e->qid) ? batch.failed.at(e->qid) : "not elicited";
      spdlog::warn("direct score missing for {}: {}", e->qid, reason);
      rows.push_back({e->qid, std::nullopt, 0, reason});
    }
  }
  write_file_atomic(io.output, serialize_direct_rows(rows));
  return rows;
}

PairSchedule selected_pair_schedule(const PipelineConfig& cfg, const Catalog& catalog) {
  std::map<EntityType, std::vector<std::string>> by_type;
  std::vector<std::string> all;
  for (const auto& e : catalog.entities) {
    if (e.unscoreable || !e.stratum || *e.stratum == Stratum::Unselected) continue;
    by_type[e.type].push_back(e.qid);
    all.push_back(e.qid);
  }
  if (all.empty()) throw ConfigError("catalog has no selected entities; run catalog select first");
  return cfg.global_pairs ? build_global_pair_schedule(all, cfg.orders, cfg.elicit.trials)
                          : build_pair_schedule(by_type, cfg.orders, cfg.elicit.trials);
}

PairElicitation stage_pairs(const PipelineConfig& cfg, const StageFiles& io, const RunContext& ctx) {
  const auto catalog = read_catalog(io.input);
  const auto schedule = selected_pair_schedule(cfg, catalog);
  std::map<std::string, const EntityRecord*> entities;
  for (const auto& e : catalog.entities) entities[e.qid] = &e;
  auto client = make_llm_client(cfg, ctx, &catalog);
  if (io.output.has_parent_path()) fs::create_directories(io.output.parent_path());
  auto result = elicit_pairs(*client, schedule, entities, io.output, cfg.elicit);
  spdlog::info("pair queries: {} scheduled, {} resumed, {} issued, {} pending", schedule.queries.size(),
               result.resumed, result.issued, result.pending);
  return result;
}

std::vector<PairTrial> completed_trials(const PairSchedule& schedule, const fs::path& journal) {
  auto done = read_journal(journal);
  std::vector<PairTrial> out;
  std::size_t missing = 0;
  for (const auto& q : schedule.queries) {
    auto it = done.find({schedule.shown_first(q), schedule.shown_second(q), q.trial});
    if (it == done.end()) {
      ++missing;
    } else {
      out.push_back(it->second);
    }
  }
  if (missing > 0) {
    throw DomainError(std::to_string(missing) + " scheduled pair queries are not in the journal yet; run signals pairs");
  }
  return out;
}

std::map<std::string, double> stage_fit(const PipelineConfig& cfg, const StageFiles& io, const RunContext& ctx) {
  prepare_output(io.output, ctx.force);
  const auto catalog = read_catalog(io.input);
  const auto schedule = selected_pair_schedule(cfg, catalog);
  const auto outcomes = aggregate_votes(schedule, completed_trials(schedule, cfg.journal()), cfg.vote);

  std::vector<std::optional<BtStrengths>> fits(schedule.groups.size());
  parallel_for(schedule.groups.size(), std::max(1u, cfg.threads), [&](std::size_t g) {
    fits[g] = fit_bradley_terry(WinMatrix::from_outcomes(schedule.groups[g].ids, outcomes), cfg.bt);
  });
  std::string text;
  std::map<std::string, double> strengths;
  for (std::size_t g = 0; g < fits.size(); ++g) {
    const auto& fit = *fits[g];
    const auto label = schedule.groups[g].type ? std::string(to_string(*schedule.groups[g].type)) : "all";
    if (!fit.converged) spdlog::warn("Bradley-Terry fit for {} stopped at {} iterations", label, fit.iterations);
    text += serialize_strengths(fit);
    for (std::size_t i = 0; i < fit.ids.size(); ++i) strengths[fit.ids[i]] = fit.p[static_cast<Eigen::Index>(i)];
  }
  write_file_atomic(io.output, text);
  return strengths;
}

AccuracyReport stage_accuracy(const PipelineConfig& cfg, const StageFiles& io, const RunContext& ctx) {
  const auto catalog = read_catalog(io.input);
  const auto schedule = selected_pair_schedule(cfg, catalog);
  const auto outcomes = aggregate_votes(schedule, completed_trials(schedule, cfg.journal()), VoteMode::Majority);
  auto report = pairwise_accuracy(outcomes, catalog);
  emit_plot_data(io.output, catalog, {{cfg.model, report}}, ctx.force);
  return report;
}

SignalTable build_signal_table(const Catalog& catalog, const std::vector<PageviewRow>& pageviews,
                               const std::vector<DirectRow>& direct, const std::map<std::string, double>& strengths) {
  std::map<std::string, std::optional<double>> views, scores;
  for (const auto& r : pageviews) {
    views[r.qid] = r.views ? std::optional<double>(static_cast<double>(*r.views)) : std::nullopt;
  }
  for (const auto& r : direct) scores[r.qid] = r.mean;
  SignalTable t;
  for (const auto* e : scored_entities(catalog)) {
    SignalRow row;
    row.qid = e->qid;
    row.type = e->type;
    row.stratum = e->stratum;
    row.exposure = *e->exposure;
    if (auto it = views.find(e->qid); it != views.end()) row.wikipedia = it->second;
    if (auto it = scores.find(e->qid); it != scores.end()) row.directly = it->second;
    if (auto it = strengths.find(e->qid); it != strengths.end()) row.comparison = it->second;
    t.rows.push_back(std::move(row));
  }
  std::sort(t.rows.begin(), t.rows.end(), [](const SignalRow& a, const SignalRow& b) {
    return std::tie(a.type, a.qid) < std::tie(b.type, b.qid);
  });
  return t;
}

CorrelationReport stage_correlate(const PipelineConfig& cfg, const CorrelateInputs& in, const RunContext& ctx) {
  const auto table_path = cfg.report_file("signals.csv");
  const auto md_path = cfg.report_file("correlation.md");
  const auto csv_path = cfg.report_file("correlation.csv");
  for (const auto& p : {table_path, md_path, csv_path}) prepare_output(p, ctx.force);

  const auto catalog = read_catalog(in.catalog);
  const auto pageviews = fs::exists(in.pageviews) ? parse_pageview_rows(read_file(in.pageviews)) : std::vector<PageviewRow>{};
  const auto direct = fs::exists(in.direct) ? parse_direct_rows(read_file(in.direct)) : std::vector<DirectRow>{};
  const auto strengths = fs::exists(in.strengths) ? parse_strengths(read_file(in.strengths)) : std::map<std::string, double>{};
  for (const auto& [name, p] : {std::pair{"pageviews", in.pageviews}, {"direct", in.direct}, {"strengths", in.strengths}}) {
    if (!fs::exists(p)) spdlog::warn("{} input {} not found; that signal is missing", name, p.string());
  }
  const auto table = build_signal_table(catalog, pageviews, direct, strengths);
  CorrelationReport report{{correlate_all(table, cfg.model)}};
  write_file_atomic(table_path, serialize_signal_table(table));
  write_file_atomic(md_path, emit_report(report, ReportFormat::Markdown));
  write_file_atomic(csv_path, emit_report(report, ReportFormat::Csv));
  return report;
}

// ---- full run ----

PipelineSummary run_pipeline(const PipelineConfig& cfg, const RunContext& ctx) {
  cfg.validate();
  if (!fs::exists(cfg.paths.entities)) throw ConfigError("entities file not found: " + cfg.paths.entities.string());
  if (!fs::exists(cfg.paths.corpus) && !fs::exists(cfg.paths.index / "manifest.json")) {
    throw ConfigError("corpus file not found: " + cfg.paths.corpus.string());
  }
  if (!ctx.offline && ctx.llm == nullptr) make_llm_client(cfg, ctx, nullptr);  // fail fast on missing endpoint

  fs::create_directories(cfg.paths.work);
  StageLedger ledger(cfg.paths.work / "stages", ctx.force);
  PipelineSummary summary;
  const auto all = cfg.to_json();
  auto run = [&](StageLedger::Stage stage, const std::function<void()>& body) {
    if (ledger.up_to_date(stage)) {
      spdlog::info("stage {}: up to date", stage.name);
      summary.skipped.push_back(stage.name);
      return;
    }
    ledger.guard(stage);
    spdlog::info("stage {}: running", stage.name);
    body();
    ledger.record(stage);
    summary.ran.push_back(stage.name);
  };
  RunContext forced = ctx;
  forced.force = true;  // the ledger has already vetted overwrites

  const auto ingested = cfg.work_file("catalog.ingested.jsonl");
  const auto validated = cfg.work_file("catalog.validated.jsonl");
  const auto scored = cfg.work_file("catalog.scored.jsonl");
  const auto selected = cfg.work_file("catalog.selected.jsonl");
  const auto pageviews = cfg.work_file("pageviews.csv");
  const auto direct = cfg.work_file("direct.csv");
  const auto strengths = cfg.work_file("strengths.jsonl");

  if (fs::exists(cfg.paths.corpus)) {
    run({"index", {cfg.paths.corpus}, {{"tokenizer", all["tokenizer"]}, {"shards", cfg.shards}}, {cfg.paths.index}},
        [&] { stage_build_index(cfg, {cfg.paths.corpus, cfg.paths.index}, forced); });
  }

  std::vector<fs::path> ingest_inputs{cfg.paths.entities};
  if (!cfg.paths.type_mapping.empty()) ingest_inputs.push_back(cfg.paths.type_mapping);
  run({"ingest", ingest_inputs, all["sampling"], {ingested}},
      [&] { stage_ingest(cfg, {cfg.paths.entities, ingested}, forced); });

  json alias_params = {{"aliases", all["aliases"]}, {"llm", all["llm"]}};
  std::vector<fs::path> alias_inputs{ingested};
  if (!cfg.llm_script.empty()) alias_inputs.push_back(cfg.llm_script);
  run({"validate-aliases", alias_inputs, alias_params, {validated}},
      [&] { stage_validate_aliases(cfg, {ingested, validated}, forced); });

  run({"score", {validated, cfg.paths.index}, all["tokenizer"], {scored}},
      [&] { stage_score(cfg, {validated, scored}, cfg.paths.index, forced); });

  run({"select", {scored}, {{"k", cfg.k}}, {selected}}, [&] { stage_select(cfg, {scored, selected}, forced); });

  std::vector<fs::path> pv_inputs{selected};
  if (!cfg.paths.title_overrides.empty()) pv_inputs.push_back(cfg.paths.title_overrides);
  run({"pageviews", pv_inputs, {{"window", all["window"]}, {"pageviews", all["pageviews"]}, {"offline", ctx.offline}},
       {pageviews}},
      [&] { stage_pageviews(cfg, {selected, pageviews}, forced); });

  std::vector<fs::path> llm_inputs{selected};
  if (!cfg.llm_script.empty()) llm_inputs.push_back(cfg.llm_script);
  run({"direct", llm_inputs, elicit_params(cfg), {direct}}, [&] { stage_direct(cfg, {selected, direct}, forced); });

  // The journal is append-only and resumes on its own; this stage always runs.
  const auto pairs = stage_pairs(cfg, {selected, cfg.journal()}, ctx);
  summary.ran.push_back("pairs");
  if (pairs.pending > 0) {
    throw DomainError(std::to_string(pairs.pending) + " pair queries remain after the budget; rerun to continue");
  }

  json fit_params = {{"bt", all["bt"]}, {"elicitation", all["elicitation"]}};
  run({"fit", {selected, cfg.journal()}, fit_params, {strengths}},
      [&] { stage_fit(cfg, {selected, strengths}, forced); });

  run({"accuracy", {selected, cfg.journal()}, all["elicitation"],
       {cfg.report_file("long_tail.csv"), cfg.report_file("accuracy.csv")}},
      [&] { stage_accuracy(cfg, {selected, cfg.paths.reports}, forced); });

  run({"correlate", {selected, pageviews, direct, strengths}, {{"name", cfg.model}},
       {cfg.report_file("signals.csv"), cfg.report_file("correlation.md"), cfg.report_file("correlation.csv")}},
      [&] { stage_correlate(cfg, {selected, pageviews, direct, strengths}, forced); });
  return summary;
}

}  // namespace exposcope
