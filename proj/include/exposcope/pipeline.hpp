#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "exposcope/accuracy.hpp"
#include "exposcope/alias_validation.hpp"
#include "exposcope/bradley_terry.hpp"
#include "exposcope/elicitation.hpp"
#include "exposcope/exposure.hpp"
#include "exposcope/entity.hpp"
#include "exposcope/llm_client.hpp"
#include "exposcope/pageviews.hpp"
#include "exposcope/report.hpp"
#include "exposcope/tokenizer.hpp"
#include "exposcope/wikidata.hpp"

namespace exposcope {

// Everything a run needs. Relative paths in a config file resolve against
// the file's directory.
struct PipelineConfig {
  struct Paths {
    std::filesystem::path corpus = "corpus.jsonl";
    std::filesystem::path index = "index";
    std::filesystem::path entities = "entities.jsonl";  // dump or simplified catalog
    std::filesystem::path type_mapping;                 // empty: built-in mapping
    std::filesystem::path title_overrides;              // optional {qid: title}
    std::filesystem::path work = "work";
    std::filesystem::path cache = "cache/pageviews";
    std::filesystem::path journal;  // empty: <work>/pairs.journal.jsonl
    std::filesystem::path reports = "reports";
  } paths;

  TokenizerConfig tokenizer;
  std::size_t shards = 1;
  unsigned threads = 1;

  std::size_t per_type = 5000;
  std::size_t k = 200;
  std::uint64_t seed = 0;
  IngestOptions ingest;

  bool validate_aliases = true;
  AliasValidationOptions aliases;

  ElicitOptions elicit;
  int orders = 2;
  bool global_pairs = false;
  VoteMode vote = VoteMode::Majority;

  AggregationWindow window;
  PageviewEndpoint endpoint;
  FetchOptions fetch;
  std::size_t pageview_concurrency = 4;

  BtConfig bt;

  std::string model = "model";
  std::string llm_client = "http";  // http | oracle | scripted
  std::filesystem::path llm_script;
  std::string llm_url;  // overrides EXPOSCOPE_LLM_URL
  std::string llm_model;  // overrides EXPOSCOPE_LLM_MODEL

  static PipelineConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
  static PipelineConfig load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
  void validate() const;

  std::filesystem::path journal() const;
  std::filesystem::path work_file(const std::string& name) const { return paths.work / name; }
  std::filesystem::path report_file(const std::string& name) const { return paths.reports / name; }
};

// Built-in P31 classes for the five entity types.
TypeMappingConfig default_type_mapping();

struct RunContext {
  bool force = false;
  bool offline = false;
  // Injected clients take precedence over the configured ones.
  LlmClient* llm = nullptr;
  PageviewClient* pageviews = nullptr;
};

// Stage inputs and outputs; the defaults come from the config.
struct StageFiles {
  std::filesystem::path input;
  std::filesystem::path output;
};

std::unique_ptr<LlmClient> make_llm_client(const PipelineConfig& cfg, const RunContext& ctx, const Catalog* catalog);

void stage_build_index(const PipelineConfig& cfg, const StageFiles& io, const RunContext& ctx);
IngestStats stage_ingest(const PipelineConfig& cfg, const StageFiles& io, const RunContext& ctx);
CatalogValidationSummary stage_validate_aliases(const PipelineConfig& cfg, const StageFiles& io, const RunContext& ctx);
ScoreSummary stage_score(const PipelineConfig& cfg, const StageFiles& io, const std::filesystem::path& index_dir,
                         const RunContext& ctx);
void stage_select(const PipelineConfig& cfg, const StageFiles& io, const RunContext& ctx);

struct PageviewRow {
  std::string qid;
  std::string title;
  std::string status;  // ok | not_found | unavailable
  std::optional<std::uint64_t> views;
  std::int64_t missing_days = 0;
};
std::string serialize_pageview_rows(const std::vector<PageviewRow>& rows);
std::vector<PageviewRow> parse_pageview_rows(std::string_view text);
std::vector<PageviewRow> stage_pageviews(const PipelineConfig& cfg, const StageFiles& io, const RunContext& ctx);

struct DirectRow {
  std::string qid;
  std::optional<double> mean;
  int successes = 0;
  std::string reason;
};
std::string serialize_direct_rows(const std::vector<DirectRow>& rows);
std::vector<DirectRow> parse_direct_rows(std::string_view text);
std::vector<DirectRow> stage_direct(const PipelineConfig& cfg, const StageFiles& io, const RunContext& ctx);

// Schedule over the selected (sparse and popular) entities.
PairSchedule selected_pair_schedule(const PipelineConfig& cfg, const Catalog& catalog);
PairElicitation stage_pairs(const PipelineConfig& cfg, const StageFiles& io, const RunContext& ctx);

// Journal trials for the schedule, in schedule order; throws DomainError when
// any scheduled query has not been answered yet.
std::vector<PairTrial> completed_trials(const PairSchedule& schedule, const std::filesystem::path& journal);

// Strengths per schedule group, one JSON object per line.
std::map<std::string, double> stage_fit(const PipelineConfig& cfg, const StageFiles& io, const RunContext& ctx);
AccuracyReport stage_accuracy(const PipelineConfig& cfg, const StageFiles& io, const RunContext& ctx);

struct CorrelateInputs {
  std::filesystem::path catalog, pageviews, direct, strengths;
};
SignalTable build_signal_table(const Catalog& catalog, const std::vector<PageviewRow>& pageviews,
                               const std::vector<DirectRow>& direct, const std::map<std::string, double>& strengths);
CorrelationReport stage_correlate(const PipelineConfig& cfg, const CorrelateInputs& in, const RunContext& ctx);

struct PipelineSummary {
  std::vector<std::string> ran;
  std::vector<std::string> skipped;
};

// Runs every stage in order. A stage whose manifest matches its current
// inputs and outputs is skipped; a stage whose outputs exist but no longer
// match fails unless ctx.force is set.
PipelineSummary run_pipeline(const PipelineConfig& cfg, const RunContext& ctx);

}  // namespace exposcope
