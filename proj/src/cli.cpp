#include "exposcope/cli.hpp"

#include <algorithm>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "exposcope/error.hpp"
#include "exposcope/exposure.hpp"
#include "exposcope/index.hpp"
#include "exposcope/io.hpp"
#include "exposcope/pipeline.hpp"

namespace exposcope {

namespace fs = std::filesystem;

namespace {

void setup_logging(int verbosity) {
  static auto logger = [] {
    auto l = spdlog::stderr_color_mt("exposcope");
    l->set_pattern("%Y-%m-%dT%H:%M:%S %^%l%$ %v");
    spdlog::set_default_logger(l);
    return l;
  }();
  logger->set_level(verbosity > 0 ? spdlog::level::debug : verbosity < 0 ? spdlog::level::warn : spdlog::level::info);
}

// Value given on the command line, or empty.
struct PathFlag {
  std::string value;
  CLI::Option* opt = nullptr;
  void add(CLI::App* app, const std::string& name, const std::string& help) { opt = app->add_option(name, value, help); }
  fs::path get(const fs::path& fallback) const { return opt && opt->count() ? fs::path(value) : fallback; }
};

template <typename T>
struct ValueFlag {
  T value{};
  CLI::Option* opt = nullptr;
  void add(CLI::App* app, const std::string& name, const std::string& help) { opt = app->add_option(name, value, help); }
  void apply(T& target) const {
    if (opt && opt->count()) target = value;
  }
};

std::uint64_t count_text(const SuffixArrayIndex& index, const std::string& text) {
  auto q = index.encode(text);
  if (!q) throw ConfigError("phrase tokenizes to nothing: " + text);
  return count_phrase(index, *q);
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Entity exposure measurement and popularity-signal analysis", "exposcope"};
  app.require_subcommand(1);
  std::string config_path;
  bool offline = false, force = false;
  int verbose = 0, quiet = 0;
  app.add_option("--config", config_path, "Pipeline configuration file (JSON)");
  app.add_flag("--offline", offline, "Forbid network access; use caches and mock clients only");
  app.add_flag("--force", force, "Replace existing outputs");
  app.add_flag("-v,--verbose", verbose, "Debug logging");
  app.add_flag("-q,--quiet", quiet, "Warnings and errors only");

  // index
  auto* index_cmd = app.add_subcommand("index", "Build and query suffix-array indexes");
  index_cmd->require_subcommand(1);
  auto* index_build = index_cmd->add_subcommand("build", "Tokenize a JSONL corpus and write a sharded index");
  PathFlag build_corpus, build_output;
  ValueFlag<std::size_t> build_shards;
  ValueFlag<unsigned> build_threads;
  bool case_sensitive = false;
  build_corpus.add(index_build, "--corpus", "Corpus JSONL (optionally gzip)");
  build_output.add(index_build, "--output", "Index directory");
  build_shards.add(index_build, "--shards", "Shard count");
  build_threads.add(index_build, "--threads", "Build threads");
  index_build->add_flag("--case-sensitive", case_sensitive, "Disable case folding");

  auto* index_count = index_cmd->add_subcommand("count", "Count occurrences of a phrase");
  PathFlag count_index;
  std::string count_phrase_text;
  count_index.add(index_count, "--index", "Index directory");
  index_count->add_option("--phrase", count_phrase_text, "Phrase to count")->required();

  auto* index_exposure = index_cmd->add_subcommand("exposure", "Overlap-deduplicated count of alternative phrases");
  PathFlag exposure_index;
  std::vector<std::string> exposure_phrases;
  exposure_index.add(index_exposure, "--index", "Index directory");
  index_exposure->add_option("--phrase", exposure_phrases, "Phrase (repeat for aliases)")->required();

  // catalog
  auto* catalog_cmd = app.add_subcommand("catalog", "Build and score the entity catalog");
  catalog_cmd->require_subcommand(1);
  auto* ingest = catalog_cmd->add_subcommand("ingest", "Sample entities from a Wikidata dump or simplified catalog");
  PathFlag ingest_dump, ingest_mapping, ingest_output;
  ValueFlag<std::size_t> ingest_per_type;
  ValueFlag<std::uint64_t> ingest_seed;
  ingest_dump.add(ingest, "--dump", "Entity dump (JSON lines, optionally gzip)");
  ingest_mapping.add(ingest, "--mapping", "Class-to-type mapping (JSON)");
  ingest_per_type.add(ingest, "--per-type", "Entities sampled per type");
  ingest_seed.add(ingest, "--seed", "Sampling seed");
  ingest_output.add(ingest, "--output", "Catalog output");

  auto* validate = catalog_cmd->add_subcommand("validate-aliases", "Filter aliases with the model");
  PathFlag validate_in, validate_out;
  validate_in.add(validate, "--catalog", "Input catalog");
  validate_out.add(validate, "--output", "Output catalog");

  auto* score = catalog_cmd->add_subcommand("score", "Attach exposure counts");
  PathFlag score_in, score_index, score_out;
  score_in.add(score, "--catalog", "Input catalog");
  score_index.add(score, "--index", "Index directory");
  score_out.add(score, "--output", "Output catalog");

  auto* select = catalog_cmd->add_subcommand("select", "Assign sparse and popular strata");
  PathFlag select_in, select_out;
  ValueFlag<std::size_t> select_k;
  select_in.add(select, "--catalog", "Input catalog");
  select_k.add(select, "--k", "Entities per stratum and type");
  select_out.add(select, "--output", "Output catalog");

  // signals
  auto* signals_cmd = app.add_subcommand("signals", "Collect popularity signals");
  signals_cmd->require_subcommand(1);
  auto* pv = signals_cmd->add_subcommand("pageviews", "Aggregate Wikipedia pageviews");
  PathFlag pv_in, pv_out;
  pv_in.add(pv, "--catalog", "Selected catalog");
  pv_out.add(pv, "--output", "Pageview CSV");
  auto* direct = signals_cmd->add_subcommand("direct", "Elicit direct popularity scores");
  PathFlag direct_in, direct_out;
  direct_in.add(direct, "--catalog", "Selected catalog");
  direct_out.add(direct, "--output", "Direct score CSV");
  auto* pairs = signals_cmd->add_subcommand("pairs", "Elicit pairwise comparisons into the journal");
  PathFlag pairs_in, pairs_journal;
  ValueFlag<std::uint64_t> pairs_budget;
  pairs_in.add(pairs, "--catalog", "Selected catalog");
  pairs_journal.add(pairs, "--journal", "Journal file");
  pairs_budget.add(pairs, "--budget", "Maximum new queries in this run");

  // rank
  auto* rank_cmd = app.add_subcommand("rank", "Fit strengths and score pairwise accuracy");
  rank_cmd->require_subcommand(1);
  auto* fit = rank_cmd->add_subcommand("fit", "Fit Bradley-Terry strengths");
  PathFlag fit_in, fit_journal, fit_out;
  fit_in.add(fit, "--catalog", "Selected catalog");
  fit_journal.add(fit, "--journal", "Journal file");
  fit_out.add(fit, "--output", "Strengths (JSON lines)");
  auto* acc = rank_cmd->add_subcommand("accuracy", "Pairwise accuracy against exposure");
  PathFlag acc_in, acc_journal, acc_out;
  acc_in.add(acc, "--catalog", "Selected catalog");
  acc_journal.add(acc, "--journal", "Journal file");
  acc_out.add(acc, "--output-dir", "Directory for accuracy.csv and long_tail.csv");

  // report
  auto* report_cmd = app.add_subcommand("report", "Correlate signals and render reports");
  report_cmd->require_subcommand(1);
  auto* correlate = report_cmd->add_subcommand("correlate", "Build the signal table and correlation report");
  PathFlag cor_catalog, cor_pv, cor_direct, cor_strengths, cor_reports;
  ValueFlag<std::string> cor_name;
  cor_catalog.add(correlate, "--catalog", "Selected catalog");
  cor_pv.add(correlate, "--pageviews", "Pageview CSV");
  cor_direct.add(correlate, "--direct", "Direct score CSV");
  cor_strengths.add(correlate, "--strengths", "Strengths (JSON lines)");
  cor_reports.add(correlate, "--reports", "Report directory");
  cor_name.add(correlate, "--name", "Model name for the report");
  auto* emit = report_cmd->add_subcommand("emit", "Render correlation CSVs as one report");
  std::vector<std::string> emit_inputs;
  std::string emit_format = "markdown";
  std::string emit_output;
  emit->add_option("--input", emit_inputs, "Correlation CSV (repeat to place models side by side)")->required();
  emit->add_option("--format", emit_format, "markdown or csv")->check(CLI::IsMember({"markdown", "csv"}));
  emit->add_option("--output", emit_output, "Output file (default: standard output)");

  auto* pipeline_cmd = app.add_subcommand("pipeline", "Run every stage");
  pipeline_cmd->require_subcommand(1);
  auto* run = pipeline_cmd->add_subcommand("run", "Run the full chain, skipping up-to-date stages");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  setup_logging(verbose - quiet);
  RunContext ctx{force, offline};

  try {
    PipelineConfig cfg = config_path.empty() ? PipelineConfig::from_json(nlohmann::json::object(), fs::current_path())
                                             : PipelineConfig::load(config_path);
    if (case_sensitive) cfg.tokenizer.case_fold = false;
    build_shards.apply(cfg.shards);
    build_threads.apply(cfg.threads);
    ingest_per_type.apply(cfg.per_type);
    ingest_seed.apply(cfg.seed);
    select_k.apply(cfg.k);
    pairs_budget.apply(cfg.elicit.budget);
    cor_name.apply(cfg.model);
    if (ingest_mapping.opt->count()) cfg.paths.type_mapping = ingest_mapping.value;
    for (const auto* j : {&pairs_journal, &fit_journal, &acc_journal}) {
      if (j->opt->count()) cfg.paths.journal = j->value;
    }
    if (cor_reports.opt->count()) cfg.paths.reports = cor_reports.value;
    cfg.validate();

    const auto work = [&](const char* name) { return cfg.work_file(name); };
    if (index_build->parsed()) {
      stage_build_index(cfg, {build_corpus.get(cfg.paths.corpus), build_output.get(cfg.paths.index)}, ctx);
    } else if (index_count->parsed()) {
      const auto index = SuffixArrayIndex::open(count_index.get(cfg.paths.index));
      out << count_text(index, count_phrase_text) << "\n";
    } else if (index_exposure->parsed()) {
      const auto index = SuffixArrayIndex::open(exposure_index.get(cfg.paths.index));
      std::vector<PhraseQuery> phrases;
      for (const auto& p : exposure_phrases) {
        auto q = index.encode(p);
        if (!q) throw ConfigError("phrase tokenizes to nothing: " + p);
        if (std::find(phrases.begin(), phrases.end(), *q) == phrases.end()) phrases.push_back(*q);
      }
      out << exposure_count(index, DisjunctiveQuery(std::move(phrases))) << "\n";
    } else if (ingest->parsed()) {
      stage_ingest(cfg, {ingest_dump.get(cfg.paths.entities), ingest_output.get(work("catalog.ingested.jsonl"))}, ctx);
    } else if (validate->parsed()) {
      stage_validate_aliases(
          cfg, {validate_in.get(work("catalog.ingested.jsonl")), validate_out.get(work("catalog.validated.jsonl"))},
          ctx);
    } else if (score->parsed()) {
      stage_score(cfg, {score_in.get(work("catalog.validated.jsonl")), score_out.get(work("catalog.scored.jsonl"))},
                  score_index.get(cfg.paths.index), ctx);
    } else if (select->parsed()) {
      stage_select(cfg, {select_in.get(work("catalog.scored.jsonl")), select_out.get(work("catalog.selected.jsonl"))},
                   ctx);
    } else if (pv->parsed()) {
      stage_pageviews(cfg, {pv_in.get(work("catalog.selected.jsonl")), pv_out.get(work("pageviews.csv"))}, ctx);
    } else if (direct->parsed()) {
      stage_direct(cfg, {direct_in.get(work("catalog.selected.jsonl")), direct_out.get(work("direct.csv"))}, ctx);
    } else if (pairs->parsed()) {
      auto r = stage_pairs(cfg, {pairs_in.get(work("catalog.selected.jsonl")), cfg.journal()}, ctx);
      out << "issued " << r.issued << ", resumed " << r.resumed << ", pending " << r.pending << "\n";
    } else if (fit->parsed()) {
      stage_fit(cfg, {fit_in.get(work("catalog.selected.jsonl")), fit_out.get(work("strengths.jsonl"))}, ctx);
    } else if (acc->parsed()) {
      stage_accuracy(cfg, {acc_in.get(work("catalog.selected.jsonl")), acc_out.get(cfg.paths.reports)}, ctx);
    } else if (correlate->parsed()) {
      stage_correlate(cfg,
                      {cor_catalog.get(work("catalog.selected.jsonl")), cor_pv.get(work("pageviews.csv")),
                       cor_direct.get(work("direct.csv")), cor_strengths.get(work("strengths.jsonl"))},
                      ctx);
    } else if (emit->parsed()) {
      CorrelationReport merged;
      for (const auto& in : emit_inputs) {
        for (auto& m : parse_report_csv(read_file(in)).models) {
          for (const auto& existing : merged.models) {
            if (existing.model == m.model) throw ConfigError("model " + m.model + " appears in more than one input");
          }
          merged.models.push_back(std::move(m));
        }
      }
      const auto text = emit_report(merged, emit_format == "csv" ? ReportFormat::Csv : ReportFormat::Markdown);
      if (emit_output.empty()) {
        out << text;
      } else {
        ensure_writable(emit_output, force);
        write_file_atomic(emit_output, text);
      }
    } else if (run->parsed()) {
      auto summary = run_pipeline(cfg, ctx);
      spdlog::info("pipeline finished: {} stages ran, {} up to date", summary.ran.size(), summary.skipped.size());
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace exposcope
