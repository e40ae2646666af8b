#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "exposcope/entity.hpp"
#include "exposcope/llm_client.hpp"
#include "exposcope/prompts.hpp"

namespace exposcope {

struct ElicitOptions {
  int trials = 3;
  int retries = 3;  // extra attempts per trial when the response does not parse
  DecodingParams decoding;
  PromptOptions prompt;
  std::size_t concurrency = 32;
  bool strict_json = true;
  // Upper bound on new pair queries issued by one elicit_pairs call; 0 = unlimited.
  std::uint64_t budget = 0;
};

struct DirectTrial {
  std::string qid;
  int trial = 0;
  std::optional<int> score;  // [0, 1000]; nullopt marks a failed trial
  std::string raw;
};

struct DirectResult {
  std::string qid;
  double mean = 0;
  int successes = 0;
  std::vector<DirectTrial> trials;
};

// Mean of the parsed scores over `trials` prompts; a trial whose responses do
// not parse after the retries is dropped. DomainError when every trial fails.
DirectResult elicit_direct(LlmClient& client, const EntityRecord& entity, const ElicitOptions& opts = {});

struct DirectBatch {
  std::map<std::string, DirectResult> results;
  std::map<std::string, std::string> failed;  // qid -> reason
};

DirectBatch elicit_direct_all(LlmClient& client, const std::vector<const EntityRecord*>& entities,
                              const ElicitOptions& opts = {});

// One unordered pair (a < b by position in the group's sorted id list) shown
// in `order` 0 as (a, b) and in order 1 as (b, a).
struct ScheduledQuery {
  std::uint32_t group = 0;
  std::uint32_t a = 0;
  std::uint32_t b = 0;
  std::uint8_t order = 0;
  std::uint8_t trial = 1;
};

struct ScheduleGroup {
  std::optional<EntityType> type;  // nullopt for a cross-type group
  std::vector<std::string> ids;    // sorted ascending
};

struct PairSchedule {
  std::vector<ScheduleGroup> groups;
  std::vector<ScheduledQuery> queries;
  int orders = 2;
  int trials = 3;

  const std::string& shown_first(const ScheduledQuery& q) const;
  const std::string& shown_second(const ScheduledQuery& q) const;
};

// Ordering: group, pair (lexicographic by id), order, trial. Each group must
// hold at least two entities. C(n,2) * orders * trials queries per group.
PairSchedule build_pair_schedule(const std::map<EntityType, std::vector<std::string>>& ids_by_type, int orders = 2,
                                 int trials = 3);
// Every selected entity in one group, for cross-type comparison.
PairSchedule build_global_pair_schedule(std::vector<std::string> ids, int orders = 2, int trials = 3);

struct PairTrial {
  std::string first;   // shown as option 1's subject
  std::string second;
  int order = 0;
  int trial = 1;
  std::optional<int> option;  // nullopt marks a failed trial
  std::string justification;
  std::string raw;

  std::optional<std::string> winner() const;
};

struct PairElicitation {
  std::vector<PairTrial> trials;  // in schedule order, completed queries only
  std::uint64_t issued = 0;       // queries sent in this call
  std::uint64_t resumed = 0;      // queries read back from the journal
  std::uint64_t pending = 0;      // queries left for a later call
};

// Runs the schedule with bounded concurrency. Every finished query is appended
// to the journal (JSON lines) before it counts as done; queries already in the
// journal are not re-issued. A journal line that fails to parse is an
// IntegrityError.
PairElicitation elicit_pairs(LlmClient& client, const PairSchedule& schedule,
                             const std::map<std::string, const EntityRecord*>& entities,
                             const std::filesystem::path& journal, const ElicitOptions& opts = {});

// Reads a journal into trials keyed by (first, second, trial).
std::map<std::tuple<std::string, std::string, int>, PairTrial> read_journal(const std::filesystem::path& journal);

enum class VoteMode { Majority, RawCounts };

struct PairOutcome {
  std::string a, b;
  double w_ab = 0;  // contribution of a over b
  double w_ba = 0;
  int wins_a = 0, wins_b = 0;
  bool judged = false;  // false when no trial succeeded
  std::optional<EntityType> type;
};

// Counts wins by identity across both presentation orders. Majority mode gives
// (1, 0), (0, 1), or (0.5, 0.5) on an exact tie; raw mode returns the counts.
PairOutcome majority_vote(const std::string& a, const std::string& b, const std::vector<PairTrial>& trials,
                          VoteMode mode = VoteMode::Majority);

// Groups trials by unordered pair and votes each pair.
std::vector<PairOutcome> aggregate_votes(const PairSchedule& schedule, const std::vector<PairTrial>& trials,
                                         VoteMode mode = VoteMode::Majority);

}  // namespace exposcope
