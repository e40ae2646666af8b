#include "exposcope/elicitation.hpp"

#include <algorithm>
#include <ctime>
#include <mutex>
#include <tuple>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "exposcope/error.hpp"
#include "exposcope/io.hpp"
#include "exposcope/parallel.hpp"

namespace exposcope {

namespace {

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

template <typename Parse>
auto ask_with_retries(LlmClient& client, ChatRequest req, int retries, std::string& raw, Parse parse)
    -> decltype(parse(std::string_view{})) {
  for (int attempt = 0; attempt <= retries; ++attempt) {
    req.attempt = attempt;
    try {
      raw = client.complete(req);
    } catch (const DomainError& e) {
      raw.clear();
      spdlog::debug("model call failed: {}", e.what());
      continue;
    }
    if (auto parsed = parse(raw)) return parsed;
  }
  return std::nullopt;
}

void add_group_pairs(PairSchedule& s, std::uint32_t g) {
  const auto n = static_cast<std::uint32_t>(s.groups[g].ids.size());
  for (std::uint32_t a = 0; a < n; ++a) {
    for (std::uint32_t b = a + 1; b < n; ++b) {
      for (int o = 0; o < s.orders; ++o) {
        for (int t = 1; t <= s.trials; ++t) {
          s.queries.push_back({g, a, b, static_cast<std::uint8_t>(o), static_cast<std::uint8_t>(t)});
        }
      }
    }
  }
}

void check_schedule_shape(int orders, int trials) {
  if (orders != 1 && orders != 2) throw ConfigError("orders per pair must be 1 or 2");
  if (trials < 1 || trials > 255) throw ConfigError("trials per order must be in [1, 255]");
}

nlohmann::json journal_record(const PairTrial& t, const std::optional<EntityType>& type) {
  nlohmann::json j = {{"first", t.first},
                      {"second", t.second},
                      {"order", t.order},
                      {"trial", t.trial},
                      {"raw", t.raw},
                      {"option", t.option ? nlohmann::json(*t.option) : nlohmann::json(nullptr)},
                      {"justification", t.justification},
                      {"failed", !t.option.has_value()},
                      {"timestamp", utc_timestamp()}};
  if (type) j["type"] = to_string(*type);
  return j;
}

}  // namespace

DirectResult elicit_direct(LlmClient& client, const EntityRecord& entity, const ElicitOptions& opts) {
  if (opts.trials < 1) throw ConfigError("at least one trial is required");
  DirectResult out;
  out.qid = entity.qid;
  const auto prompt = render_direct_prompt(entity, opts.prompt);
  double sum = 0;
  for (int t = 1; t <= opts.trials; ++t) {
    DirectTrial trial{entity.qid, t, std::nullopt, {}};
    trial.score = ask_with_retries(client, ChatRequest{prompt, opts.decoding, t, 0}, opts.retries, trial.raw,
                                   [](std::string_view r) { return parse_direct_response(r); });
    if (trial.score) {
      sum += *trial.score;
      ++out.successes;
    }
    out.trials.push_back(std::move(trial));
  }
  if (out.successes == 0) throw DomainError("no parseable direct score for " + entity.qid);
  out.mean = sum / out.successes;
  return out;
}

DirectBatch elicit_direct_all(LlmClient& client, const std::vector<const EntityRecord*>& entities,
                              const ElicitOptions& opts) {
  std::vector<std::optional<DirectResult>> results(entities.size());
  std::vector<std::string> errors(entities.size());
  parallel_for(entities.size(), opts.concurrency, [&](std::size_t i) {
    try {
      results[i] = elicit_direct(client, *entities[i], opts);
    } catch (const DomainError& e) {
      errors[i] = e.what();
    }
  });
  DirectBatch batch;
  for (std::size_t i = 0; i < entities.size(); ++i) {
    if (results[i]) {
      batch.results.emplace(entities[i]->qid, std::move(*results[i]));
    } else {
      batch.failed.emplace(entities[i]->qid, errors[i]);
    }
  }
  return batch;
}

const std::string& PairSchedule::shown_first(const ScheduledQuery& q) const {
  const auto& ids = groups[q.group].ids;
  return q.order == 0 ? ids[q.a] : ids[q.b];
}

const std::string& PairSchedule::shown_second(const ScheduledQuery& q) const {
  const auto& ids = groups[q.group].ids;
  return q.order == 0 ? ids[q.b] : ids[q.a];
}

PairSchedule build_pair_schedule(const std::map<EntityType, std::vector<std::string>>& ids_by_type, int orders,
                                 int trials) {
  check_schedule_shape(orders, trials);
  PairSchedule s;
  s.orders = orders;
  s.trials = trials;
  for (const auto& [type, ids] : ids_by_type) {
    if (ids.size() < 2) throw ConfigError("type " + std::string(to_string(type)) + " needs at least two entities");
    ScheduleGroup g{type, ids};
    std::sort(g.ids.begin(), g.ids.end());
    if (std::adjacent_find(g.ids.begin(), g.ids.end()) != g.ids.end()) throw ConfigError("duplicate id in schedule");
    s.groups.push_back(std::move(g));
  }
  for (std::uint32_t g = 0; g < s.groups.size(); ++g) add_group_pairs(s, g);
  return s;
}

PairSchedule build_global_pair_schedule(std::vector<std::string> ids, int orders, int trials) {
  check_schedule_shape(orders, trials);
  if (ids.size() < 2) throw ConfigError("need at least two entities");
  PairSchedule s;
  s.orders = orders;
  s.trials = trials;
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) throw ConfigError("duplicate id in schedule");
  s.groups.push_back({std::nullopt, std::move(ids)});
  add_group_pairs(s, 0);
  return s;
}

std::optional<std::string> PairTrial::winner() const {
  if (!option) return std::nullopt;
  return *option == 1 ? first : second;
}

std::map<std::tuple<std::string, std::string, int>, PairTrial> read_journal(const std::filesystem::path& journal) {
  std::map<std::tuple<std::string, std::string, int>, PairTrial> out;
  if (!std::filesystem::exists(journal)) return out;
  for_each_line(journal, [&](std::string_view line, std::size_t no) {
    const auto where = journal.string() + ":" + std::to_string(no);
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw IntegrityError("corrupt journal line " + where);
    PairTrial t;
    try {
      t.first = j.at("first").get<std::string>();
      t.second = j.at("second").get<std::string>();
      t.order = j.at("order").get<int>();
      t.trial = j.at("trial").get<int>();
      t.raw = j.at("raw").get<std::string>();
      t.justification = j.value("justification", "");
      if (!j.at("option").is_null()) t.option = j.at("option").get<int>();
    } catch (const nlohmann::json::exception&) {
      throw IntegrityError("journal line missing fields at " + where);
    }
    if (t.option && *t.option != 1 && *t.option != 2) throw IntegrityError("journal option out of range at " + where);
    auto key = std::make_tuple(t.first, t.second, t.trial);
    if (!out.emplace(std::move(key), std::move(t)).second) throw IntegrityError("duplicate journal entry at " + where);
  });
  return out;
}

PairElicitation elicit_pairs(LlmClient& client, const PairSchedule& schedule,
                             const std::map<std::string, const EntityRecord*>& entities,
                             const std::filesystem::path& journal, const ElicitOptions& opts) {
  auto done = read_journal(journal);
  PairElicitation out;
  std::vector<std::optional<PairTrial>> slots(schedule.queries.size());
  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < schedule.queries.size(); ++i) {
    const auto& q = schedule.queries[i];
    auto it = done.find({schedule.shown_first(q), schedule.shown_second(q), q.trial});
    if (it != done.end()) {
      slots[i] = std::move(it->second);
      ++out.resumed;
    } else if (opts.budget == 0 || todo.size() < opts.budget) {
      todo.push_back(i);
    } else {
      ++out.pending;
    }
  }

  auto lookup = [&](const std::string& qid) -> const EntityRecord& {
    auto it = entities.find(qid);
    if (it == entities.end() || it->second == nullptr) throw ConfigError("schedule references unknown entity " + qid);
    return *it->second;
  };
  for (auto i : todo) {
    lookup(schedule.shown_first(schedule.queries[i]));
    lookup(schedule.shown_second(schedule.queries[i]));
  }

  AppendFile log(journal);
  std::mutex log_mu;
  parallel_for(todo.size(), opts.concurrency, [&](std::size_t k) {
    const auto i = todo[k];
    const auto& q = schedule.queries[i];
    PairTrial t;
    t.first = schedule.shown_first(q);
    t.second = schedule.shown_second(q);
    t.order = q.order;
    t.trial = q.trial;
    const auto prompt = render_comparison_prompt(lookup(t.first), lookup(t.second), opts.prompt);
    const auto answer =
        ask_with_retries(client, ChatRequest{prompt, opts.decoding, q.trial, 0}, opts.retries, t.raw,
                         [&](std::string_view r) { return parse_comparison_response(r, opts.strict_json); });
    if (answer) {
      t.option = answer->option;
      t.justification = answer->justification;
    }
    const auto rec = journal_record(t, schedule.groups[q.group].type).dump();
    {
      std::lock_guard lock(log_mu);
      log.append_line(rec);
    }
    slots[i] = std::move(t);
  });
  out.issued = todo.size();
  for (auto& s : slots) {
    if (s) out.trials.push_back(std::move(*s));
  }
  return out;
}

PairOutcome majority_vote(const std::string& a, const std::string& b, const std::vector<PairTrial>& trials,
                          VoteMode mode) {
  PairOutcome o;
  o.a = a;
  o.b = b;
  for (const auto& t : trials) {
    const bool same_pair = (t.first == a && t.second == b) || (t.first == b && t.second == a);
    if (!same_pair) throw ConfigError("trial for another pair passed to majority_vote");
    const auto w = t.winner();
    if (!w) continue;
    (*w == a ? o.wins_a : o.wins_b) += 1;
  }
  o.judged = o.wins_a + o.wins_b > 0;
  if (!o.judged) return o;
  if (mode == VoteMode::RawCounts) {
    o.w_ab = o.wins_a;
    o.w_ba = o.wins_b;
  } else if (o.wins_a > o.wins_b) {
    o.w_ab = 1;
  } else if (o.wins_b > o.wins_a) {
    o.w_ba = 1;
  } else {
    o.w_ab = o.w_ba = 0.5;
  }
  return o;
}

std::vector<PairOutcome> aggregate_votes(const PairSchedule& schedule, const std::vector<PairTrial>& trials,
                                         VoteMode mode) {
  std::map<std::pair<std::string, std::string>, std::vector<PairTrial>> by_pair;
  for (const auto& t : trials) {
    auto key = t.first < t.second ? std::make_pair(t.first, t.second) : std::make_pair(t.second, t.first);
    by_pair[key].push_back(t);
  }
  std::vector<PairOutcome> out;
  for (const auto& g : schedule.groups) {
    for (std::size_t a = 0; a < g.ids.size(); ++a) {
      for (std::size_t b = a + 1; b < g.ids.size(); ++b) {
        auto it = by_pair.find({g.ids[a], g.ids[b]});
        if (it == by_pair.end()) continue;
        auto o = majority_vote(g.ids[a], g.ids[b], it->second, mode);
        o.type = g.type;
        out.push_back(std::move(o));
      }
    }
  }
  return out;
}

}  // namespace exposcope
