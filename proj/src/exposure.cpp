#include "exposcope/exposure.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>
#include <tuple>

#include <spdlog/spdlog.h>

#include "exposcope/error.hpp"
#include "exposcope/parallel.hpp"

namespace exposcope {

std::optional<DisjunctiveQuery> entity_query(const EntityRecord& e, const SuffixArrayIndex& index) {
  std::set<PhraseQuery> phrases;
  if (auto q = index.encode(e.label)) phrases.insert(std::move(*q));
  if (e.validated_aliases) {
    for (const auto& a : *e.validated_aliases) {
      if (auto q = index.encode(a)) phrases.insert(std::move(*q));
    }
  }
  if (phrases.empty()) return std::nullopt;
  return DisjunctiveQuery(std::vector<PhraseQuery>(phrases.begin(), phrases.end()));
}

ScoreSummary score_exposure(Catalog& catalog, const SuffixArrayIndex& index, const TokenizerConfig& tokenizer,
                            std::size_t threads) {
  if (!(tokenizer == index.tokenizer())) {
    throw ConfigError("tokenizer configuration differs from the one the index was built with");
  }
  ScoreSummary summary;
  std::vector<std::optional<std::uint64_t>> scores(catalog.entities.size());
  parallel_for(catalog.entities.size(), threads, [&](std::size_t i) {
    if (auto q = entity_query(catalog.entities[i], index)) scores[i] = exposure_count(index, *q);
  });
  for (std::size_t i = 0; i < catalog.entities.size(); ++i) {
    auto& e = catalog.entities[i];
    if (!e.validated_aliases) ++summary.unvalidated;
    e.exposure = scores[i];
    e.unscoreable = !scores[i].has_value();
    if (e.unscoreable) {
      e.stratum.reset();
      summary.unscoreable.push_back(e.qid);
    } else {
      ++summary.scored;
    }
  }
  if (!summary.unscoreable.empty()) {
    spdlog::warn("{} entities have no tokenizable name and are excluded", summary.unscoreable.size());
  }
  if (summary.unvalidated > 0) {
    spdlog::warn("{} entities had no validated aliases; scored from labels only", summary.unvalidated);
  }
  return summary;
}

void select_strata(Catalog& catalog, std::size_t k) {
  if (k == 0) throw ConfigError("stratum size must be positive");
  std::map<EntityType, std::vector<EntityRecord*>> by_type;
  for (auto& e : catalog.entities) {
    if (e.unscoreable) continue;
    if (!e.exposure) throw ConfigError("entity " + e.qid + " has not been scored");
    by_type[e.type].push_back(&e);
  }
  for (auto& [type, members] : by_type) {
    if (members.size() < 2 * k) {
      throw DomainError("type " + std::string(to_string(type)) + " has " + std::to_string(members.size()) +
                        " scored entities; " + std::to_string(2 * k) + " needed for k=" + std::to_string(k));
    }
  }
  for (auto& [type, members] : by_type) {
    std::sort(members.begin(), members.end(), [](const EntityRecord* a, const EntityRecord* b) {
      return std::tie(*a->exposure, a->qid) < std::tie(*b->exposure, b->qid);
    });
    for (std::size_t i = 0; i < members.size(); ++i) {
      members[i]->stratum = i < k                   ? Stratum::Sparse
                            : i >= members.size() - k ? Stratum::Popular
                                                      : Stratum::Unselected;
    }
  }
}

std::map<EntityType, RankFrequency> long_tail_distribution(const Catalog& catalog) {
  std::map<EntityType, std::vector<std::uint64_t>> by_type;
  for (const auto& e : catalog.entities) {
    if (e.unscoreable) continue;
    if (!e.exposure) throw ConfigError("entity " + e.qid + " has not been scored");
    by_type[e.type].push_back(*e.exposure);
  }
  std::map<EntityType, RankFrequency> out;
  for (auto& [type, v] : by_type) {
    std::sort(v.begin(), v.end(), std::greater<>());
    auto& series = out[type];
    for (std::size_t i = 0; i < v.size(); ++i) series.emplace_back(i + 1, v[i]);
  }
  return out;
}

double log_log_slope(const RankFrequency& series) {
  double n = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& [rank, freq] : series) {
    if (freq == 0) continue;
    const double x = std::log(static_cast<double>(rank)), y = std::log(static_cast<double>(freq));
    n += 1;
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  if (n < 2) throw DomainError("need at least two non-zero points for a slope");
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace exposcope
