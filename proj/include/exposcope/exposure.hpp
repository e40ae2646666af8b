#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "exposcope/entity.hpp"
#include "exposcope/index.hpp"

namespace exposcope {

// Label plus validated aliases as a disjunctive query; phrases that tokenize
// to nothing are dropped, duplicates collapse. nullopt when nothing is left.
std::optional<DisjunctiveQuery> entity_query(const EntityRecord& e, const SuffixArrayIndex& index);

struct ScoreSummary {
  std::size_t scored = 0;
  std::vector<std::string> unscoreable;
  std::size_t unvalidated = 0;  // scored from the label alone
};

// Sets exposure = exposure_count(index, entity_query(e)) for every entity.
// `tokenizer` must equal the one the index was built with.
ScoreSummary score_exposure(Catalog& catalog, const SuffixArrayIndex& index, const TokenizerConfig& tokenizer,
                            std::size_t threads = 1);

// Per type: sort scored entities by (exposure, qid); the first k become
// Sparse, the last k Popular, the rest Unselected. Unscoreable entities stay
// without a stratum. Types with no entities are skipped.
void select_strata(Catalog& catalog, std::size_t k);

// (rank, exposure) pairs per type, exposure descending, rank from 1.
using RankFrequency = std::vector<std::pair<std::size_t, std::uint64_t>>;
std::map<EntityType, RankFrequency> long_tail_distribution(const Catalog& catalog);

// Least-squares slope of log(exposure) against log(rank); zero exposures skipped.
double log_log_slope(const RankFrequency& series);

}  // namespace exposcope
