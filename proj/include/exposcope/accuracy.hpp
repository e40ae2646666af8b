#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

#include "exposcope/elicitation.hpp"
#include "exposcope/entity.hpp"

namespace exposcope {

enum class PairGroup { SparseSparse, PopularPopular, Cross };

inline constexpr std::array<PairGroup, 3> kPairGroups{PairGroup::SparseSparse, PairGroup::PopularPopular,
                                                      PairGroup::Cross};

std::string_view to_string(PairGroup g);
std::optional<PairGroup> parse_pair_group(std::string_view name);

struct AccuracyCell {
  EntityType type = EntityType::Person;
  PairGroup group = PairGroup::SparseSparse;
  std::size_t correct = 0;
  std::size_t eligible = 0;        // judged, decisive, strictly different exposures
  std::size_t exposure_ties = 0;   // judged pairs with equal exposure
  std::size_t vote_ties = 0;       // judged pairs whose majority split evenly
  std::size_t unjudged = 0;

  // nullopt when no pair is eligible.
  std::optional<double> accuracy() const;
};

struct AccuracyReport {
  // Every type present in the outcomes, times the three groups, in enum order.
  std::vector<AccuracyCell> cells;
  std::size_t ungrouped = 0;  // pairs touching an unselected or unknown entity, or spanning types
};

// Fraction of eligible pairs whose majority winner has the higher exposure.
AccuracyReport pairwise_accuracy(const std::vector<PairOutcome>& outcomes, const Catalog& catalog);

}  // namespace exposcope
