#include "exposcope/accuracy.hpp"

#include <map>
#include <utility>

#include "exposcope/error.hpp"

namespace exposcope {

std::string_view to_string(PairGroup g) {
  switch (g) {
    case PairGroup::SparseSparse: return "sparse-sparse";
    case PairGroup::PopularPopular: return "popular-popular";
    case PairGroup::Cross: return "cross";
  }
  return "?";
}

std::optional<PairGroup> parse_pair_group(std::string_view name) {
  for (auto g : kPairGroups) {
    if (to_string(g) == name) return g;
  }
  return std::nullopt;
}

std::optional<double> AccuracyCell::accuracy() const {
  if (eligible == 0) return std::nullopt;
  return static_cast<double>(correct) / static_cast<double>(eligible);
}

AccuracyReport pairwise_accuracy(const std::vector<PairOutcome>& outcomes, const Catalog& catalog) {
  std::map<std::pair<EntityType, PairGroup>, AccuracyCell> cells;
  AccuracyReport report;
  for (const auto& o : outcomes) {
    const auto* a = catalog.find(o.a);
    const auto* b = catalog.find(o.b);
    if (a == nullptr || b == nullptr || a->type != b->type || !a->stratum || !b->stratum ||
        *a->stratum == Stratum::Unselected || *b->stratum == Stratum::Unselected) {
      ++report.ungrouped;
      continue;
    }
    PairGroup g = PairGroup::Cross;
    if (*a->stratum == *b->stratum) g = *a->stratum == Stratum::Sparse ? PairGroup::SparseSparse : PairGroup::PopularPopular;
    auto& cell = cells[{a->type, g}];
    cell.type = a->type;
    cell.group = g;
    if (!o.judged) {
      ++cell.unjudged;
      continue;
    }
    if (!a->exposure || !b->exposure) throw ConfigError("pairwise accuracy needs exposure for " + (a->exposure ? o.b : o.a));
    if (*a->exposure == *b->exposure) {
      ++cell.exposure_ties;
      continue;
    }
    if (o.w_ab == o.w_ba) {
      ++cell.vote_ties;
      continue;
    }
    ++cell.eligible;
    const bool a_won = o.w_ab > o.w_ba;
    const bool a_higher = *a->exposure > *b->exposure;
    if (a_won == a_higher) ++cell.correct;
  }
  std::map<EntityType, bool> types;
  for (const auto& [key, cell] : cells) types[key.first] = true;
  for (const auto& [type, _] : types) {
    for (auto g : kPairGroups) {
      auto it = cells.find({type, g});
      if (it != cells.end()) {
        report.cells.push_back(it->second);
      } else {
        report.cells.push_back(AccuracyCell{type, g});
      }
    }
  }
  return report;
}

}  // namespace exposcope
