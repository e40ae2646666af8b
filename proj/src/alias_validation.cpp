#include "exposcope/alias_validation.hpp"

#include <algorithm>
#include <mutex>
#include <set>

#include <spdlog/spdlog.h>

#include "exposcope/error.hpp"
#include "exposcope/parallel.hpp"
#include "exposcope/prompts.hpp"

namespace exposcope {

AliasValidationResult validate_aliases(const EntityRecord& entity, LlmClient& client,
                                       const AliasValidationOptions& opts) {
  if (entity.aliases.empty()) throw ConfigError("entity " + entity.qid + " has no aliases to validate");
  ChatRequest req{render_alias_prompt(entity), opts.decoding, 1, 0};
  AliasValidationResult result;
  for (int attempt = 0; attempt <= opts.retries; ++attempt) {
    req.attempt = attempt;
    ++result.attempts;
    std::optional<std::vector<long long>> picked;
    try {
      picked = parse_alias_response(client.complete(req));
    } catch (const DomainError& e) {
      spdlog::debug("alias validation attempt failed for {}: {}", entity.qid, e.what());
    }
    if (!picked) continue;
    std::set<std::size_t> keep;
    for (auto k : *picked) {
      if (k >= 1 && static_cast<std::size_t>(k) <= entity.aliases.size()) {
        keep.insert(static_cast<std::size_t>(k - 1));
      } else {
        result.dropped_indices.push_back(k);
      }
    }
    if (!result.dropped_indices.empty()) {
      spdlog::warn("alias validation for {} referenced {} out-of-range option(s)", entity.qid,
                   result.dropped_indices.size());
    }
    for (auto i : keep) result.validated.push_back(entity.aliases[i]);
    return result;
  }
  throw DomainError("alias validation for " + entity.qid + " gave no parseable answer after " +
                    std::to_string(result.attempts) + " attempts");
}

CatalogValidationSummary validate_catalog_aliases(Catalog& catalog, LlmClient& client,
                                                  const AliasValidationOptions& opts) {
  CatalogValidationSummary summary;
  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < catalog.entities.size(); ++i) {
    auto& e = catalog.entities[i];
    if (e.validated_aliases) continue;
    if (e.aliases.empty()) {
      e.validated_aliases.emplace();
      ++summary.without_aliases;
    } else {
      todo.push_back(i);
    }
  }
  std::vector<std::optional<std::vector<std::string>>> results(todo.size());
  parallel_for(todo.size(), opts.concurrency, [&](std::size_t k) {
    try {
      results[k] = validate_aliases(catalog.entities[todo[k]], client, opts).validated;
    } catch (const DomainError& e) {
      spdlog::warn("{}", e.what());
    }
  });
  for (std::size_t k = 0; k < todo.size(); ++k) {
    auto& e = catalog.entities[todo[k]];
    if (results[k]) {
      e.validated_aliases = std::move(results[k]);
      ++summary.validated;
    } else {
      summary.failed.push_back(e.qid);
    }
  }
  return summary;
}

}  // namespace exposcope
