#pragma once

#include <string>
#include <vector>

#include "exposcope/entity.hpp"
#include "exposcope/llm_client.hpp"

namespace exposcope {

struct AliasValidationOptions {
  int retries = 3;  // extra attempts after an unparseable response
  DecodingParams decoding{0.0, 64};
  std::size_t concurrency = 8;
};

struct AliasValidationResult {
  std::vector<std::string> validated;     // subset of the raw aliases, in raw order
  std::vector<long long> dropped_indices;  // out-of-range option numbers
  int attempts = 0;
};

// Asks the model which numbered aliases refer exclusively to the entity.
// Throws ConfigError for an entity without aliases and DomainError when no
// attempt yields a JSON integer array.
AliasValidationResult validate_aliases(const EntityRecord& entity, LlmClient& client,
                                       const AliasValidationOptions& opts = {});

struct CatalogValidationSummary {
  std::size_t validated = 0;
  std::size_t without_aliases = 0;
  std::vector<std::string> failed;  // qids whose validation failed; left unvalidated
};

// Validates every entity that has not been validated yet. Entities without
// raw aliases get an empty validated set without a model call.
CatalogValidationSummary validate_catalog_aliases(Catalog& catalog, LlmClient& client,
                                                  const AliasValidationOptions& opts = {});

}  // namespace exposcope
