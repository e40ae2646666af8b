#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "exposcope/entity.hpp"

namespace exposcope {

// Wikidata class id (a P31 value such as "Q5") to entity type.
struct TypeMappingConfig {
  std::map<std::string, EntityType> classes;

  static TypeMappingConfig from_json_file(const std::filesystem::path& path);
  std::optional<EntityType> resolve(const std::vector<std::string>& instance_of) const;
};

struct IngestOptions {
  std::string language = "en";
  std::vector<EntityType> types{kEntityTypes.begin(), kEntityTypes.end()};
  // Entities with fewer sitelinks are not candidates; 0 disables the filter.
  std::uint64_t min_sitelinks = 0;
};

struct IngestStats {
  std::uint64_t records = 0;
  std::uint64_t malformed = 0;
  std::uint64_t unlabeled = 0;
  std::uint64_t unmapped = 0;
  std::map<EntityType, std::uint64_t> candidates;
};

// Per-type random stream used for reservoir sampling: a splitmix64 hash of
// (seed, type ordinal) seeds an mt19937_64.
std::mt19937_64 type_stream(std::uint64_t seed, EntityType type);

// Uniform integer in [0, bound) by rejection; stable across standard libraries.
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound);

// Streams a Wikidata JSON dump (one entity per line, optional surrounding
// brackets and trailing commas) or a simplified catalog file, and samples
// exactly `per_type` candidates of each requested type with Algorithm R.
Catalog ingest_wikidata(const std::filesystem::path& dump, const TypeMappingConfig& mapping,
                        std::size_t per_type, std::uint64_t seed, const IngestOptions& options = {},
                        IngestStats* stats = nullptr);

}  // namespace exposcope
