#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace exposcope {

enum class EntityType { Person, Location, Organization, Art, Product };

inline constexpr std::array<EntityType, 5> kEntityTypes{EntityType::Person, EntityType::Location,
                                                        EntityType::Organization, EntityType::Art,
                                                        EntityType::Product};

std::string_view to_string(EntityType t);
// Case-insensitive; nullopt for anything but the five type names.
std::optional<EntityType> parse_entity_type(std::string_view name);

enum class Stratum { Unselected, Sparse, Popular };

std::string_view to_string(Stratum s);
std::optional<Stratum> parse_stratum(std::string_view name);

struct EntityRecord {
  std::string qid;
  std::string label;
  EntityType type = EntityType::Person;
  std::vector<std::string> aliases;
  std::optional<std::vector<std::string>> validated_aliases;
  std::optional<std::uint64_t> exposure;
  std::optional<Stratum> stratum;
  // Set when no phrase survives tokenization; such entities are excluded downstream.
  bool unscoreable = false;
};

// Simplified catalog line: qid, label, type, aliases, plus the optional
// validated_aliases, exposure, stratum and unscoreable fields.
nlohmann::json to_json(const EntityRecord& e);
EntityRecord entity_from_json(const nlohmann::json& j);

struct Catalog {
  std::vector<EntityRecord> entities;
  std::uint64_t seed = 0;

  std::map<EntityType, std::size_t> per_type_counts() const;
  const EntityRecord* find(std::string_view qid) const;
};

// Drops the label and duplicates from `aliases`, keeping first occurrences.
std::vector<std::string> clean_aliases(std::string_view label, const std::vector<std::string>& aliases);

Catalog read_catalog(const std::filesystem::path& path);
std::string serialize_catalog(const Catalog& catalog);
void write_catalog(const std::filesystem::path& path, const Catalog& catalog);

// Sorts by (type, qid) and rejects duplicate ids.
void normalize_catalog(Catalog& catalog);

}  // namespace exposcope
