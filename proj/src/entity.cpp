#include "exposcope/entity.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <tuple>

#include <json.hpp>

#include "exposcope/error.hpp"
#include "exposcope/io.hpp"

namespace exposcope {

std::string_view to_string(EntityType t) {
  switch (t) {
    case EntityType::Person: return "Person";
    case EntityType::Location: return "Location";
    case EntityType::Organization: return "Organization";
    case EntityType::Art: return "Art";
    case EntityType::Product: return "Product";
  }
  return "?";
}

namespace {
bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
         });
}
}  // namespace

std::optional<EntityType> parse_entity_type(std::string_view name) {
  for (auto t : kEntityTypes) {
    if (iequals(name, to_string(t))) return t;
  }
  return std::nullopt;
}

std::string_view to_string(Stratum s) {
  switch (s) {
    case Stratum::Unselected: return "Unselected";
    case Stratum::Sparse: return "Sparse";
    case Stratum::Popular: return "Popular";
  }
  return "?";
}

std::optional<Stratum> parse_stratum(std::string_view name) {
  for (auto s : {Stratum::Unselected, Stratum::Sparse, Stratum::Popular}) {
    if (iequals(name, to_string(s))) return s;
  }
  return std::nullopt;
}

nlohmann::json to_json(const EntityRecord& e) {
  nlohmann::json j = {{"qid", e.qid}, {"label", e.label}, {"type", to_string(e.type)}, {"aliases", e.aliases}};
  if (e.validated_aliases) j["validated_aliases"] = *e.validated_aliases;
  if (e.exposure) j["exposure"] = *e.exposure;
  if (e.stratum) j["stratum"] = to_string(*e.stratum);
  if (e.unscoreable) j["unscoreable"] = true;
  return j;
}

EntityRecord entity_from_json(const nlohmann::json& j) {
  EntityRecord e;
  e.qid = j.at("qid").get<std::string>();
  e.label = j.at("label").get<std::string>();
  const auto type_name = j.at("type").get<std::string>();
  const auto type = parse_entity_type(type_name);
  if (!type) throw ConfigError("unknown entity type '" + type_name + "' for " + e.qid);
  e.type = *type;
  if (j.contains("aliases")) e.aliases = clean_aliases(e.label, j.at("aliases").get<std::vector<std::string>>());
  if (j.contains("validated_aliases")) {
    auto v = clean_aliases(e.label, j.at("validated_aliases").get<std::vector<std::string>>());
    for (const auto& a : v) {
      if (std::find(e.aliases.begin(), e.aliases.end(), a) == e.aliases.end()) {
        throw ConfigError("validated alias '" + a + "' of " + e.qid + " is not a raw alias");
      }
    }
    e.validated_aliases = std::move(v);
  }
  if (j.contains("exposure")) e.exposure = j.at("exposure").get<std::uint64_t>();
  if (j.contains("stratum")) {
    const auto s = parse_stratum(j.at("stratum").get<std::string>());
    if (!s) throw ConfigError("unknown stratum for " + e.qid);
    e.stratum = *s;
  }
  e.unscoreable = j.value("unscoreable", false);
  return e;
}

std::map<EntityType, std::size_t> Catalog::per_type_counts() const {
  std::map<EntityType, std::size_t> out;
  for (const auto& e : entities) ++out[e.type];
  return out;
}

const EntityRecord* Catalog::find(std::string_view qid) const {
  for (const auto& e : entities) {
    if (e.qid == qid) return &e;
  }
  return nullptr;
}

std::vector<std::string> clean_aliases(std::string_view label, const std::vector<std::string>& aliases) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& a : aliases) {
    if (a.empty() || a == label || !seen.insert(a).second) continue;
    out.push_back(a);
  }
  return out;
}

void normalize_catalog(Catalog& catalog) {
  std::sort(catalog.entities.begin(), catalog.entities.end(), [](const auto& a, const auto& b) {
    return std::tie(a.type, a.qid) < std::tie(b.type, b.qid);
  });
  std::set<std::string_view> ids;
  for (const auto& e : catalog.entities) {
    if (!ids.insert(e.qid).second) throw ConfigError("duplicate entity id " + e.qid);
  }
}

Catalog read_catalog(const std::filesystem::path& path) {
  Catalog c;
  for_each_line(path, [&](std::string_view line, std::size_t no) {
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) return;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) throw ConfigError("malformed catalog line " + path.string() + ":" + std::to_string(no));
    if (j.contains("seed") && !j.contains("qid")) {
      c.seed = j.at("seed").get<std::uint64_t>();
      return;
    }
    try {
      c.entities.push_back(entity_from_json(j));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("bad catalog record at " + path.string() + ":" + std::to_string(no) + ": " + e.what());
    }
  });
  normalize_catalog(c);
  return c;
}

std::string serialize_catalog(const Catalog& catalog) {
  std::string out = nlohmann::json{{"seed", catalog.seed}}.dump() + "\n";
  for (const auto& e : catalog.entities) out += to_json(e).dump() + "\n";
  return out;
}

void write_catalog(const std::filesystem::path& path, const Catalog& catalog) {
  write_file_atomic(path, serialize_catalog(catalog));
}

}  // namespace exposcope
